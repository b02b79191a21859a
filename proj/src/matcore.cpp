#include "dyntomo/matcore.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace dyntomo {

namespace {

void require_same_dim(const ComplexMatrix& a, const ComplexMatrix& b, const char* op) {
  if (a.dim() != b.dim()) {
    std::ostringstream os;
    os << op << ": dimension mismatch (" << a.dim() << " vs " << b.dim() << ")";
    throw DimensionError(os.str());
  }
}

}  // namespace

ComplexMatrix::ComplexMatrix(int dim) {
  if (dim < 2) throw DimensionError("ComplexMatrix: dim must be >= 2, got " + std::to_string(dim));
  m_ = Storage::Zero(dim, dim);
}

ComplexMatrix::ComplexMatrix(Storage m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw DimensionError("ComplexMatrix: matrix is not square");
  if (m_.rows() < 2) throw DimensionError("ComplexMatrix: dim must be >= 2");
}

ComplexMatrix ComplexMatrix::identity(int dim) {
  ComplexMatrix out(dim);
  out.m_.setIdentity();
  return out;
}

ComplexMatrix ComplexMatrix::ones(int dim) {
  ComplexMatrix out(dim);
  out.m_.setOnes();
  return out;
}

ComplexMatrix ComplexMatrix::diagonal(std::initializer_list<Complex> diag) {
  ComplexMatrix out(static_cast<int>(diag.size()));
  int i = 0;
  for (const auto& v : diag) {
    out.m_(i, i) = v;
    ++i;
  }
  return out;
}

ComplexMatrix ComplexMatrix::from_rows(std::initializer_list<std::initializer_list<Complex>> rows) {
  const auto n = static_cast<int>(rows.size());
  ComplexMatrix out(n);
  int r = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != n) throw DimensionError("from_rows: ragged or non-square rows");
    int c = 0;
    for (const auto& v : row) out.m_(r, c++) = v;
    ++r;
  }
  return out;
}

void ComplexMatrix::check_index(int row, int col) const {
  if (row < 0 || col < 0 || row >= dim() || col >= dim()) {
    std::ostringstream os;
    os << "ComplexMatrix: index (" << row << ", " << col << ") outside " << dim() << "x" << dim();
    throw DimensionError(os.str());
  }
}

Complex ComplexMatrix::at(int row, int col) const {
  check_index(row, col);
  return m_(row, col);
}

void ComplexMatrix::set(int row, int col, Complex value) {
  check_index(row, col);
  m_(row, col) = value;
}

double ComplexMatrix::max_abs_diff(const ComplexMatrix& other) const {
  require_same_dim(*this, other, "max_abs_diff");
  return (m_ - other.m_).cwiseAbs().maxCoeff();
}

double ComplexMatrix::max_abs() const { return m_.cwiseAbs().maxCoeff(); }

bool ComplexMatrix::is_hermitian(double tol) const {
  return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

ComplexMatrix ComplexMatrix::operator+(const ComplexMatrix& rhs) const {
  require_same_dim(*this, rhs, "operator+");
  return ComplexMatrix(Storage(m_ + rhs.m_));
}

ComplexMatrix ComplexMatrix::operator-(const ComplexMatrix& rhs) const {
  require_same_dim(*this, rhs, "operator-");
  return ComplexMatrix(Storage(m_ - rhs.m_));
}

ComplexMatrix ComplexMatrix::operator*(const ComplexMatrix& rhs) const {
  require_same_dim(*this, rhs, "operator*");
  return ComplexMatrix(Storage(m_ * rhs.m_));
}

ComplexMatrix ComplexMatrix::operator*(Complex scale) const { return ComplexMatrix(Storage(m_ * scale)); }

DensityMatrix::DensityMatrix(ComplexMatrix mat, double tol) : mat_(std::move(mat)), tol_(tol) {
  if (tol < 0) throw ValidationError("DensityMatrix: tolerance must be non-negative");
  if (!mat_.is_hermitian(tol)) throw ValidationError("DensityMatrix: matrix is not Hermitian");
  const Complex tr = mat_.trace();
  if (std::abs(tr.real() - 1.0) > tol || std::abs(tr.imag()) > tol) {
    std::ostringstream os;
    os << "DensityMatrix: trace " << tr.real() << " differs from 1";
    throw ValidationError(os.str());
  }
  const auto report = is_psd(mat_, tol);
  if (!report.psd) {
    std::ostringstream os;
    os << "DensityMatrix: minimum eigenvalue " << report.min_eigenvalue << " is negative";
    throw ValidationError(os.str());
  }
}

HermitianObservable::HermitianObservable(ComplexMatrix m, std::string lbl, double tol)
    : mat(std::move(m)), label(std::move(lbl)) {
  if (!mat.is_hermitian(tol)) throw ValidationError("observable '" + label + "' is not Hermitian");
}

ComplexMatrix hadamard_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_dim(a, b, "hadamard_product");
  return ComplexMatrix(ComplexMatrix::Storage(a.eigen().cwiseProduct(b.eigen())));
}

Complex trace_inner_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_dim(a, b, "trace_inner_product");
  // Tr{ab} = sum_ij a_ij b_ji, without forming the product.
  return a.eigen().cwiseProduct(b.eigen().transpose()).sum();
}

Eigen::VectorXd hermitian_eigenvalues(const ComplexMatrix& m) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix::Storage> solver(m.eigen(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("hermitian_eigenvalues: eigensolver failed");
  return solver.eigenvalues();
}

PsdReport is_psd(const ComplexMatrix& m, double tol) {
  if (!m.is_hermitian(tol)) throw ValidationError("is_psd: input is not Hermitian");
  const double min_eig = hermitian_eigenvalues(m).minCoeff();
  return {min_eig >= -tol, min_eig};
}

DensityMatrix random_density_matrix(int dim, std::uint64_t seed) {
  if (dim < 2) throw DimensionError("random_density_matrix: dim must be >= 2");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix::Storage g(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) {
      const double re = normal(gen);
      const double im = normal(gen);
      g(r, c) = Complex(re, im);
    }
  }
  ComplexMatrix::Storage rho = g * g.adjoint();
  rho /= rho.trace().real();
  // Remove the rounding-level anti-Hermitian part so validation never trips on it.
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return DensityMatrix(ComplexMatrix(std::move(rho)));
}

StateDistance matrix_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_dim(a, b, "state_distance");
  const ComplexMatrix::Storage diff = a.eigen() - b.eigen();
  Eigen::JacobiSVD<ComplexMatrix::Storage> svd(diff);
  return {0.5 * svd.singularValues().sum(), diff.norm()};
}

StateDistance state_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return matrix_distance(a.matrix(), b.matrix());
}

nlohmann::json to_json(const ComplexMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.dim(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.dim(); ++c) {
      const Complex v = m.eigen()(r, c);
      row.push_back({v.real(), v.imag()});
    }
    rows.push_back(std::move(row));
  }
  return {{"dim", m.dim()}, {"entries", std::move(rows)}};
}

ComplexMatrix complex_matrix_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("dim") || !j.contains("entries"))
      throw ParseError("matrix JSON needs \"dim\" and \"entries\"");
    const int dim = j.at("dim").get<int>();
    const auto& rows = j.at("entries");
    if (dim < 2) throw ParseError("matrix JSON: dim must be >= 2");
    if (!rows.is_array() || static_cast<int>(rows.size()) != dim)
      throw ParseError("matrix JSON: expected " + std::to_string(dim) + " rows");
    ComplexMatrix::Storage m(dim, dim);
    for (int r = 0; r < dim; ++r) {
      const auto& row = rows[r];
      if (!row.is_array() || static_cast<int>(row.size()) != dim)
        throw ParseError("matrix JSON: ragged row " + std::to_string(r));
      for (int c = 0; c < dim; ++c) {
        const auto& cell = row[c];
        if (!cell.is_array() || cell.size() != 2 || !cell[0].is_number() || !cell[1].is_number())
          throw ParseError("matrix JSON: entry must be [re, im]");
        m(r, c) = Complex(cell[0].get<double>(), cell[1].get<double>());
      }
    }
    return ComplexMatrix(std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("matrix JSON: ") + e.what());
  }
}

namespace {

ComplexMatrix::Storage psd_sqrt(const ComplexMatrix::Storage& m) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix::Storage> eig(m);
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.cast<Complex>().asDiagonal() * eig.eigenvectors().adjoint();
}

}  // namespace

double fidelity(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionError("fidelity: dimension mismatch");
  const auto root = psd_sqrt(a.eigen());
  const ComplexMatrix::Storage inner = root * b.eigen() * root;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix::Storage> eig(0.5 * (inner + inner.adjoint()));
  const double tr = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return tr * tr;
}

}  // namespace dyntomo
