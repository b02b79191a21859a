#pragma once

// Dense complex matrices and the handful of exact linear-algebra primitives
// the rest of the library is built on.
//
// Indexing convention: all storage and all accessors in this library are
// 0-based. Quantities that are 1-based in the physics notation (|j><k| with
// 1 <= j < k <= N, GGM indices, rate pairs) keep their 1-based form in the
// types that carry them (GGMIndex, PairIndex) and are converted with
// `index - 1` exactly at the point where a matrix entry is touched.

#include <complex>
#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "dyntomo/errors.hpp"

namespace dyntomo {

using Complex = std::complex<double>;

// Default tolerance for Hermiticity / trace / PSD validation.
inline constexpr double kDefaultTolerance = 1e-9;

class ComplexMatrix {
 public:
  using Storage = Eigen::MatrixXcd;

  explicit ComplexMatrix(int dim);  // zero matrix
  explicit ComplexMatrix(Storage m);

  static ComplexMatrix zero(int dim) { return ComplexMatrix(dim); }
  static ComplexMatrix identity(int dim);
  static ComplexMatrix ones(int dim);
  static ComplexMatrix diagonal(std::initializer_list<Complex> diag);
  static ComplexMatrix from_rows(std::initializer_list<std::initializer_list<Complex>> rows);

  int dim() const noexcept { return static_cast<int>(m_.rows()); }

  // Bounds-checked access; throws DimensionError outside [0,N)x[0,N).
  Complex at(int row, int col) const;
  void set(int row, int col, Complex value);

  const Storage& eigen() const noexcept { return m_; }

  ComplexMatrix adjoint() const { return ComplexMatrix(Storage(m_.adjoint())); }
  Complex trace() const { return m_.trace(); }

  // Largest absolute entry of this - other.
  double max_abs_diff(const ComplexMatrix& other) const;
  double max_abs() const;
  bool is_hermitian(double tol = kDefaultTolerance) const;

  ComplexMatrix operator+(const ComplexMatrix& rhs) const;
  ComplexMatrix operator-(const ComplexMatrix& rhs) const;
  ComplexMatrix operator*(const ComplexMatrix& rhs) const;  // matrix product
  ComplexMatrix operator*(Complex scale) const;

  bool operator==(const ComplexMatrix& rhs) const { return m_ == rhs.m_; }

 private:
  void check_index(int row, int col) const;
  Storage m_;
};

// Hermitian, unit trace, min eigenvalue >= -tol. Immutable once built.
class DensityMatrix {
 public:
  explicit DensityMatrix(ComplexMatrix mat, double tol = kDefaultTolerance);

  const ComplexMatrix& matrix() const noexcept { return mat_; }
  int dim() const noexcept { return mat_.dim(); }
  double tolerance() const noexcept { return tol_; }

 private:
  ComplexMatrix mat_;
  double tol_;
};

struct HermitianObservable {
  HermitianObservable(ComplexMatrix m, std::string lbl, double tol = kDefaultTolerance);

  ComplexMatrix mat;
  std::string label;
};

ComplexMatrix hadamard_product(const ComplexMatrix& a, const ComplexMatrix& b);

// Tr{a b}.
Complex trace_inner_product(const ComplexMatrix& a, const ComplexMatrix& b);

struct PsdReport {
  bool psd = false;
  double min_eigenvalue = 0.0;
};

// Throws ValidationError if `m` is not Hermitian within tol.
PsdReport is_psd(const ComplexMatrix& m, double tol = kDefaultTolerance);

// Ascending eigenvalues of a Hermitian matrix.
Eigen::VectorXd hermitian_eigenvalues(const ComplexMatrix& m);

// Ginibre construction G G^dagger / Tr(G G^dagger), G with i.i.d. standard
// complex Gaussian entries drawn from a generator seeded with `seed`.
DensityMatrix random_density_matrix(int dim, std::uint64_t seed);

struct StateDistance {
  double trace_distance = 0.0;
  double hs_distance = 0.0;
};

StateDistance state_distance(const DensityMatrix& a, const DensityMatrix& b);
// Same metric on raw matrices; used when a reconstruction is not physical.
StateDistance matrix_distance(const ComplexMatrix& a, const ComplexMatrix& b);

// Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2. Negative eigenvalues of the
// intermediate matrices are clipped, so a slightly unphysical `b` is accepted.
double fidelity(const ComplexMatrix& a, const ComplexMatrix& b);

// {"dim": N, "entries": [[[re, im], ...], ...]} row-major.
nlohmann::json to_json(const ComplexMatrix& m);
ComplexMatrix complex_matrix_from_json(const nlohmann::json& j);

}  // namespace dyntomo
