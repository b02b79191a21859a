#include "dyntomo/basis.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace dyntomo {

namespace {

// Number of pairs (j', k') with j' < k' that precede (j, k) lexicographically.
int pair_rank(int j, int k, int dim) {
  // rows 1..j-1 contribute (dim - r) pairs each
  const int before_row = (j - 1) * dim - (j - 1) * j / 2;
  return before_row + (k - j - 1);
}

int num_pairs(int dim) { return dim * (dim - 1) / 2; }

void require_dim(int dim) {
  if (dim < 2) throw DimensionError("GGM basis: dim must be >= 2, got " + std::to_string(dim));
}

}  // namespace

bool GGMIndex::valid() const noexcept {
  if (dim < 2) return false;
  switch (kind) {
    case Kind::symmetric:
    case Kind::antisymmetric:
      return 1 <= j && j < k && k <= dim;
    case Kind::diagonal:
      return 1 <= l && l <= dim - 1;
  }
  return false;
}

int GGMIndex::canonical_position() const {
  if (!valid()) throw ValidationError("invalid GGM index " + key() + " for dim " + std::to_string(dim));
  switch (kind) {
    case Kind::symmetric:
      return pair_rank(j, k, dim);
    case Kind::antisymmetric:
      return num_pairs(dim) + pair_rank(j, k, dim);
    case Kind::diagonal:
      return 2 * num_pairs(dim) + (l - 1);
  }
  return -1;
}

std::string GGMIndex::key() const {
  switch (kind) {
    case Kind::symmetric:
      return "s" + std::to_string(j) + "," + std::to_string(k);
    case Kind::antisymmetric:
      return "a" + std::to_string(j) + "," + std::to_string(k);
    case Kind::diagonal:
      return "d" + std::to_string(l);
  }
  return "?";
}

std::size_t basis_size(int dim) {
  require_dim(dim);
  return static_cast<std::size_t>(dim) * dim - 1;
}

std::vector<GGMIndex> canonical_indices(int dim) {
  require_dim(dim);
  std::vector<GGMIndex> out;
  out.reserve(basis_size(dim));
  for (int j = 1; j <= dim; ++j)
    for (int k = j + 1; k <= dim; ++k) out.push_back(GGMIndex::symmetric(j, k, dim));
  for (int j = 1; j <= dim; ++j)
    for (int k = j + 1; k <= dim; ++k) out.push_back(GGMIndex::antisymmetric(j, k, dim));
  for (int l = 1; l < dim; ++l) out.push_back(GGMIndex::diagonal(l, dim));
  return out;
}

GGMIndex index_at(int dim, int position) {
  const auto n = static_cast<int>(basis_size(dim));
  if (position < 0 || position >= n) throw ValidationError("GGM position out of range");
  return canonical_indices(dim)[position];
}

nlohmann::json to_json(const GGMIndex& idx) {
  nlohmann::json j{{"dim", idx.dim}};
  switch (idx.kind) {
    case GGMIndex::Kind::symmetric:
      j["kind"] = "s";
      break;
    case GGMIndex::Kind::antisymmetric:
      j["kind"] = "a";
      break;
    case GGMIndex::Kind::diagonal:
      j["kind"] = "d";
      break;
  }
  if (idx.kind == GGMIndex::Kind::diagonal) {
    j["l"] = idx.l;
  } else {
    j["j"] = idx.j;
    j["k"] = idx.k;
  }
  return j;
}

GGMIndex ggm_index_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    const int dim = j.at("dim").get<int>();
    GGMIndex idx;
    if (kind == "s") {
      idx = GGMIndex::symmetric(j.at("j").get<int>(), j.at("k").get<int>(), dim);
    } else if (kind == "a") {
      idx = GGMIndex::antisymmetric(j.at("j").get<int>(), j.at("k").get<int>(), dim);
    } else if (kind == "d") {
      idx = GGMIndex::diagonal(j.at("l").get<int>(), dim);
    } else {
      throw ParseError("GGM index: unknown kind '" + kind + "'");
    }
    if (!idx.valid()) throw ParseError("GGM index out of range: " + idx.key());
    return idx;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("GGM index JSON: ") + e.what());
  }
}

HermitianObservable ggm(const GGMIndex& index) {
  if (!index.valid()) throw ValidationError("ggm: invalid index " + index.key() + " for dim " + std::to_string(index.dim));
  ComplexMatrix m(index.dim);
  const Complex i_unit(0.0, 1.0);
  switch (index.kind) {
    case GGMIndex::Kind::symmetric:
      m.set(index.j - 1, index.k - 1, 1.0);
      m.set(index.k - 1, index.j - 1, 1.0);
      break;
    case GGMIndex::Kind::antisymmetric:
      m.set(index.j - 1, index.k - 1, -i_unit);
      m.set(index.k - 1, index.j - 1, i_unit);
      break;
    case GGMIndex::Kind::diagonal: {
      const double l = index.l;
      // sqrt(2/(l(l+1))) written as 1/sqrt(l(l+1)/2) so Λ^2 at N=3 is bitwise 1/sqrt(3).
      const double norm = 1.0 / std::sqrt(l * (l + 1.0) / 2.0);
      for (int d = 0; d < index.l; ++d) m.set(d, d, norm);
      m.set(index.l, index.l, -l * norm);
      break;
    }
  }
  return HermitianObservable(std::move(m), index.key(), 0.0);
}

std::shared_ptr<const std::vector<HermitianObservable>> ggm_basis(int dim) {
  require_dim(dim);
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const std::vector<HermitianObservable>>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[dim];
  if (!slot) {
    auto basis = std::make_shared<std::vector<HermitianObservable>>();
    for (const auto& idx : canonical_indices(dim)) basis->push_back(ggm(idx));
    slot = std::move(basis);
  }
  return slot;
}

GGMIndex gellmann_qutrit_index(int i) {
  switch (i) {
    case 1: return GGMIndex::symmetric(1, 2, 3);
    case 2: return GGMIndex::antisymmetric(1, 2, 3);
    case 3: return GGMIndex::diagonal(1, 3);
    case 4: return GGMIndex::symmetric(1, 3, 3);
    case 5: return GGMIndex::antisymmetric(1, 3, 3);
    case 6: return GGMIndex::symmetric(2, 3, 3);
    case 7: return GGMIndex::antisymmetric(2, 3, 3);
    case 8: return GGMIndex::diagonal(2, 3);
    default: throw ValidationError("gellmann_qutrit: index must be in 1..8, got " + std::to_string(i));
  }
}

HermitianObservable gellmann_qutrit(int i) {
  const Complex I(0.0, 1.0);
  const double r3 = 1.0 / std::sqrt(3.0);
  ComplexMatrix m(3);
  switch (i) {
    case 1: m = ComplexMatrix::from_rows({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}}); break;
    case 2: m = ComplexMatrix::from_rows({{0, -I, 0}, {I, 0, 0}, {0, 0, 0}}); break;
    case 3: m = ComplexMatrix::from_rows({{1, 0, 0}, {0, -1, 0}, {0, 0, 0}}); break;
    case 4: m = ComplexMatrix::from_rows({{0, 0, 1}, {0, 0, 0}, {1, 0, 0}}); break;
    case 5: m = ComplexMatrix::from_rows({{0, 0, -I}, {0, 0, 0}, {I, 0, 0}}); break;
    case 6: m = ComplexMatrix::from_rows({{0, 0, 0}, {0, 0, 1}, {0, 1, 0}}); break;
    case 7: m = ComplexMatrix::from_rows({{0, 0, 0}, {0, 0, -I}, {0, I, 0}}); break;
    case 8: m = ComplexMatrix::from_rows({{r3, 0, 0}, {0, r3, 0}, {0, 0, -2.0 * r3}}); break;
    default: throw ValidationError("gellmann_qutrit: index must be in 1..8, got " + std::to_string(i));
  }
  return HermitianObservable(std::move(m), "lambda" + std::to_string(i), 0.0);
}

BlochVector bloch_decompose_matrix(const ComplexMatrix& m) {
  const int n = m.dim();
  const auto basis = ggm_basis(n);
  BlochVector out{n, Eigen::VectorXd(static_cast<Eigen::Index>(basis->size()))};
  for (std::size_t a = 0; a < basis->size(); ++a)
    out.components(static_cast<Eigen::Index>(a)) = trace_inner_product((*basis)[a].mat, m).real();
  return out;
}

BlochVector bloch_decompose(const DensityMatrix& rho) { return bloch_decompose_matrix(rho.matrix()); }

AssembledState bloch_assemble(const BlochVector& s, double tol) {
  const auto expected = basis_size(s.dim);
  if (static_cast<std::size_t>(s.components.size()) != expected) {
    std::ostringstream os;
    os << "bloch_assemble: expected " << expected << " components for dim " << s.dim << ", got "
       << s.components.size();
    throw DimensionError(os.str());
  }
  const auto basis = ggm_basis(s.dim);
  ComplexMatrix::Storage rho = ComplexMatrix::Storage::Identity(s.dim, s.dim) / static_cast<double>(s.dim);
  for (std::size_t a = 0; a < basis->size(); ++a)
    rho += 0.5 * s.components(static_cast<Eigen::Index>(a)) * (*basis)[a].mat.eigen();
  ComplexMatrix mat(std::move(rho));
  const auto psd = is_psd(mat, tol);
  return {std::move(mat), psd};
}

}  // namespace dyntomo
