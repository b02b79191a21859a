#pragma once

// Generalized Gell-Mann (GGM) operator bases and Bloch-vector conversion.
//
// For dimension N the basis has N^2-1 elements:
//   symmetric      Λs^{jk} = |j><k| + |k><j|,            1 <= j < k <= N
//   antisymmetric  Λa^{jk} = -i|j><k| + i|k><j|,         1 <= j < k <= N
//   diagonal       Λ^l = sqrt(2/(l(l+1))) (Σ_{j<=l} |j><j| - l|l+1><l+1|),  1 <= l <= N-1
// All indices above are 1-based, as in GGMIndex.
//
// Canonical Bloch ordering: all symmetric in lexicographic (j,k), then all
// antisymmetric in lexicographic (j,k), then diagonal by ascending l.

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dyntomo/matcore.hpp"

namespace dyntomo {

struct GGMIndex {
  enum class Kind { symmetric, antisymmetric, diagonal };

  Kind kind = Kind::diagonal;
  int j = 0;  // 1-based, symmetric/antisymmetric only
  int k = 0;  // 1-based, symmetric/antisymmetric only
  int l = 0;  // 1-based, diagonal only
  int dim = 0;

  static GGMIndex symmetric(int j, int k, int dim) { return {Kind::symmetric, j, k, 0, dim}; }
  static GGMIndex antisymmetric(int j, int k, int dim) { return {Kind::antisymmetric, j, k, 0, dim}; }
  static GGMIndex diagonal(int l, int dim) { return {Kind::diagonal, 0, 0, l, dim}; }

  bool valid() const noexcept;
  // Position in the canonical ordering. Throws ValidationError if invalid.
  int canonical_position() const;
  // "s12", "a23", "d3"; used as Bloch-component keys in reports.
  std::string key() const;

  bool operator==(const GGMIndex&) const = default;
};

std::size_t basis_size(int dim);
std::vector<GGMIndex> canonical_indices(int dim);
GGMIndex index_at(int dim, int position);

nlohmann::json to_json(const GGMIndex& idx);
GGMIndex ggm_index_from_json(const nlohmann::json& j);

HermitianObservable ggm(const GGMIndex& index);

// Cached canonical basis for `dim`; built once, then shared read-only.
std::shared_ptr<const std::vector<HermitianObservable>> ggm_basis(int dim);

// Standard qutrit Gell-Mann matrix λ_i, 1 <= i <= 8.
HermitianObservable gellmann_qutrit(int i);
// λ_i in terms of the 3x3 GGM basis (λ1=Λs12, λ2=Λa12, λ3=Λ^1, ...).
GGMIndex gellmann_qutrit_index(int i);

struct BlochVector {
  int dim = 0;
  Eigen::VectorXd components;  // length N^2-1, canonical ordering

  double operator[](const GGMIndex& idx) const { return components(idx.canonical_position()); }
};

BlochVector bloch_decompose(const DensityMatrix& rho);
// Same projection for any Hermitian matrix (raw reconstructions, tests).
BlochVector bloch_decompose_matrix(const ComplexMatrix& m);

struct AssembledState {
  ComplexMatrix matrix;  // Hermitian, unit trace
  PsdReport psd;
};

// ρ = I/N + ½ Σ s_a Λ_a. Does not project onto the PSD cone.
AssembledState bloch_assemble(const BlochVector& s, double tol = kDefaultTolerance);

}  // namespace dyntomo
