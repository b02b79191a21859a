#pragma once

// Phase-damping channels ρ(t) = D(t) ∘ ρ(0) with
//   d_jj(t) = 1,  d_jk(t) = d_kj(t) = exp(-γ_jk t).

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dyntomo/matcore.hpp"

namespace dyntomo {

// Unordered level pair, stored 1-based with j < k.
struct PairIndex {
  int j = 0;
  int k = 0;

  static PairIndex make(int a, int b);  // normalizes order, rejects a == b
  std::string key() const { return std::to_string(j) + "," + std::to_string(k); }
  auto operator<=>(const PairIndex&) const = default;
};

// All pairs of an N-level system in lexicographic order (1,2),(1,3),...,(N-1,N).
std::vector<PairIndex> level_pairs(int dim);

// Default relative tolerance under which two rates count as equal.
inline constexpr double kRateDistinctTolerance = 1e-9;

// |a - b| <= rel_tol * max(|a|, |b|).
bool rates_coincide(double a, double b, double rel_tol = kRateDistinctTolerance);

// First pair of positions (i < j) whose values coincide, if any.
std::optional<std::pair<std::size_t, std::size_t>> find_rate_collision(
    std::span<const double> rates, double rel_tol = kRateDistinctTolerance);

class DecoherenceRates {
 public:
  // Every pair must be present. Rates must be > 0, except exactly 0 for pairs listed in `frozen`.
  DecoherenceRates(int dim, std::map<PairIndex, double> rates, std::set<PairIndex> frozen = {});
  // Rates in lexicographic pair order, e.g. (γ12, γ13, γ23) for N=3.
  static DecoherenceRates from_ordered(int dim, std::vector<double> ordered, std::set<PairIndex> frozen = {});

  int dim() const noexcept { return dim_; }
  double rate(PairIndex p) const;
  bool is_frozen(PairIndex p) const { return frozen_.contains(p); }
  const std::set<PairIndex>& frozen() const noexcept { return frozen_; }
  const std::map<PairIndex, double>& by_pair() const noexcept { return rates_; }
  std::vector<PairIndex> pairs() const { return level_pairs(dim_); }
  std::vector<double> ordered() const;

  double max_rate() const;
  // Smallest strictly positive rate.
  double min_positive_rate() const;
  bool pairwise_distinct(double rel_tol = kRateDistinctTolerance) const;

 private:
  int dim_;
  std::map<PairIndex, double> rates_;
  std::set<PairIndex> frozen_;
};

// {"dim": N, "rates": {"1,2": γ, ...}, "frozen": ["1,2", ...]}; pair keys are 1-based.
// Duplicate keys, including "1,2" next to "2,1", are rejected.
DecoherenceRates parse_rates_json(const std::string& text);
nlohmann::json to_json(const DecoherenceRates& rates);

class DynamicMatrix {
 public:
  explicit DynamicMatrix(DecoherenceRates rates) : rates_(std::move(rates)) {}

  int dim() const noexcept { return rates_.dim(); }
  const DecoherenceRates& rates() const noexcept { return rates_; }
  // D(t). Pure; safe to call concurrently.
  ComplexMatrix at(double t) const;

 private:
  DecoherenceRates rates_;
};

DynamicMatrix build_dynamic_matrix(const DecoherenceRates& rates);

struct PsdViolation {
  double t = 0.0;
  double min_eigenvalue = 0.0;
};

struct ChannelValidation {
  bool unit_diagonal = true;   // d_ii(t) = 1 at every sample
  bool ones_at_zero = true;    // D(0) is the all-ones matrix
  bool positive = true;        // D(t) >= 0 at every sample
  double worst_min_eigenvalue = 0.0;
  double worst_t = 0.0;
  std::vector<PsdViolation> violations;

  bool passed() const noexcept { return unit_diagonal && ones_at_zero && positive; }
};

// 0 followed by `count` log-spaced samples over [0.01/γ_max, 10/γ_min].
std::vector<double> default_time_samples(const DecoherenceRates& rates, int count = 50);

ChannelValidation validate_channel(const DynamicMatrix& dm, std::span<const double> time_samples,
                                   double tol = kDefaultTolerance);

// D(t) ∘ ρ(0). Throws ValidationError if the result is not a density matrix.
DensityMatrix evolve(const DensityMatrix& rho0, const DynamicMatrix& dm, double t);
ComplexMatrix evolve_matrix(const ComplexMatrix& rho0, const DynamicMatrix& dm, double t);

// D(t) = Σ_k α_k(t) A_k with A_0 = I, A_k = E_jk + E_kj for the k-th pair,
// α_0 = 1, α_k(t) = exp(-γ_k t).
struct ChannelDecomposition {
  int dim = 0;
  int mu = 0;                       // N(N-1)/2 + 1
  std::vector<ComplexMatrix> basis; // [I, A_12, A_13, ..., A_(N-1)N]
  std::vector<PairIndex> pairs;     // pairs[k-1] belongs to basis[k]
  std::vector<double> rates;        // rates[k-1] belongs to basis[k]

  std::vector<double> coefficients(double t) const;
  ComplexMatrix reassemble(double t) const;
};

ChannelDecomposition decompose(const DynamicMatrix& dm);

}  // namespace dyntomo
