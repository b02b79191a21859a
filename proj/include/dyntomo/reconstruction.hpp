#pragma once

// Linear inversion of expectation-value time series.
//
// For an observable Q measured at t_j = j·t (j = 1..p) under D(t) = Σ_k α_k(t) A_k,
//   m(t_j) = Σ_k α_k(t_j) Tr{(Q ∘ A_k) ρ(0)}.
// The [α_k(t_j)] matrix has rows [1, ξ_1^j, ..., ξ_{p-1}^j] with ξ_k = exp(-γ_k t),
// a generalized Vandermonde matrix. Each non-zero Q ∘ A_k is a multiple of one
// GGM matrix, so every solved projection fixes one Bloch component.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dyntomo/basis.hpp"
#include "dyntomo/channel.hpp"
#include "dyntomo/matcore.hpp"
#include "dyntomo/measurement.hpp"

namespace dyntomo {

// Solves refuse above this 2-norm condition number.
inline constexpr double kMaxCondition = 1e12;

struct CoefficientMatrix {
  Eigen::MatrixXd values;             // p x p
  std::vector<double> rates;          // rates of columns 1..p-1
  std::vector<double> nodes;          // ξ_k = exp(-γ_k t), column 0 has ξ = 1
  std::vector<std::string> labels;    // column labels, column 0 is "const"
  TimeGrid grid;
  double condition_number = 0.0;
  double log_abs_determinant = 0.0;
  int determinant_sign = 0;
  bool invertible = false;
  // Colliding columns (0 = constant column, i.e. a zero rate) when singular.
  std::optional<std::pair<std::size_t, std::size_t>> collision;

  std::string collision_message() const;
};

// Columns: constant, then one per rate in the given order. grid.count must equal
// rates.size() + 1. `labels` (optional) name the rate columns in diagnostics.
CoefficientMatrix coefficient_matrix(std::span<const double> rates, const TimeGrid& grid,
                                     double distinct_tol = kRateDistinctTolerance,
                                     std::vector<std::string> labels = {});

struct ProjectionSolution {
  Eigen::VectorXd projections;
  double residual = 0.0;  // max |C x - m|
  double condition_number = 0.0;
};

// Throws SingularSystemError / IllConditionedError instead of approximating.
ProjectionSolution solve_projections(const CoefficientMatrix& cm, const Eigen::VectorXd& data,
                                     double max_condition = kMaxCondition);

// X = offset·I + scale·Λ for a single GGM matrix Λ.
struct GGMComponent {
  GGMIndex index;
  double scale = 0.0;
  double offset = 0.0;
};

// nullopt for the zero matrix; throws SchemeError if X is not of that form.
std::optional<GGMComponent> identify_ggm(const ComplexMatrix& x, double tol = 1e-12);

// The linear system of one dynamic observable: active terms k with Q ∘ A_k != 0
// (k = 0 is the identity term), the GGM component each one fixes, and the
// coefficient matrix over those terms.
struct ObservableSystem {
  std::string observable;
  std::vector<std::size_t> active;
  std::vector<GGMComponent> components;
  CoefficientMatrix matrix;
};

// Throws SchemeError if an observable lacks the identity term or the grid size
// differs from its number of active terms.
std::vector<ObservableSystem> observable_systems(const ObservableSet& set, const DecoherenceRates& rates,
                                                 const TimeGrid& grid,
                                                 double distinct_tol = kRateDistinctTolerance);

enum class ComponentSource { unknown, dynamic, statics };

struct SystemReport {
  std::string observable;
  std::vector<std::string> unknowns;  // GGM keys, constant column first
  double condition_number = 0.0;
  double residual = 0.0;
  double log_abs_determinant = 0.0;
};

struct ReconstructOptions {
  bool psd_repair = false;
  bool clamp_probabilities = false;  // Bell scheme only
  double max_condition = kMaxCondition;
  double distinct_tol = kRateDistinctTolerance;
  double tolerance = kDefaultTolerance;
};

struct ReconstructionReport {
  Scheme scheme = Scheme::qudit_general;
  int dim = 0;
  ComplexMatrix raw{2};      // I/N + ½ s·Λ, Hermitian, unit trace
  ComplexMatrix rho_hat{2};  // raw, or its PSD repair when requested and needed
  BlochVector bloch;
  std::vector<ComponentSource> sources;  // per canonical Bloch component
  std::vector<SystemReport> systems;
  bool psd = false;
  double min_eigenvalue = 0.0;
  bool psd_repair_applied = false;
  double max_residual = 0.0;
};

nlohmann::json to_json(const ReconstructionReport& report);

// Solves every dynamic observable's system and reads every static value. Static
// values come from `static_values` when given (one per set.statics entry),
// otherwise from the record's t = 0 entries.
struct PartialReconstruction {
  BlochVector bloch;
  std::vector<ComponentSource> sources;
  std::vector<SystemReport> systems;
};
PartialReconstruction solve_observable_systems(const MeasurementRecord& record, const ObservableSet& set,
                                               const DecoherenceRates& rates, const TimeGrid& grid,
                                               const ReconstructOptions& options,
                                               std::optional<std::span<const double>> static_values = std::nullopt);

ReconstructionReport reconstruct_qutrit(const MeasurementRecord& record, const DecoherenceRates& rates,
                                        const TimeGrid& grid, const ReconstructOptions& options = {});
ReconstructionReport reconstruct_fourlevel(const MeasurementRecord& record, const DecoherenceRates& rates,
                                           const TimeGrid& grid, const ReconstructOptions& options = {});
// diag_static holds Tr{Λ^l ρ} for l = 3..N-1 (N-3 values).
ReconstructionReport reconstruct_qudit(const MeasurementRecord& record, const DecoherenceRates& rates,
                                       const TimeGrid& grid, std::span<const double> diag_static,
                                       const ReconstructOptions& options = {});
// Statics taken from the record's t = 0 entries.
ReconstructionReport reconstruct_qudit(const MeasurementRecord& record, const DecoherenceRates& rates,
                                       const TimeGrid& grid, const ReconstructOptions& options = {});

struct BellMixture {
  double p1 = 0.0;
  double p2 = 0.0;
  double p3 = 0.0;

  double p4() const { return 1.0 - p1 - p2 - p3; }
  bool valid(double tol = kDefaultTolerance) const;
};

// p1|Φ+><Φ+| + p2|Φ-><Φ-| + p3|Ψ+><Ψ+| + p4|Ψ-><Ψ-|, Φ± = (|00> ± |11>)/√2,
// Ψ± = (|01> ± |10>)/√2 in the basis |00>,|01>,|10>,|11>.
DensityMatrix bell_mixture_state(const BellMixture& p);

struct BellReconstruction {
  BellMixture probabilities;  // raw linear-inversion output unless clamped
  bool in_range = false;      // all four probabilities within [0,1] (tolerance 1e-9)
  bool clamped = false;
  double lambda1 = 0.0;  // Tr{Λ^1 ρ}
  double s14 = 0.0;      // Tr{Λs^14 ρ}
  double s23 = 0.0;      // Tr{Λs^23 ρ}
  SystemReport system;
};

BellReconstruction reconstruct_bell(const MeasurementRecord& record, const DecoherenceRates& rates,
                                    const TimeGrid& grid, const ReconstructOptions& options = {});

nlohmann::json to_json(const BellReconstruction& result);

struct PsdRepair {
  DensityMatrix rho;
  bool applied = false;
};

// Clips negative eigenvalues to zero and rescales to unit trace. Inputs whose
// minimum eigenvalue is >= -tol come back unchanged. Throws ValidationError if
// the trace is off by more than 0.1.
PsdRepair psd_repair(const ComplexMatrix& raw, double tol = kDefaultTolerance);

}  // namespace dyntomo
