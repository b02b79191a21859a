#pragma once

// Observable sets for each reconstruction scheme and simulation of the
// expectation-value time series m_i(t_j) = Tr{Q_i (D(t_j) ∘ ρ(0))}.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyntomo/basis.hpp"
#include "dyntomo/channel.hpp"
#include "dyntomo/matcore.hpp"

namespace dyntomo {

enum class Scheme { qutrit_thm31, fourlevel_thm41, bell_single, qudit_general };

std::string to_string(Scheme s);
// Accepts the full tag ("qutrit_thm31") or the short name ("qutrit", "fourlevel", "bell", "qudit").
Scheme scheme_from_string(const std::string& name);

struct ObservableSet {
  int dim = 0;
  Scheme scheme = Scheme::qudit_general;
  std::vector<HermitianObservable> dynamic;  // measured on the time grid
  std::vector<HermitianObservable> statics;  // measured once at t = 0

  std::size_t distinct_count() const { return dynamic.size() + statics.size(); }
};

ObservableSet observables_qutrit();
ObservableSet observables_fourlevel();
ObservableSet observable_bell();

// Upper summation bounds of the qudit observables.
int kappa1(int dim);
int kappa2(int dim);

// Q1 = Λ^1 + Σ_{k even} Σ_{j<k} Λs^{jk} + Σ_{k odd, k>=3} Σ_{j<k} Λa^{jk}
// Q2 = Λ^2 + Σ_{k odd, k>=3} Σ_{j<k} Λs^{jk} + Σ_{k even} Σ_{j<k} Λa^{jk}
// (k = 2i for i = 1..κ1, k = 2i+1 for i = 1..κ2), plus statics Λ^3..Λ^{N-1}.
// Coincides with observables_qutrit() at N = 3.
ObservableSet observables_qudit(int dim);

// Observable set of a scheme; dim is ignored for the fixed-dimension schemes.
ObservableSet observables_for(Scheme scheme, int dim);

// Dimension a scheme requires, or nullopt for the qudit scheme (any N >= 3).
std::optional<int> scheme_dimension(Scheme scheme);

// Label used for the static diagonal GGM Λ^l in records.
std::string static_label(int l);

struct TimeGrid {
  double step = 0.0;
  int count = 0;

  // Throws ValidationError unless step > 0 and count >= 1.
  static TimeGrid make(double step, int count);
  double instant(int j) const { return step * j; }  // j = 1..count
  std::vector<double> instants() const;
};

// 1 / (2 γ_max).
double default_step(const DecoherenceRates& rates);

// Time instants the scheme needs: 4, 7, 3, or N(N-1)/2 + 1.
int required_instants(Scheme scheme, int dim);

double measure_direct(const ComplexMatrix& rho0, const DynamicMatrix& dm, const HermitianObservable& q, double t);
// Σ_k α_k(t) Tr{(Q ∘ A_k) ρ(0)}; A_k are symmetric so A_k^T = A_k.
double measure_decomposed(const ComplexMatrix& rho0, const ChannelDecomposition& dec, const HermitianObservable& q,
                          double t);

// Tr{Q (D(t) ∘ ρ0)}. With DYNTOMO_CHECK_ROUTES defined, the decomposed route is
// evaluated too and a disagreement above 1e-12 throws.
double measure(const DensityMatrix& rho0, const DynamicMatrix& dm, const HermitianObservable& q, double t);

struct MeasurementEntry {
  std::string observable;
  double time = 0.0;
  double value = 0.0;
};

struct MeasurementRecord {
  Scheme scheme = Scheme::qudit_general;
  int dim = 0;
  std::vector<MeasurementEntry> entries;
  double sigma = 0.0;
  std::optional<std::uint64_t> seed;

  // Entry with this label at time `t` (relative tolerance 1e-9), if any.
  const MeasurementEntry* find(const std::string& label, double t) const;
};

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

// Dynamic observables on every grid instant, statics once at t = 0. Noise is
// additive Gaussian, seeded per entry from (seed, entry index).
MeasurementRecord measure_series(const DensityMatrix& rho0, const DynamicMatrix& dm, const ObservableSet& set,
                                 const TimeGrid& grid, const NoiseSpec& noise = {});

// Time column: fixed-point, 12 significant digits. Values: shortest exact round trip.
std::string format_time(double t);
void write_record_csv(const MeasurementRecord& record, std::ostream& out);
// Parses `observable,time,value` rows; scheme/dim/sigma/seed come from the caller.
MeasurementRecord read_record_csv(std::istream& in, Scheme scheme, int dim);

nlohmann::json sidecar_json(const MeasurementRecord& record, const DecoherenceRates& rates, const TimeGrid& grid);

}  // namespace dyntomo
