#include "dyntomo/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dyntomo {

std::string CoefficientMatrix::collision_message() const {
  if (!collision) return "";
  const auto& [a, b] = *collision;
  std::ostringstream os;
  if (a == 0) {
    os << "rate for " << labels.at(b) << " is zero and duplicates the constant column";
  } else {
    os << "rates for " << labels.at(a) << " and " << labels.at(b) << " coincide (" << rates.at(a - 1) << " vs "
       << rates.at(b - 1) << ")";
  }
  return os.str();
}

CoefficientMatrix coefficient_matrix(std::span<const double> rates, const TimeGrid& grid, double distinct_tol,
                                     std::vector<std::string> labels) {
  if (!(grid.step > 0.0)) throw ValidationError("coefficient_matrix: base step must be positive");
  const auto p = rates.size() + 1;
  if (static_cast<std::size_t>(grid.count) != p) {
    std::ostringstream os;
    os << "coefficient_matrix: " << rates.size() << " rates need " << p << " time instants for a square system, got "
       << grid.count;
    throw DimensionError(os.str());
  }
  if (!labels.empty() && labels.size() != rates.size())
    throw DimensionError("coefficient_matrix: one label per rate expected");

  CoefficientMatrix cm;
  cm.grid = grid;
  cm.rates.assign(rates.begin(), rates.end());
  cm.labels.push_back("const");
  for (std::size_t c = 0; c < rates.size(); ++c)
    cm.labels.push_back(labels.empty() ? "rate #" + std::to_string(c + 1) : labels[c]);

  const auto n = static_cast<Eigen::Index>(p);
  cm.values.resize(n, n);
  cm.nodes.push_back(1.0);
  for (double g : rates) cm.nodes.push_back(std::exp(-g * grid.step));
  for (Eigen::Index j = 0; j < n; ++j) {
    const double t = grid.instant(static_cast<int>(j) + 1);
    cm.values(j, 0) = 1.0;
    for (Eigen::Index c = 1; c < n; ++c) cm.values(j, c) = std::exp(-rates[static_cast<std::size_t>(c - 1)] * t);
  }

  // The constant column behaves like a zero rate.
  std::vector<double> all{0.0};
  all.insert(all.end(), rates.begin(), rates.end());
  cm.collision = find_rate_collision(all, distinct_tol);
  cm.invertible = !cm.collision.has_value();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cm.values);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  cm.condition_number = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(cm.values);
  const auto& packed = lu.matrixLU();
  double log_abs = 0.0;
  int sign = static_cast<int>(lu.permutationP().determinant());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = packed(i, i);
    if (u == 0.0) {
      sign = 0;
      log_abs = -std::numeric_limits<double>::infinity();
      break;
    }
    log_abs += std::log(std::abs(u));
    if (u < 0.0) sign = -sign;
  }
  cm.log_abs_determinant = log_abs;
  cm.determinant_sign = sign;
  return cm;
}

ProjectionSolution solve_projections(const CoefficientMatrix& cm, const Eigen::VectorXd& data, double max_condition) {
  if (data.size() != cm.values.rows()) {
    std::ostringstream os;
    os << "solve_projections: " << cm.values.rows() << " data values expected, got " << data.size();
    throw DimensionError(os.str());
  }
  if (!cm.invertible) throw SingularSystemError("singular coefficient matrix: " + cm.collision_message());
  if (!(cm.condition_number <= max_condition)) {
    std::ostringstream os;
    os << "coefficient matrix is ill-conditioned (condition number " << cm.condition_number << " > " << max_condition
       << ")";
    throw IllConditionedError(os.str(), cm.condition_number);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(cm.values);
  ProjectionSolution out;
  out.projections = lu.solve(data);
  out.residual = (cm.values * out.projections - data).cwiseAbs().maxCoeff();
  out.condition_number = cm.condition_number;
  return out;
}

std::optional<GGMComponent> identify_ggm(const ComplexMatrix& x, double tol) {
  if (x.max_abs() <= tol) return std::nullopt;
  const int n = x.dim();
  const auto basis = ggm_basis(n);
  const Complex tr = x.trace();
  const double offset = tr.real() / n;
  std::optional<std::size_t> hit;
  double scale = 0.0;
  for (std::size_t a = 0; a < basis->size(); ++a) {
    const Complex c = trace_inner_product(x, (*basis)[a].mat) * 0.5;
    if (std::abs(c) <= tol) continue;
    if (hit || std::abs(c.imag()) > tol) throw SchemeError("product matrix is not a real multiple of a single GGM matrix");
    hit = a;
    scale = c.real();
  }
  if (!hit) throw SchemeError("product matrix is a multiple of the identity, not of a GGM matrix");
  const auto expected = ComplexMatrix::identity(n) * offset + (*basis)[*hit].mat * scale;
  if (x.max_abs_diff(expected) > tol * std::max(1.0, std::abs(scale)) || std::abs(tr.imag()) > tol)
    throw SchemeError("product matrix is not of the form a·I + c·Λ");
  return GGMComponent{index_at(n, static_cast<int>(*hit)), scale, offset};
}

namespace {

const char* source_name(ComponentSource s) {
  switch (s) {
    case ComponentSource::dynamic: return "dynamic";
    case ComponentSource::statics: return "static";
    case ComponentSource::unknown: return "unknown";
  }
  return "unknown";
}

std::string time_label(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

bool same_observables(const ObservableSet& a, const ObservableSet& b) {
  if (a.dim != b.dim || a.dynamic.size() != b.dynamic.size() || a.statics.size() != b.statics.size()) return false;
  for (std::size_t i = 0; i < a.dynamic.size(); ++i)
    if (a.dynamic[i].label != b.dynamic[i].label || a.dynamic[i].mat.max_abs_diff(b.dynamic[i].mat) > 0.0) return false;
  for (std::size_t i = 0; i < a.statics.size(); ++i)
    if (a.statics[i].label != b.statics[i].label || a.statics[i].mat.max_abs_diff(b.statics[i].mat) > 0.0) return false;
  return true;
}

void require_scheme(const MeasurementRecord& record, Scheme expected, int dim) {
  if (record.scheme != expected)
    throw SchemeError("record scheme " + to_string(record.scheme) + " does not match " + to_string(expected));
  if (record.dim != dim)
    throw SchemeError("record dimension " + std::to_string(record.dim) + " does not match " + std::to_string(dim));
}

// Schemes whose observables cover every pair need all rates distinct.
void require_distinct_rates(const DecoherenceRates& rates, double tol) {
  const auto pairs = rates.pairs();
  if (auto c = find_rate_collision(rates.ordered(), tol)) {
    std::ostringstream os;
    os << "singular coefficient matrix: rates for pairs (" << pairs[c->first].key() << ") and ("
       << pairs[c->second].key() << ") coincide";
    throw SingularSystemError(os.str());
  }
}

void require_complete(const PartialReconstruction& part) {
  for (std::size_t a = 0; a < part.sources.size(); ++a)
    if (part.sources[a] == ComponentSource::unknown)
      throw SchemeError("Bloch component " + index_at(part.bloch.dim, static_cast<int>(a)).key() + " not determined");
}

ReconstructionReport finish(Scheme scheme, PartialReconstruction part, const ReconstructOptions& options) {
  require_complete(part);
  ReconstructionReport report;
  report.scheme = scheme;
  report.dim = part.bloch.dim;
  auto assembled = bloch_assemble(part.bloch, options.tolerance);
  report.raw = assembled.matrix;
  report.rho_hat = assembled.matrix;
  report.psd = assembled.psd.psd;
  report.min_eigenvalue = assembled.psd.min_eigenvalue;
  if (options.psd_repair && !report.psd) {
    auto repaired = psd_repair(report.raw, options.tolerance);
    report.rho_hat = repaired.rho.matrix();
    report.psd_repair_applied = repaired.applied;
  }
  report.bloch = std::move(part.bloch);
  report.sources = std::move(part.sources);
  report.systems = std::move(part.systems);
  for (const auto& s : report.systems) report.max_residual = std::max(report.max_residual, s.residual);
  return report;
}

}  // namespace

std::vector<ObservableSystem> observable_systems(const ObservableSet& set, const DecoherenceRates& rates,
                                                 const TimeGrid& grid, double distinct_tol) {
  if (rates.dim() != set.dim) throw DimensionError("rates dimension differs from observable set");
  const auto dec = decompose(build_dynamic_matrix(rates));
  std::vector<ObservableSystem> out;
  for (const auto& q : set.dynamic) {
    ObservableSystem system;
    system.observable = q.label;
    for (std::size_t k = 0; k < dec.basis.size(); ++k) {
      if (auto c = identify_ggm(hadamard_product(q.mat, dec.basis[k]))) {
        system.active.push_back(k);
        system.components.push_back(*c);
      }
    }
    if (system.active.empty() || system.active.front() != 0)
      throw SchemeError("observable " + q.label + " has no diagonal part; the constant column is missing");

    std::vector<double> sub_rates;
    std::vector<std::string> labels;
    for (std::size_t i = 1; i < system.active.size(); ++i) {
      sub_rates.push_back(dec.rates[system.active[i] - 1]);
      labels.push_back("pair (" + dec.pairs[system.active[i] - 1].key() + ")");
    }
    if (static_cast<std::size_t>(grid.count) != system.active.size()) {
      std::ostringstream os;
      os << "observable " << q.label << " needs " << system.active.size() << " time instants, grid has "
         << grid.count;
      throw SchemeError(os.str());
    }
    system.matrix = coefficient_matrix(sub_rates, grid, distinct_tol, labels);
    out.push_back(std::move(system));
  }
  return out;
}

PartialReconstruction solve_observable_systems(const MeasurementRecord& record, const ObservableSet& set,
                                               const DecoherenceRates& rates, const TimeGrid& grid,
                                               const ReconstructOptions& options,
                                               std::optional<std::span<const double>> static_values) {
  const int n = set.dim;
  if (rates.dim() != n) throw DimensionError("reconstruction: rates dimension differs from observable set");
  if (record.dim != n) throw SchemeError("reconstruction: record dimension differs from observable set");
  if (static_values && static_values->size() != set.statics.size()) {
    std::ostringstream os;
    os << "reconstruction: " << set.statics.size() << " static values expected, got " << static_values->size();
    throw SchemeError(os.str());
  }

  // Every entry must belong to one of the set's observables.
  for (const auto& e : record.entries) {
    const bool known = std::any_of(set.dynamic.begin(), set.dynamic.end(), [&](const auto& q) { return q.label == e.observable; }) ||
                       std::any_of(set.statics.begin(), set.statics.end(), [&](const auto& q) { return q.label == e.observable; });
    if (!known) throw SchemeError("record contains observable '" + e.observable + "' not used by scheme " + to_string(set.scheme));
  }

  PartialReconstruction out;
  out.bloch = BlochVector{n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis_size(n)))};
  out.sources.assign(basis_size(n), ComponentSource::unknown);

  auto assign = [&](const GGMComponent& comp, double projection, ComponentSource source) {
    const int pos = comp.index.canonical_position();
    if (out.sources[static_cast<std::size_t>(pos)] != ComponentSource::unknown)
      throw SchemeError("Bloch component " + comp.index.key() + " determined twice");
    out.bloch.components(pos) = (projection - comp.offset) / comp.scale;
    out.sources[static_cast<std::size_t>(pos)] = source;
  };

  std::size_t used_entries = 0;
  for (const auto& system : observable_systems(set, rates, grid, options.distinct_tol)) {
    Eigen::VectorXd data(static_cast<Eigen::Index>(system.active.size()));
    for (int j = 1; j <= grid.count; ++j) {
      const double t = grid.instant(j);
      const auto* entry = record.find(system.observable, t);
      if (!entry) throw SchemeError("missing measurement (" + system.observable + ", t=" + time_label(t) + ")");
      data(j - 1) = entry->value;
      ++used_entries;
    }
    const auto sol = solve_projections(system.matrix, data, options.max_condition);

    SystemReport sys;
    sys.observable = system.observable;
    sys.condition_number = sol.condition_number;
    sys.residual = sol.residual;
    sys.log_abs_determinant = system.matrix.log_abs_determinant;
    for (std::size_t i = 0; i < system.components.size(); ++i) {
      assign(system.components[i], sol.projections(static_cast<Eigen::Index>(i)), ComponentSource::dynamic);
      sys.unknowns.push_back(system.components[i].index.key());
    }
    out.systems.push_back(std::move(sys));
  }

  for (std::size_t i = 0; i < set.statics.size(); ++i) {
    const auto& s = set.statics[i];
    const auto comp = identify_ggm(s.mat);
    if (!comp) throw SchemeError("static observable " + s.label + " is zero");
    double value = 0.0;
    if (static_values) {
      value = (*static_values)[i];
    } else {
      const auto* entry = record.find(s.label, 0.0);
      if (!entry) throw SchemeError("missing static measurement (" + s.label + ", t=0)");
      value = entry->value;
      ++used_entries;
    }
    assign(*comp, value, ComponentSource::statics);
  }

  if (!static_values && used_entries != record.entries.size()) {
    std::ostringstream os;
    os << "record has " << record.entries.size() - used_entries << " entries the scheme does not use";
    throw SchemeError(os.str());
  }
  return out;
}

ReconstructionReport reconstruct_qutrit(const MeasurementRecord& record, const DecoherenceRates& rates,
                                        const TimeGrid& grid, const ReconstructOptions& options) {
  require_scheme(record, Scheme::qutrit_thm31, 3);
  require_distinct_rates(rates, options.distinct_tol);
  return finish(Scheme::qutrit_thm31, solve_observable_systems(record, observables_qutrit(), rates, grid, options),
                options);
}

ReconstructionReport reconstruct_fourlevel(const MeasurementRecord& record, const DecoherenceRates& rates,
                                           const TimeGrid& grid, const ReconstructOptions& options) {
  require_scheme(record, Scheme::fourlevel_thm41, 4);
  require_distinct_rates(rates, options.distinct_tol);
  return finish(Scheme::fourlevel_thm41,
                solve_observable_systems(record, observables_fourlevel(), rates, grid, options), options);
}

namespace {

ObservableSet qudit_set_for(const MeasurementRecord& record, int dim) {
  auto set = observables_qudit(dim);
  if (record.dim != dim)
    throw SchemeError("record dimension " + std::to_string(record.dim) + " does not match " + std::to_string(dim));
  if (record.scheme == Scheme::qudit_general) return set;
  // A qutrit record carries the same two observables as the N = 3 qudit scheme.
  if (record.scheme == Scheme::qutrit_thm31 && same_observables(set, [] {
        auto q = observables_qutrit();
        q.scheme = Scheme::qudit_general;
        return q;
      }()))
    return set;
  throw SchemeError("record scheme " + to_string(record.scheme) + " does not match qudit_general");
}

}  // namespace

ReconstructionReport reconstruct_qudit(const MeasurementRecord& record, const DecoherenceRates& rates,
                                       const TimeGrid& grid, std::span<const double> diag_static,
                                       const ReconstructOptions& options) {
  const auto set = qudit_set_for(record, rates.dim());
  require_distinct_rates(rates, options.distinct_tol);
  return finish(Scheme::qudit_general, solve_observable_systems(record, set, rates, grid, options, diag_static),
                options);
}

ReconstructionReport reconstruct_qudit(const MeasurementRecord& record, const DecoherenceRates& rates,
                                       const TimeGrid& grid, const ReconstructOptions& options) {
  const auto set = qudit_set_for(record, rates.dim());
  require_distinct_rates(rates, options.distinct_tol);
  return finish(Scheme::qudit_general, solve_observable_systems(record, set, rates, grid, options), options);
}

nlohmann::json to_json(const ReconstructionReport& report) {
  nlohmann::json bloch = nlohmann::json::object();
  nlohmann::json sources = nlohmann::json::object();
  const auto indices = canonical_indices(report.dim);
  for (std::size_t a = 0; a < indices.size(); ++a) {
    bloch[indices[a].key()] = report.bloch.components(static_cast<Eigen::Index>(a));
    sources[indices[a].key()] = source_name(report.sources[a]);
  }
  nlohmann::json systems = nlohmann::json::array();
  for (const auto& s : report.systems)
    systems.push_back({{"observable", s.observable},
                       {"unknowns", s.unknowns},
                       {"condition_number", s.condition_number},
                       {"residual", s.residual},
                       {"log_abs_determinant", s.log_abs_determinant}});
  return {{"scheme", to_string(report.scheme)},
          {"dim", report.dim},
          {"rho_hat", to_json(report.rho_hat)},
          {"raw", to_json(report.raw)},
          {"bloch", std::move(bloch)},
          {"sources", std::move(sources)},
          {"systems", std::move(systems)},
          {"psd", report.psd},
          {"min_eigenvalue", report.min_eigenvalue},
          {"psd_repair_applied", report.psd_repair_applied},
          {"max_residual", report.max_residual}};
}

bool BellMixture::valid(double tol) const {
  for (double p : {p1, p2, p3, p4()})
    if (!(p >= -tol && p <= 1.0 + tol)) return false;
  return true;
}

DensityMatrix bell_mixture_state(const BellMixture& p) {
  if (!p.valid()) throw ValidationError("bell_mixture_state: probabilities must lie in [0,1] and sum to at most 1");
  const double h = 1.0 / std::sqrt(2.0);
  const Eigen::Vector4cd phi_plus(h, 0, 0, h);
  const Eigen::Vector4cd phi_minus(h, 0, 0, -h);
  const Eigen::Vector4cd psi_plus(0, h, h, 0);
  const Eigen::Vector4cd psi_minus(0, h, -h, 0);
  ComplexMatrix::Storage rho = p.p1 * phi_plus * phi_plus.adjoint() + p.p2 * phi_minus * phi_minus.adjoint() +
                               p.p3 * psi_plus * psi_plus.adjoint() + p.p4() * psi_minus * psi_minus.adjoint();
  return DensityMatrix(ComplexMatrix(std::move(rho)));
}

BellReconstruction reconstruct_bell(const MeasurementRecord& record, const DecoherenceRates& rates,
                                    const TimeGrid& grid, const ReconstructOptions& options) {
  require_scheme(record, Scheme::bell_single, 4);
  const auto part = solve_observable_systems(record, observable_bell(), rates, grid, options);

  BellReconstruction out;
  out.lambda1 = part.bloch[GGMIndex::diagonal(1, 4)];
  out.s14 = part.bloch[GGMIndex::symmetric(1, 4, 4)];
  out.s23 = part.bloch[GGMIndex::symmetric(2, 3, 4)];
  out.system = part.systems.front();

  // Tr{Λ^1 ρ} = p1 + p2 - 1/2,  Tr{Λs^14 ρ} = p1 - p2,  Tr{Λs^23 ρ} = p3 - p4 = p1 + p2 + 2 p3 - 1.
  const double p12 = out.lambda1 + 0.5;
  out.probabilities.p1 = 0.5 * (p12 + out.s14);
  out.probabilities.p2 = 0.5 * (p12 - out.s14);
  out.probabilities.p3 = 0.5 * (out.s23 + 1.0 - p12);
  out.in_range = out.probabilities.valid(kDefaultTolerance);

  if (options.clamp_probabilities && !out.in_range) {
    auto& pr = out.probabilities;
    pr.p1 = std::clamp(pr.p1, 0.0, 1.0);
    pr.p2 = std::clamp(pr.p2, 0.0, 1.0);
    pr.p3 = std::clamp(pr.p3, 0.0, 1.0);
    const double sum = pr.p1 + pr.p2 + pr.p3;
    if (sum > 1.0) {
      pr.p1 /= sum;
      pr.p2 /= sum;
      pr.p3 /= sum;
    }
    out.clamped = true;
  }
  return out;
}

nlohmann::json to_json(const BellReconstruction& result) {
  const auto& p = result.probabilities;
  return {{"scheme", to_string(Scheme::bell_single)},
          {"probabilities", {{"p1", p.p1}, {"p2", p.p2}, {"p3", p.p3}, {"p4", p.p4()}}},
          {"in_range", result.in_range},
          {"clamped", result.clamped},
          {"projections", {{"d1", result.lambda1}, {"s1,4", result.s14}, {"s2,3", result.s23}}},
          {"systems",
           nlohmann::json::array({{{"observable", result.system.observable},
                                   {"unknowns", result.system.unknowns},
                                   {"condition_number", result.system.condition_number},
                                   {"residual", result.system.residual},
                                   {"log_abs_determinant", result.system.log_abs_determinant}}})}};
}

PsdRepair psd_repair(const ComplexMatrix& raw, double tol) {
  if (!raw.is_hermitian(tol)) throw ValidationError("psd_repair: input is not Hermitian");
  const double tr = raw.trace().real();
  if (std::abs(tr - 1.0) > 0.1) {
    std::ostringstream os;
    os << "psd_repair: trace " << tr << " is too far from 1";
    throw ValidationError(os.str());
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix::Storage> eig(raw.eigen());
  if (eig.info() != Eigen::Success) throw Error("psd_repair: eigensolver failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  if (values.minCoeff() >= -tol && std::abs(tr - 1.0) <= tol) return {DensityMatrix(raw, tol), false};

  const Eigen::VectorXd clipped = values.cwiseMax(0.0);
  const double total = clipped.sum();
  if (!(total > 0.0)) throw ValidationError("psd_repair: no positive spectrum left after clipping");
  const Eigen::VectorXd scaled = clipped / total;
  ComplexMatrix::Storage rho = eig.eigenvectors() * scaled.cast<Complex>().asDiagonal() * eig.eigenvectors().adjoint();
  rho = (0.5 * (rho + rho.adjoint())).eval();
  return {DensityMatrix(ComplexMatrix(std::move(rho)), tol), true};
}

}  // namespace dyntomo
