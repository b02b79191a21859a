#include "dyntomo/measurement.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace dyntomo {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::qutrit_thm31: return "qutrit_thm31";
    case Scheme::fourlevel_thm41: return "fourlevel_thm41";
    case Scheme::bell_single: return "bell_single";
    case Scheme::qudit_general: return "qudit_general";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "qutrit" || name == "qutrit_thm31") return Scheme::qutrit_thm31;
  if (name == "fourlevel" || name == "fourlevel_thm41") return Scheme::fourlevel_thm41;
  if (name == "bell" || name == "bell_single") return Scheme::bell_single;
  if (name == "qudit" || name == "qudit_general") return Scheme::qudit_general;
  throw SchemeError("unknown scheme '" + name + "'");
}

namespace {

const Complex kI(0.0, 1.0);

ComplexMatrix ggm_matrix(const GGMIndex& idx) { return ggm(idx).mat; }

}  // namespace

std::string static_label(int l) { return "L" + std::to_string(l); }

ObservableSet observables_qutrit() {
  const double r3 = 1.0 / std::sqrt(3.0);
  ObservableSet set{3, Scheme::qutrit_thm31, {}, {}};
  set.dynamic.emplace_back(ComplexMatrix::from_rows({{1, 1, -kI}, {1, -1, -kI}, {kI, kI, 0}}), "Q1");
  set.dynamic.emplace_back(ComplexMatrix::from_rows({{r3, -kI, 1}, {kI, r3, 1}, {1, 1, -2.0 * r3}}), "Q2");
  return set;
}

ObservableSet observables_fourlevel() {
  const double r3 = 1.0 / std::sqrt(3.0);
  ObservableSet set{4, Scheme::fourlevel_thm41, {}, {}};
  set.dynamic.emplace_back(
      ComplexMatrix::from_rows({{1, 1, -kI, 1}, {1, -1, -kI, 1}, {kI, kI, 0, -kI}, {1, 1, kI, 0}}), "Q1");
  set.dynamic.emplace_back(
      ComplexMatrix::from_rows({{r3, -kI, 1, -kI}, {kI, r3, 1, -kI}, {1, 1, -2.0 * r3, 1}, {kI, kI, 1, 0}}), "Q2");
  set.statics.emplace_back(ggm_matrix(GGMIndex::diagonal(3, 4)), static_label(3));
  return set;
}

ObservableSet observable_bell() {
  ObservableSet set{4, Scheme::bell_single, {}, {}};
  set.dynamic.emplace_back(ComplexMatrix::from_rows({{1, 0, 0, 1}, {0, -1, 1, 0}, {0, 1, 0, 0}, {1, 0, 0, 0}}), "Q");
  return set;
}

int kappa1(int dim) { return dim % 2 == 1 ? (dim - 1) / 2 : dim / 2; }
int kappa2(int dim) { return dim % 2 == 1 ? (dim - 1) / 2 : (dim - 2) / 2; }

ObservableSet observables_qudit(int dim) {
  if (dim < 3) throw DimensionError("observables_qudit: dim must be >= 3, got " + std::to_string(dim));
  ComplexMatrix q1 = ggm_matrix(GGMIndex::diagonal(1, dim));
  ComplexMatrix q2 = ggm_matrix(GGMIndex::diagonal(2, dim));
  for (int i = 1; i <= kappa1(dim); ++i) {
    const int k = 2 * i;
    for (int j = 1; j < k; ++j) {
      q1 = q1 + ggm_matrix(GGMIndex::symmetric(j, k, dim));
      q2 = q2 + ggm_matrix(GGMIndex::antisymmetric(j, k, dim));
    }
  }
  for (int i = 1; i <= kappa2(dim); ++i) {
    const int k = 2 * i + 1;
    for (int j = 1; j < k; ++j) {
      q1 = q1 + ggm_matrix(GGMIndex::antisymmetric(j, k, dim));
      q2 = q2 + ggm_matrix(GGMIndex::symmetric(j, k, dim));
    }
  }
  ObservableSet set{dim, Scheme::qudit_general, {}, {}};
  set.dynamic.emplace_back(std::move(q1), "Q1");
  set.dynamic.emplace_back(std::move(q2), "Q2");
  for (int l = 3; l <= dim - 1; ++l) set.statics.emplace_back(ggm_matrix(GGMIndex::diagonal(l, dim)), static_label(l));
  return set;
}

TimeGrid TimeGrid::make(double step, int count) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ValidationError("TimeGrid: base step must be positive");
  if (count < 1) throw ValidationError("TimeGrid: count must be >= 1");
  return TimeGrid{step, count};
}

std::vector<double> TimeGrid::instants() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int j = 1; j <= count; ++j) out.push_back(instant(j));
  return out;
}

double default_step(const DecoherenceRates& rates) {
  const double gmax = rates.max_rate();
  if (!(gmax > 0.0)) throw ValidationError("default_step: all rates are zero");
  return 1.0 / (2.0 * gmax);
}

ObservableSet observables_for(Scheme scheme, int dim) {
  switch (scheme) {
    case Scheme::qutrit_thm31: return observables_qutrit();
    case Scheme::fourlevel_thm41: return observables_fourlevel();
    case Scheme::bell_single: return observable_bell();
    case Scheme::qudit_general: return observables_qudit(dim);
  }
  throw SchemeError("unknown scheme");
}

std::optional<int> scheme_dimension(Scheme scheme) {
  switch (scheme) {
    case Scheme::qutrit_thm31: return 3;
    case Scheme::fourlevel_thm41:
    case Scheme::bell_single: return 4;
    case Scheme::qudit_general: return std::nullopt;
  }
  return std::nullopt;
}

int required_instants(Scheme scheme, int dim) {
  switch (scheme) {
    case Scheme::qutrit_thm31: return 4;
    case Scheme::fourlevel_thm41: return 7;
    case Scheme::bell_single: return 3;
    case Scheme::qudit_general: return dim * (dim - 1) / 2 + 1;
  }
  return 0;
}

double measure_direct(const ComplexMatrix& rho0, const DynamicMatrix& dm, const HermitianObservable& q, double t) {
  if (q.mat.dim() != rho0.dim()) throw DimensionError("measure: observable and state dimensions differ");
  return trace_inner_product(q.mat, evolve_matrix(rho0, dm, t)).real();
}

double measure_decomposed(const ComplexMatrix& rho0, const ChannelDecomposition& dec, const HermitianObservable& q,
                          double t) {
  if (q.mat.dim() != rho0.dim() || dec.dim != rho0.dim())
    throw DimensionError("measure: observable, channel and state dimensions differ");
  const auto alpha = dec.coefficients(t);
  double sum = 0.0;
  for (std::size_t k = 0; k < dec.basis.size(); ++k) {
    const auto& a = dec.basis[k];
    if (!(a == ComplexMatrix(ComplexMatrix::Storage(a.eigen().transpose()))))
      throw Error("measure: channel basis matrix is not symmetric");
    sum += alpha[k] * trace_inner_product(hadamard_product(q.mat, a), rho0).real();
  }
  return sum;
}

double measure(const DensityMatrix& rho0, const DynamicMatrix& dm, const HermitianObservable& q, double t) {
  const double direct = measure_direct(rho0.matrix(), dm, q, t);
#ifdef DYNTOMO_CHECK_ROUTES
  const double decomposed = measure_decomposed(rho0.matrix(), decompose(dm), q, t);
  if (std::abs(direct - decomposed) > 1e-12 * std::max(1.0, std::abs(direct))) {
    std::ostringstream os;
    os << std::setprecision(17) << "measure: direct route " << direct << " and decomposed route " << decomposed
       << " disagree for " << q.label << " at t=" << t;
    throw Error(os.str());
  }
#endif
  return direct;
}

const MeasurementEntry* MeasurementRecord::find(const std::string& label, double t) const {
  for (const auto& e : entries) {
    if (e.observable != label) continue;
    if (std::abs(e.time - t) <= 1e-9 * std::max(std::abs(e.time), std::abs(t))) return &e;
  }
  return nullptr;
}

MeasurementRecord measure_series(const DensityMatrix& rho0, const DynamicMatrix& dm, const ObservableSet& set,
                                 const TimeGrid& grid, const NoiseSpec& noise) {
  if (rho0.dim() != set.dim || dm.dim() != set.dim)
    throw DimensionError("measure_series: state, channel and observable set dimensions differ");
  const int need = required_instants(set.scheme, set.dim);
  if (grid.count != need) {
    std::ostringstream os;
    os << "measure_series: scheme " << to_string(set.scheme) << " needs " << need << " time instants, grid has "
       << grid.count;
    throw SchemeError(os.str());
  }
  if (noise.sigma < 0.0 || !std::isfinite(noise.sigma)) throw ValidationError("measure_series: sigma must be >= 0");

  MeasurementRecord record;
  record.scheme = set.scheme;
  record.dim = set.dim;
  record.sigma = noise.sigma;
  if (noise.sigma > 0.0) record.seed = noise.seed;

  for (const auto& q : set.dynamic)
    for (double t : grid.instants()) record.entries.push_back({q.label, t, measure(rho0, dm, q, t)});
  for (const auto& q : set.statics) record.entries.push_back({q.label, 0.0, measure(rho0, dm, q, 0.0)});

  if (noise.sigma > 0.0) {
    for (std::size_t i = 0; i < record.entries.size(); ++i) {
      // Independent stream per entry so entries can be produced in any order.
      std::seed_seq seq{static_cast<std::uint32_t>(noise.seed), static_cast<std::uint32_t>(noise.seed >> 32),
                        static_cast<std::uint32_t>(i)};
      std::mt19937_64 gen(seq);
      std::normal_distribution<double> normal(0.0, noise.sigma);
      record.entries[i].value += normal(gen);
    }
  }
  return record;
}

std::string format_time(double t) {
  if (t == 0.0) return "0";
  const int before_point = static_cast<int>(std::floor(std::log10(std::abs(t)))) + 1;
  const int decimals = std::max(0, 12 - before_point);
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << t;
  return os.str();
}

namespace {

std::string format_value(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& field, std::size_t line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
    throw ParseError("CSV line " + std::to_string(line) + ": bad number '" + field + "'");
  return v;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

void write_record_csv(const MeasurementRecord& record, std::ostream& out) {
  out << "observable,time,value\n";
  for (const auto& e : record.entries) out << e.observable << ',' << format_time(e.time) << ',' << format_value(e.value) << '\n';
}

MeasurementRecord read_record_csv(std::istream& in, Scheme scheme, int dim) {
  MeasurementRecord record;
  record.scheme = scheme;
  record.dim = dim;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != "observable,time,value") throw ParseError("CSV: expected header 'observable,time,value'");
      header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (fields.size() != 3 || fields[0].empty())
      throw ParseError("CSV line " + std::to_string(line_no) + ": expected 3 fields");
    const double t = parse_double(fields[1], line_no);
    if (t < 0.0) throw ParseError("CSV line " + std::to_string(line_no) + ": negative time");
    record.entries.push_back({fields[0], t, parse_double(fields[2], line_no)});
  }
  if (!header) throw ParseError("CSV: empty input");
  return record;
}

nlohmann::json sidecar_json(const MeasurementRecord& record, const DecoherenceRates& rates, const TimeGrid& grid) {
  nlohmann::json j{{"scheme", to_string(record.scheme)},
                   {"dim", record.dim},
                   {"rates", to_json(rates)},
                   {"step", grid.step},
                   {"count", grid.count},
                   {"sigma", record.sigma},
                   {"entries", record.entries.size()}};
  j["seed"] = record.seed ? nlohmann::json(*record.seed) : nlohmann::json(nullptr);
  return j;
}

}  // namespace dyntomo
