// dyntomo: simulate phase-damped time series and reconstruct the initial state.
//
// Exit codes: 0 success, 1 internal error, 2 parse/input error, 3 channel
// validation failure, 4 singular rate configuration, 5 refused (singular or
// ill-conditioned) reconstruction, 6 scheme mismatch.

#include <algorithm>
#include <array>
#include <cmath>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dyntomo/basis.hpp"
#include "dyntomo/channel.hpp"
#include "dyntomo/errors.hpp"
#include "dyntomo/matcore.hpp"
#include "dyntomo/measurement.hpp"
#include "dyntomo/reconstruction.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dyntomo;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kParse = 2,
  kChannelInvalid = 3,
  kSingularRates = 4,
  kRefused = 5,
  kSchemeMismatch = 6,
};

struct CliExit : std::runtime_error {
  int code;
  CliExit(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

struct Flags {
  std::string config;
  std::string scheme;
  int dim = 0;
  std::string rates;
  std::string step;
  std::vector<double> sigma;
  std::uint64_t seed = 0;
  int trials = 0;
  std::string out;
  bool force = false;
  bool psd_repair = false;
  bool clamp = false;
  std::string state;
  std::string data;
  std::string truth;
};

struct Experiment {
  std::optional<Scheme> scheme;
  int dim = 0;
  std::optional<DecoherenceRates> rates;
  std::string step = "auto";
  std::vector<double> sigma{0.0};
  std::uint64_t seed = 0;
  int trials = 1;
  fs::path out = ".";
  bool force = false;
  bool psd_repair = false;
  bool clamp = false;

  const DecoherenceRates& require_rates() const {
    if (!rates) throw CliExit(kParse, "no rates given (use --rates or the config 'rates' field)");
    return *rates;
  }
  Scheme require_scheme() const {
    if (!scheme) throw CliExit(kParse, "no scheme given (use --scheme or the config 'scheme' field)");
    return *scheme;
  }
  double base_step() const {
    if (step == "auto") return default_step(require_rates());
    double t = 0.0;
    try {
      std::size_t used = 0;
      t = std::stod(step, &used);
      if (used != step.size()) throw std::invalid_argument(step);
    } catch (const std::exception&) {
      throw CliExit(kParse, "--step must be a positive number or 'auto', got '" + step + "'");
    }
    if (!(t > 0.0) || !std::isfinite(t)) throw CliExit(kParse, "--step must be positive, got '" + step + "'");
    return t;
  }
  TimeGrid grid() const { return TimeGrid::make(base_step(), required_instants(require_scheme(), dim)); }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliExit(kParse, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliExit(kInternal, "cannot write " + path.string());
  out << text;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw CliExit(kParse, path.string() + ": " + e.what());
  }
}

DecoherenceRates load_rates_text(const std::string& text, const std::string& origin) {
  try {
    return parse_rates_json(text);
  } catch (const Error& e) {
    throw CliExit(kParse, origin + ": " + e.what());
  }
}

Scheme parse_scheme(const std::string& name) {
  try {
    return scheme_from_string(name);
  } catch (const Error& e) {
    throw CliExit(kParse, e.what());
  }
}

// Config file first, then any flag given on the command line.
Experiment resolve(const Flags& f, const CLI::App& cmd) {
  Experiment ex;
  auto given = [&](const char* name) {
    const auto* opt = cmd.get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };

  if (!f.config.empty()) {
    const fs::path path = f.config;
    const json cfg = parse_json_file(path);
    if (!cfg.is_object()) throw CliExit(kParse, "config must be a JSON object");
    try {
      static const std::set<std::string> known{"scheme", "dim",   "rates", "step",  "sigma",     "seed",
                                               "trials", "out",   "force", "psd_repair", "clamp"};
      for (const auto& [key, _] : cfg.items())
        if (!known.contains(key)) throw CliExit(kParse, "config: unknown field '" + key + "'");
      if (cfg.contains("scheme")) ex.scheme = parse_scheme(cfg.at("scheme").get<std::string>());
      if (cfg.contains("dim")) ex.dim = cfg.at("dim").get<int>();
      if (cfg.contains("rates")) {
        const auto& r = cfg.at("rates");
        if (r.is_string()) {
          const fs::path rp = path.parent_path() / r.get<std::string>();
          ex.rates = load_rates_text(read_file(rp), rp.string());
        } else {
          ex.rates = load_rates_text(r.dump(), "config rates");
        }
      }
      if (cfg.contains("step")) {
        const auto& s = cfg.at("step");
        if (s.is_number()) {
          std::ostringstream os;
          os << std::setprecision(17) << s.get<double>();
          ex.step = os.str();
        } else {
          ex.step = s.get<std::string>();
        }
      }
      if (cfg.contains("sigma")) {
        const auto& s = cfg.at("sigma");
        ex.sigma = s.is_array() ? s.get<std::vector<double>>() : std::vector<double>{s.get<double>()};
      }
      if (cfg.contains("seed")) ex.seed = cfg.at("seed").get<std::uint64_t>();
      if (cfg.contains("trials")) ex.trials = cfg.at("trials").get<int>();
      if (cfg.contains("out")) ex.out = cfg.at("out").get<std::string>();
      if (cfg.contains("force")) ex.force = cfg.at("force").get<bool>();
      if (cfg.contains("psd_repair")) ex.psd_repair = cfg.at("psd_repair").get<bool>();
      if (cfg.contains("clamp")) ex.clamp = cfg.at("clamp").get<bool>();
    } catch (const json::exception& e) {
      throw CliExit(kParse, std::string("config: ") + e.what());
    }
  }

  if (given("--scheme")) ex.scheme = parse_scheme(f.scheme);
  if (given("--dim")) ex.dim = f.dim;
  if (given("--rates")) ex.rates = load_rates_text(read_file(f.rates), f.rates);
  if (given("--step")) ex.step = f.step;
  if (given("--sigma")) ex.sigma = f.sigma;
  if (given("--seed")) ex.seed = f.seed;
  if (given("--trials")) ex.trials = f.trials;
  if (given("--out")) ex.out = f.out;
  if (given("--force")) ex.force = f.force;
  if (given("--psd-repair")) ex.psd_repair = f.psd_repair;
  if (given("--clamp")) ex.clamp = f.clamp;

  if (ex.trials < 1) throw CliExit(kParse, "trials must be >= 1");
  for (double s : ex.sigma)
    if (!(s >= 0.0) || !std::isfinite(s)) throw CliExit(kParse, "sigma must be >= 0");

  if (ex.dim == 0) {
    if (ex.scheme) {
      if (auto d = scheme_dimension(*ex.scheme)) ex.dim = *d;
    }
    if (ex.dim == 0 && ex.rates) ex.dim = ex.rates->dim();
  }
  if (ex.scheme) {
    if (auto d = scheme_dimension(*ex.scheme); d && *d != ex.dim)
      throw CliExit(kParse, "scheme " + to_string(*ex.scheme) + " requires dim " + std::to_string(*d) + ", got " +
                                std::to_string(ex.dim));
    if (*ex.scheme == Scheme::qudit_general && ex.dim < 3) throw CliExit(kParse, "qudit scheme requires dim >= 3");
  }
  if (ex.rates && ex.dim != 0 && ex.rates->dim() != ex.dim)
    throw CliExit(kParse, "rates are for dim " + std::to_string(ex.rates->dim()) + ", expected " +
                              std::to_string(ex.dim));
  return ex;
}

// A density matrix in matrix JSON, or {"bell": [p1, p2, p3]}.
ComplexMatrix load_state_matrix(const fs::path& path, std::optional<BellMixture>* bell = nullptr) {
  const json j = parse_json_file(path);
  try {
    if (j.is_object() && j.contains("bell")) {
      const auto p = j.at("bell").get<std::vector<double>>();
      if (p.size() != 3) throw CliExit(kParse, path.string() + ": 'bell' needs three probabilities");
      BellMixture mix{p[0], p[1], p[2]};
      if (bell) *bell = mix;
      return bell_mixture_state(mix).matrix();
    }
    return complex_matrix_from_json(j);
  } catch (const CliExit&) {
    throw;
  } catch (const json::exception& e) {
    throw CliExit(kParse, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw CliExit(kParse, path.string() + ": " + e.what());
  }
}

DensityMatrix load_state(const fs::path& path, int dim, std::optional<BellMixture>* bell = nullptr) {
  const auto m = load_state_matrix(path, bell);
  if (m.dim() != dim)
    throw CliExit(kParse, path.string() + ": state has dim " + std::to_string(m.dim()) + ", expected " +
                              std::to_string(dim));
  try {
    return DensityMatrix(m);
  } catch (const Error& e) {
    throw CliExit(kParse, path.string() + ": not a density matrix: " + e.what());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_valid_channel(const Experiment& ex, const DynamicMatrix& dm) {
  if (ex.force) return;
  const auto samples = default_time_samples(dm.rates());
  const auto v = validate_channel(dm, samples);
  if (v.passed()) return;
  std::ostringstream os;
  os << "dynamic matrix fails channel validation";
  if (!v.positive)
    os << ": D(t) not positive semidefinite at " << v.violations.size() << " sampled times (worst t=" << v.worst_t
       << ", min eigenvalue " << v.worst_min_eigenvalue << ")";
  os << "; rerun with --force to simulate anyway";
  throw CliExit(kChannelInvalid, os.str());
}

void require_solvable(const ObservableSet& set, const DecoherenceRates& rates, const TimeGrid& grid) {
  for (const auto& sys : observable_systems(set, rates, grid))
    if (!sys.matrix.invertible)
      throw CliExit(kSingularRates, "observable " + sys.observable + ": " + sys.matrix.collision_message());
}

ReconstructOptions options_of(const Experiment& ex) {
  ReconstructOptions opt;
  opt.psd_repair = ex.psd_repair;
  opt.clamp_probabilities = ex.clamp;
  return opt;
}

ReconstructionReport reconstruct_any(Scheme scheme, const MeasurementRecord& record, const DecoherenceRates& rates,
                                     const TimeGrid& grid, const ReconstructOptions& opt) {
  switch (scheme) {
    case Scheme::qutrit_thm31: return reconstruct_qutrit(record, rates, grid, opt);
    case Scheme::fourlevel_thm41: return reconstruct_fourlevel(record, rates, grid, opt);
    case Scheme::qudit_general: return reconstruct_qudit(record, rates, grid, opt);
    case Scheme::bell_single: break;
  }
  throw SchemeError("bell scheme has no density-matrix report");
}

// --- simulate -----------------------------------------------------------------

int cmd_simulate(const Flags& f, const CLI::App& cmd) {
  const auto ex = resolve(f, cmd);
  const auto scheme = ex.require_scheme();
  const auto& rates = ex.require_rates();
  if (ex.sigma.size() != 1) throw CliExit(kParse, "simulate takes a single --sigma value");
  const auto rho0 = load_state(f.state, ex.dim);

  const auto dm = build_dynamic_matrix(rates);
  require_valid_channel(ex, dm);
  const auto set = observables_for(scheme, ex.dim);
  const auto grid = ex.grid();
  require_solvable(set, rates, grid);

  const auto record = measure_series(rho0, dm, set, grid, NoiseSpec{ex.sigma.front(), ex.seed});
  std::ostringstream csv;
  write_record_csv(record, csv);
  write_file(ex.out / "measurements.csv", csv.str());
  auto side = sidecar_json(record, rates, grid);
  side["generated_at"] = utc_timestamp();
  write_file(ex.out / "measurements.json", side.dump(2) + "\n");

  std::cout << "wrote " << record.entries.size() << " measurements (" << to_string(scheme) << ", step "
            << grid.step << ") to " << (ex.out / "measurements.csv").string() << "\n";
  return kOk;
}

// --- reconstruct --------------------------------------------------------------

int cmd_reconstruct(const Flags& f, const CLI::App& cmd) {
  const auto ex = resolve(f, cmd);
  const auto scheme = ex.require_scheme();
  const auto& rates = ex.require_rates();
  if (f.data.empty()) throw CliExit(kParse, "reconstruct needs --data <csv>");

  MeasurementRecord record;
  {
    std::ifstream in(f.data);
    if (!in) throw CliExit(kParse, "cannot read " + f.data);
    try {
      record = read_record_csv(in, scheme, ex.dim);
    } catch (const ParseError& e) {
      throw CliExit(kParse, f.data + ": " + e.what());
    }
  }
  const auto grid = ex.grid();
  const auto opt = options_of(ex);

  json report;
  if (scheme == Scheme::bell_single) {
    const auto res = reconstruct_bell(record, rates, grid, opt);
    report = to_json(res);
    if (!f.truth.empty()) {
      std::optional<BellMixture> truth;
      load_state(f.truth, 4, &truth);
      if (!truth) throw CliExit(kParse, f.truth + ": bell truth must be given as {\"bell\": [p1, p2, p3]}");
      const auto& p = res.probabilities;
      const double err = std::max({std::abs(p.p1 - truth->p1), std::abs(p.p2 - truth->p2),
                                   std::abs(p.p3 - truth->p3), std::abs(p.p4() - truth->p4())});
      report["truth"] = {{"max_probability_error", err}};
    }
    std::cout << "p = (" << res.probabilities.p1 << ", " << res.probabilities.p2 << ", " << res.probabilities.p3
              << ", " << res.probabilities.p4() << ")" << (res.in_range ? "" : " [out of range]") << "\n";
  } else {
    const auto res = reconstruct_any(scheme, record, rates, grid, opt);
    report = to_json(res);
    if (!f.truth.empty()) {
      const auto truth = load_state(f.truth, ex.dim);
      const auto d = matrix_distance(res.rho_hat, truth.matrix());
      report["truth"] = {{"trace_distance", d.trace_distance},
                         {"hs_distance", d.hs_distance},
                         {"fidelity", fidelity(truth.matrix(), res.rho_hat)}};
      std::cout << "trace distance to truth: " << d.trace_distance << "\n";
    }
    std::cout << "reconstructed " << ex.dim << "-level state, psd=" << (res.psd ? "yes" : "no")
              << (res.psd_repair_applied ? " (repaired)" : "") << "\n";
  }
  write_file(ex.out / "report.json", report.dump(2) + "\n");
  return kOk;
}

// --- roundtrip ----------------------------------------------------------------

// Uniform draw from the probability simplex of four Bell weights.
BellMixture draw_bell_mixture(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<double, 3> cuts{u(gen), u(gen), u(gen)};
  std::sort(cuts.begin(), cuts.end());
  return BellMixture{cuts[0], cuts[1] - cuts[0], cuts[2] - cuts[1]};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_roundtrip(const Flags& f, const CLI::App& cmd) {
  const auto ex = resolve(f, cmd);
  const auto scheme = ex.require_scheme();
  const auto& rates = ex.require_rates();
  const auto dm = build_dynamic_matrix(rates);
  require_valid_channel(ex, dm);
  const auto set = observables_for(scheme, ex.dim);
  const auto grid = ex.grid();
  require_solvable(set, rates, grid);
  const auto opt = options_of(ex);
  const bool bell = scheme == Scheme::bell_single;
  const char* metric = bell ? "max_probability_error" : "trace_distance";

  std::ostringstream csv;
  csv << "sigma,trial,seed," << metric << ",fidelity,psd_repair_applied,max_condition\n";
  json sweeps = json::array();
  for (double sigma : ex.sigma) {
    json trials = json::array();
    std::vector<double> errors;
    std::vector<double> fidelities;
    bool any_repair = false;
    for (int i = 0; i < ex.trials; ++i) {
      const std::uint64_t seed = ex.seed + static_cast<std::uint64_t>(i);
      double err = 0.0;
      double fid = 1.0;
      double cond = 0.0;
      bool repaired = false;
      if (bell) {
        const auto truth = draw_bell_mixture(seed);
        const auto record = measure_series(bell_mixture_state(truth), dm, set, grid, NoiseSpec{sigma, seed});
        const auto res = reconstruct_bell(record, rates, grid, opt);
        const auto& p = res.probabilities;
        err = std::max({std::abs(p.p1 - truth.p1), std::abs(p.p2 - truth.p2), std::abs(p.p3 - truth.p3),
                        std::abs(p.p4() - truth.p4())});
        const double bc = std::sqrt(std::max(0.0, p.p1 * truth.p1)) + std::sqrt(std::max(0.0, p.p2 * truth.p2)) +
                          std::sqrt(std::max(0.0, p.p3 * truth.p3)) +
                          std::sqrt(std::max(0.0, p.p4() * truth.p4()));
        fid = bc * bc;
        cond = res.system.condition_number;
      } else {
        const auto truth = random_density_matrix(ex.dim, seed);
        const auto record = measure_series(truth, dm, set, grid, NoiseSpec{sigma, seed});
        const auto res = reconstruct_any(scheme, record, rates, grid, opt);
        err = matrix_distance(res.rho_hat, truth.matrix()).trace_distance;
        fid = fidelity(truth.matrix(), res.rho_hat);
        for (const auto& s : res.systems) cond = std::max(cond, s.condition_number);
        repaired = res.psd_repair_applied;
      }
      any_repair = any_repair || repaired;
      errors.push_back(err);
      fidelities.push_back(fid);
      trials.push_back({{"trial", i},
                        {"seed", seed},
                        {metric, err},
                        {"fidelity", fid},
                        {"psd_repair_applied", repaired},
                        {"max_condition", cond}});
      csv << format_time(sigma) << "," << i << "," << seed << "," << std::setprecision(17) << err << "," << fid
          << "," << (repaired ? 1 : 0) << "," << cond << "\n";
    }
    const double mean_err = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
    json summary{{"median", median(errors)},
                 {"mean", mean_err},
                 {"max", *std::max_element(errors.begin(), errors.end())},
                 {"min_fidelity", *std::min_element(fidelities.begin(), fidelities.end())},
                 {"median_fidelity", median(fidelities)},
                 {"psd_repair_applied", any_repair}};
    std::cout << "sigma " << sigma << ": median " << metric << " " << summary["median"].get<double>() << ", max "
              << summary["max"].get<double>() << "\n";
    sweeps.push_back({{"sigma", sigma}, {"metric", metric}, {"summary", std::move(summary)}, {"trials", std::move(trials)}});
  }
  json out{{"scheme", to_string(scheme)},
           {"dim", ex.dim},
           {"rates", to_json(rates)},
           {"step", grid.step},
           {"count", grid.count},
           {"seed", ex.seed},
           {"trials", ex.trials},
           {"psd_repair", ex.psd_repair},
           {"sweeps", std::move(sweeps)}};
  write_file(ex.out / "roundtrip.json", out.dump(2) + "\n");
  write_file(ex.out / "roundtrip.csv", csv.str());
  return kOk;
}

// --- validate -----------------------------------------------------------------

int cmd_validate(const Flags& f, const CLI::App& cmd) {
  const auto ex = resolve(f, cmd);
  const auto& rates = ex.require_rates();
  const auto dm = build_dynamic_matrix(rates);
  const auto samples = default_time_samples(rates);
  const auto v = validate_channel(dm, samples);

  auto verdict = [](bool ok) { return ok ? "pass" : "FAIL"; };
  std::cout << "condition 1 (D(t) positive semidefinite, " << samples.size() << " samples): " << verdict(v.positive)
            << "\n";
  for (const auto& bad : v.violations)
    std::cout << "  t=" << bad.t << " min eigenvalue " << bad.min_eigenvalue << "\n";
  std::cout << "condition 2 (unit diagonal): " << verdict(v.unit_diagonal) << "\n";
  std::cout << "condition 3 (D(0) all ones): " << verdict(v.ones_at_zero) << "\n";

  json report{{"dim", rates.dim()},
              {"rates", to_json(rates)},
              {"positive", v.positive},
              {"unit_diagonal", v.unit_diagonal},
              {"ones_at_zero", v.ones_at_zero},
              {"worst_min_eigenvalue", v.worst_min_eigenvalue},
              {"worst_t", v.worst_t}};
  json violations = json::array();
  for (const auto& bad : v.violations) violations.push_back({{"t", bad.t}, {"min_eigenvalue", bad.min_eigenvalue}});
  report["violations"] = std::move(violations);

  const auto ordered = rates.ordered();
  const auto pairs = rates.pairs();
  const auto collision = find_rate_collision(ordered);
  if (collision) {
    std::cout << "rate distinctness: FAIL, pairs (" << pairs[collision->first].key() << ") and ("
              << pairs[collision->second].key() << ") coincide\n";
    std::cout << "reconstruction unsupported: degenerate rates\n";
  } else {
    std::cout << "rate distinctness: pass\n";
  }
  report["distinct"] = !collision.has_value();

  json schemes = json::object();
  for (Scheme s : {Scheme::qutrit_thm31, Scheme::fourlevel_thm41, Scheme::bell_single, Scheme::qudit_general}) {
    const auto d = scheme_dimension(s);
    if ((d && *d != rates.dim()) || (!d && rates.dim() < 3)) continue;
    std::string status = "supported";
    double worst = 0.0;
    try {
      const auto grid = TimeGrid::make(ex.step == "auto" ? default_step(rates) : ex.base_step(),
                                       required_instants(s, rates.dim()));
      for (const auto& sys : observable_systems(observables_for(s, rates.dim()), rates, grid)) {
        if (!sys.matrix.invertible) {
          status = "unsupported: " + sys.matrix.collision_message();
          break;
        }
        worst = std::max(worst, sys.matrix.condition_number);
      }
      if (status == "supported" && worst > kMaxCondition) {
        std::ostringstream os;
        os << "unsupported: ill-conditioned (condition number " << worst << ")";
        status = os.str();
      }
    } catch (const Error& e) {
      status = std::string("unsupported: ") + e.what();
    }
    std::cout << "scheme " << to_string(s) << ": " << status;
    if (status == "supported") std::cout << " (max condition number " << worst << ")";
    std::cout << "\n";
    schemes[to_string(s)] = {{"status", status}, {"max_condition", worst}};
  }
  report["schemes"] = std::move(schemes);

  if (!f.out.empty()) write_file(ex.out / "validation.json", report.dump(2) + "\n");
  return v.passed() ? kOk : kChannelInvalid;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config; flags override its fields");
  cmd->add_option("--scheme", f.scheme, "qutrit | fourlevel | bell | qudit");
  cmd->add_option("--dim", f.dim, "number of levels");
  cmd->add_option("--rates", f.rates, "decoherence rates JSON file");
  cmd->add_option("--step", f.step, "base time step, or 'auto' for 1/(2 gamma_max)");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--out", f.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-damping state tomography: simulate time series and reconstruct the initial state"};
  app.require_subcommand(1);
  Flags f;

  auto* sim = app.add_subcommand("simulate", "simulate a measurement record from an initial state");
  add_common(sim, f);
  sim->add_option("--state", f.state, "initial state JSON (matrix or {\"bell\": [p1,p2,p3]})")->required();
  sim->add_option("--sigma", f.sigma, "additive Gaussian noise level")->expected(1);
  sim->add_flag("--force", f.force, "skip channel validation");

  auto* rec = app.add_subcommand("reconstruct", "reconstruct the initial state from a measurement CSV");
  add_common(rec, f);
  rec->add_option("--data", f.data, "measurement CSV")->required();
  rec->add_option("--truth", f.truth, "ground-truth state JSON for error reporting");
  rec->add_flag("--psd-repair", f.psd_repair, "project a non-PSD estimate onto the state space");
  rec->add_flag("--clamp", f.clamp, "clamp Bell probabilities to [0,1]");

  auto* rt = app.add_subcommand("roundtrip", "simulate and reconstruct seeded random states");
  add_common(rt, f);
  rt->add_option("--sigma", f.sigma, "noise level(s); several values give a sweep")->expected(1, 64);
  rt->add_option("--trials", f.trials, "trials per noise level");
  rt->add_flag("--force", f.force, "skip channel validation");
  rt->add_flag("--psd-repair", f.psd_repair, "project non-PSD estimates onto the state space");
  rt->add_flag("--clamp", f.clamp, "clamp Bell probabilities to [0,1]");

  auto* val = app.add_subcommand("validate", "check a rate set against the channel conditions");
  add_common(val, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParse;
  }

  try {
    if (*sim) return cmd_simulate(f, *sim);
    if (*rec) return cmd_reconstruct(f, *rec);
    if (*rt) return cmd_roundtrip(f, *rt);
    if (*val) return cmd_validate(f, *val);
  } catch (const CliExit& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const RefusedSystemError& e) {
    std::cerr << "error: reconstruction refused: " << e.what() << "\n";
    return kRefused;
  } catch (const SchemeError& e) {
    std::cerr << "error: scheme mismatch: " << e.what() << "\n";
    return kSchemeMismatch;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParse;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
