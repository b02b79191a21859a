#include "dyntomo/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dyntomo {

PairIndex PairIndex::make(int a, int b) {
  if (a == b) throw ValidationError("pair index needs two distinct levels, got " + std::to_string(a) + "," + std::to_string(b));
  return a < b ? PairIndex{a, b} : PairIndex{b, a};
}

std::vector<PairIndex> level_pairs(int dim) {
  std::vector<PairIndex> out;
  for (int j = 1; j <= dim; ++j)
    for (int k = j + 1; k <= dim; ++k) out.push_back({j, k});
  return out;
}

bool rates_coincide(double a, double b, double rel_tol) {
  return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
}

std::optional<std::pair<std::size_t, std::size_t>> find_rate_collision(std::span<const double> rates,
                                                                       double rel_tol) {
  for (std::size_t a = 0; a < rates.size(); ++a)
    for (std::size_t b = a + 1; b < rates.size(); ++b)
      if (rates_coincide(rates[a], rates[b], rel_tol)) return std::pair{a, b};
  return std::nullopt;
}

DecoherenceRates::DecoherenceRates(int dim, std::map<PairIndex, double> rates, std::set<PairIndex> frozen)
    : dim_(dim), rates_(std::move(rates)), frozen_(std::move(frozen)) {
  if (dim < 2) throw DimensionError("DecoherenceRates: dim must be >= 2");
  for (const auto& [p, g] : rates_) {
    if (p.j < 1 || p.k > dim || p.j >= p.k)
      throw ValidationError("DecoherenceRates: pair " + p.key() + " outside 1.." + std::to_string(dim));
    if (!std::isfinite(g)) throw ValidationError("DecoherenceRates: rate for " + p.key() + " is not finite");
    if (g < 0.0) throw ValidationError("DecoherenceRates: rate for " + p.key() + " is negative");
    if (g == 0.0 && !frozen_.contains(p))
      throw ValidationError("DecoherenceRates: rate for " + p.key() + " is zero but not flagged frozen");
  }
  for (const auto& p : frozen_) {
    auto it = rates_.find(p);
    if (it != rates_.end() && it->second != 0.0)
      throw ValidationError("DecoherenceRates: frozen pair " + p.key() + " has non-zero rate");
  }
  for (const auto& p : level_pairs(dim))
    if (!rates_.contains(p)) throw ValidationError("DecoherenceRates: missing rate for pair " + p.key());
}

DecoherenceRates DecoherenceRates::from_ordered(int dim, std::vector<double> ordered, std::set<PairIndex> frozen) {
  const auto pairs = level_pairs(dim);
  if (ordered.size() != pairs.size()) {
    std::ostringstream os;
    os << "DecoherenceRates: dim " << dim << " needs " << pairs.size() << " rates, got " << ordered.size();
    throw ValidationError(os.str());
  }
  std::map<PairIndex, double> m;
  for (std::size_t i = 0; i < pairs.size(); ++i) m[pairs[i]] = ordered[i];
  return DecoherenceRates(dim, std::move(m), std::move(frozen));
}

double DecoherenceRates::rate(PairIndex p) const {
  auto it = rates_.find(p);
  if (it == rates_.end()) throw ValidationError("no rate for pair " + p.key());
  return it->second;
}

std::vector<double> DecoherenceRates::ordered() const {
  std::vector<double> out;
  out.reserve(rates_.size());
  for (const auto& p : level_pairs(dim_)) out.push_back(rates_.at(p));
  return out;
}

double DecoherenceRates::max_rate() const {
  double m = 0.0;
  for (const auto& [p, g] : rates_) m = std::max(m, g);
  return m;
}

double DecoherenceRates::min_positive_rate() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& [p, g] : rates_)
    if (g > 0.0) m = std::min(m, g);
  return m;
}

bool DecoherenceRates::pairwise_distinct(double rel_tol) const {
  const auto v = ordered();
  return !find_rate_collision(v, rel_tol).has_value();
}

namespace {

PairIndex parse_pair_key(const std::string& key, int dim) {
  const auto comma = key.find(',');
  if (comma == std::string::npos) throw ParseError("rates JSON: pair key '" + key + "' must look like \"j,k\"");
  int a = 0;
  int b = 0;
  try {
    std::size_t used_a = 0;
    std::size_t used_b = 0;
    a = std::stoi(key.substr(0, comma), &used_a);
    b = std::stoi(key.substr(comma + 1), &used_b);
    if (used_a != comma || used_b != key.size() - comma - 1) throw std::invalid_argument(key);
  } catch (const std::logic_error&) {
    throw ParseError("rates JSON: bad pair key '" + key + "'");
  }
  if (a < 1 || b < 1 || a > dim || b > dim || a == b)
    throw ParseError("rates JSON: pair key '" + key + "' outside 1.." + std::to_string(dim));
  return PairIndex::make(a, b);
}

}  // namespace

DecoherenceRates parse_rates_json(const std::string& text) {
  using nlohmann::json;
  // nlohmann keeps the last of duplicated keys; catch them while parsing.
  std::vector<std::set<std::string>> seen;
  std::string duplicate;
  json::parser_callback_t detect = [&](int, json::parse_event_t event, json& parsed) {
    if (event == json::parse_event_t::object_start) {
      seen.emplace_back();
    } else if (event == json::parse_event_t::object_end) {
      if (!seen.empty()) seen.pop_back();
    } else if (event == json::parse_event_t::key && !seen.empty()) {
      const auto key = parsed.get<std::string>();
      if (!seen.back().insert(key).second && duplicate.empty()) duplicate = key;
    }
    return true;
  };
  json j;
  try {
    j = json::parse(text, detect);
  } catch (const json::exception& e) {
    throw ParseError(std::string("rates JSON: ") + e.what());
  }
  if (!duplicate.empty()) throw ParseError("rates JSON: duplicate key '" + duplicate + "'");
  try {
    const int dim = j.at("dim").get<int>();
    if (dim < 2) throw ParseError("rates JSON: dim must be >= 2");
    std::map<PairIndex, double> rates;
    for (const auto& [key, value] : j.at("rates").items()) {
      const auto p = parse_pair_key(key, dim);
      if (!value.is_number()) throw ParseError("rates JSON: rate for '" + key + "' is not a number");
      if (!rates.emplace(p, value.get<double>()).second)
        throw ParseError("rates JSON: duplicate pair " + p.key() + " (key '" + key + "')");
    }
    std::set<PairIndex> frozen;
    if (j.contains("frozen"))
      for (const auto& f : j.at("frozen")) frozen.insert(parse_pair_key(f.get<std::string>(), dim));
    return DecoherenceRates(dim, std::move(rates), std::move(frozen));
  } catch (const json::exception& e) {
    throw ParseError(std::string("rates JSON: ") + e.what());
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
}

nlohmann::json to_json(const DecoherenceRates& rates) {
  nlohmann::json r = nlohmann::json::object();
  for (const auto& [p, g] : rates.by_pair()) r[p.key()] = g;
  nlohmann::json out{{"dim", rates.dim()}, {"rates", std::move(r)}};
  if (!rates.frozen().empty()) {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& p : rates.frozen()) f.push_back(p.key());
    out["frozen"] = std::move(f);
  }
  return out;
}

ComplexMatrix DynamicMatrix::at(double t) const {
  const int n = dim();
  ComplexMatrix::Storage d = ComplexMatrix::Storage::Ones(n, n);
  for (const auto& [p, g] : rates_.by_pair()) {
    const double v = std::exp(-g * t);
    d(p.j - 1, p.k - 1) = v;
    d(p.k - 1, p.j - 1) = v;
  }
  return ComplexMatrix(std::move(d));
}

DynamicMatrix build_dynamic_matrix(const DecoherenceRates& rates) { return DynamicMatrix(rates); }

std::vector<double> default_time_samples(const DecoherenceRates& rates, int count) {
  std::vector<double> out{0.0};
  const double gmax = rates.max_rate();
  const double gmin = rates.min_positive_rate();
  if (gmax <= 0.0 || count <= 0) return out;
  const double lo = std::log(0.01 / gmax);
  const double hi = std::log(10.0 / gmin);
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out.push_back(std::exp(lo + f * (hi - lo)));
  }
  return out;
}

ChannelValidation validate_channel(const DynamicMatrix& dm, std::span<const double> time_samples, double tol) {
  if (time_samples.empty()) throw ValidationError("validate_channel: no time samples");
  for (double t : time_samples)
    if (t < 0.0 || !std::isfinite(t)) throw ValidationError("validate_channel: negative or non-finite time sample");

  ChannelValidation report;
  report.worst_min_eigenvalue = std::numeric_limits<double>::infinity();
  const int n = dm.dim();

  // Condition 3 holds exactly: every off-diagonal entry is exp(-γ·0) = 1.
  const auto d0 = dm.at(0.0);
  report.ones_at_zero = d0 == ComplexMatrix::ones(n);

  for (double t : time_samples) {
    const auto d = dm.at(t);
    for (int i = 0; i < n; ++i)
      if (d.at(i, i) != Complex(1.0, 0.0)) report.unit_diagonal = false;
    const double min_eig = hermitian_eigenvalues(d).minCoeff();
    if (min_eig < report.worst_min_eigenvalue) {
      report.worst_min_eigenvalue = min_eig;
      report.worst_t = t;
    }
    if (min_eig < -tol) {
      report.positive = false;
      report.violations.push_back({t, min_eig});
    }
  }
  return report;
}

ComplexMatrix evolve_matrix(const ComplexMatrix& rho0, const DynamicMatrix& dm, double t) {
  if (rho0.dim() != dm.dim()) throw DimensionError("evolve: state and channel dimensions differ");
  if (t < 0.0 || !std::isfinite(t)) throw ValidationError("evolve: time must be finite and >= 0");
  return hadamard_product(dm.at(t), rho0);
}

DensityMatrix evolve(const DensityMatrix& rho0, const DynamicMatrix& dm, double t) {
  return DensityMatrix(evolve_matrix(rho0.matrix(), dm, t), rho0.tolerance());
}

std::vector<double> ChannelDecomposition::coefficients(double t) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(mu));
  out.push_back(1.0);
  for (double g : rates) out.push_back(std::exp(-g * t));
  return out;
}

ComplexMatrix ChannelDecomposition::reassemble(double t) const {
  const auto alpha = coefficients(t);
  ComplexMatrix::Storage d = ComplexMatrix::Storage::Zero(dim, dim);
  for (std::size_t k = 0; k < basis.size(); ++k) d += alpha[k] * basis[k].eigen();
  return ComplexMatrix(std::move(d));
}

ChannelDecomposition decompose(const DynamicMatrix& dm) {
  ChannelDecomposition out;
  out.dim = dm.dim();
  out.pairs = level_pairs(out.dim);
  out.mu = static_cast<int>(out.pairs.size()) + 1;
  out.basis.push_back(ComplexMatrix::identity(out.dim));
  for (const auto& p : out.pairs) {
    ComplexMatrix a(out.dim);
    a.set(p.j - 1, p.k - 1, 1.0);
    a.set(p.k - 1, p.j - 1, 1.0);
    out.basis.push_back(std::move(a));
    out.rates.push_back(dm.rates().rate(p));
  }
  return out;
}

}  // namespace dyntomo
