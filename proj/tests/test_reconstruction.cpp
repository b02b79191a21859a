#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

#include "dyntomo/reconstruction.hpp"
#include "support.hpp"

namespace dyntomo {
namespace {

const DecoherenceRates& qutrit_rates() {
  static const auto r = DecoherenceRates::from_ordered(3, {1, 2, 3});
  return r;
}

TimeGrid auto_grid(Scheme scheme, const DecoherenceRates& rates) {
  return TimeGrid::make(default_step(rates), required_instants(scheme, rates.dim()));
}

MeasurementRecord simulate(const DensityMatrix& rho, const DecoherenceRates& rates, const ObservableSet& set,
                           const TimeGrid& grid, double sigma = 0.0, std::uint64_t seed = 0) {
  return measure_series(rho, build_dynamic_matrix(rates), set, grid, NoiseSpec{sigma, seed});
}

double trace_distance(const ComplexMatrix& a, const DensityMatrix& b) {
  return matrix_distance(a, b.matrix()).trace_distance;
}

// --- coefficient matrix ------------------------------------------------------

TEST(CoefficientMatrix, GeneralizedVandermondeRows) {
  const std::vector<double> rates{0.7, 1.9, 3.1};
  const auto grid = TimeGrid::make(0.3, 4);
  const auto cm = coefficient_matrix(rates, grid);
  ASSERT_EQ(cm.values.rows(), 4);
  for (int j = 1; j <= 4; ++j) {
    EXPECT_EQ(cm.values(j - 1, 0), 1.0);
    for (int c = 0; c < 3; ++c) {
      const double xi = std::exp(-rates[c] * 0.3);
      EXPECT_NEAR(cm.values(j - 1, c + 1), std::pow(xi, j), 1e-15);
    }
  }
  EXPECT_TRUE(cm.invertible);
  EXPECT_FALSE(cm.collision.has_value());
}

TEST(CoefficientMatrix, EqualRatesAreSingular) {
  const std::vector<double> rates{1.0, 1.0, 3.0};
  const auto cm = coefficient_matrix(rates, TimeGrid::make(0.5, 4), kRateDistinctTolerance, {"A", "B", "C"});
  EXPECT_FALSE(cm.invertible);
  ASSERT_TRUE(cm.collision.has_value());
  EXPECT_EQ(*cm.collision, (std::pair<std::size_t, std::size_t>{1, 2}));
  EXPECT_NE(cm.collision_message().find("A"), std::string::npos);
  EXPECT_NE(cm.collision_message().find("B"), std::string::npos);
  EXPECT_THROW(solve_projections(cm, Eigen::VectorXd::Ones(4)), SingularSystemError);
}

TEST(CoefficientMatrix, ZeroRateCollidesWithConstantColumn) {
  const std::vector<double> rates{0.0, 2.0};
  const auto cm = coefficient_matrix(rates, TimeGrid::make(0.5, 3));
  EXPECT_FALSE(cm.invertible);
  EXPECT_EQ(cm.collision->first, 0u);
}

TEST(CoefficientMatrix, DeterminantMatchesCofactorOracle) {
  const std::vector<double> rates{1, 2, 3};
  const auto cm = coefficient_matrix(rates, TimeGrid::make(0.5, 4));
  std::vector<std::vector<double>> rows(4, std::vector<double>(4));
  for (int j = 1; j <= 4; ++j) {
    rows[j - 1][0] = 1.0;
    for (int c = 0; c < 3; ++c) rows[j - 1][c + 1] = std::exp(-rates[c] * 0.5 * j);
  }
  const double oracle = testing::cofactor_determinant(rows);
  ASSERT_NE(oracle, 0.0);
  EXPECT_EQ(cm.determinant_sign, oracle > 0 ? 1 : -1);
  EXPECT_NEAR(cm.determinant_sign * std::exp(cm.log_abs_determinant), oracle, 1e-12 * std::abs(oracle));
}

TEST(CoefficientMatrix, Errors) {
  const std::vector<double> rates{1, 2, 3};
  EXPECT_THROW(coefficient_matrix(rates, TimeGrid::make(0.5, 3)), DimensionError);
  EXPECT_THROW(coefficient_matrix(rates, TimeGrid{0.0, 4}), ValidationError);
  EXPECT_THROW(coefficient_matrix(rates, TimeGrid{-0.5, 4}), ValidationError);
}

// Condition number grows with the step once the nodes start bunching towards 0.
TEST(CoefficientMatrix, ConditioningGrowsForLongSteps) {
  const std::vector<double> rates{1, 2, 3};
  const double gmax = 3.0;
  const double at_default = coefficient_matrix(rates, TimeGrid::make(1.0 / (2.0 * gmax), 4)).condition_number;
  EXPECT_LT(at_default, 1e4);
  double prev = 0.0;
  for (double x = 2.0; x <= 20.0; x += 0.5) {
    const double cond = coefficient_matrix(rates, TimeGrid::make(x / gmax, 4)).condition_number;
    EXPECT_GT(cond, prev) << "t*gmax = " << x;
    prev = cond;
  }
}

TEST(SolveProjections, DiagonalSystem) {
  CoefficientMatrix cm;
  cm.values = Eigen::Vector3d(1.0, 2.0, 4.0).asDiagonal();
  cm.condition_number = 4.0;
  cm.invertible = true;
  const Eigen::Vector3d data(3.0, -2.0, 8.0);
  const auto sol = solve_projections(cm, data);
  EXPECT_EQ(sol.projections, Eigen::Vector3d(3.0, -1.0, 2.0));
  EXPECT_EQ(sol.residual, 0.0);

  cm.values = Eigen::Matrix3d::Identity();
  cm.condition_number = 1.0;
  EXPECT_EQ(solve_projections(cm, data).projections, data);
  EXPECT_THROW(solve_projections(cm, Eigen::VectorXd::Ones(2)), DimensionError);
}

TEST(SolveProjections, RefusesIllConditioned) {
  std::vector<double> rates;
  for (int i = 1; i <= 10; ++i) rates.push_back(i);
  const auto cm = coefficient_matrix(rates, TimeGrid::make(1.0 / 20.0, 11));
  EXPECT_TRUE(cm.invertible);
  EXPECT_GT(cm.condition_number, 1e12);
  try {
    solve_projections(cm, Eigen::VectorXd::Ones(11));
    FAIL() << "expected refusal";
  } catch (const IllConditionedError& e) {
    EXPECT_EQ(e.condition(), cm.condition_number);
  }
}

TEST(SolveProjections, PerturbationBoundedBySmallestSingularValue) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  const std::vector<double> rates{1, 2, 3};
  const auto cm = coefficient_matrix(rates, TimeGrid::make(1.0 / 6.0, 4));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cm.values);
  const double smin = svd.singularValues()(3);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd data(4), eps(4);
    for (int i = 0; i < 4; ++i) {
      data(i) = nd(gen);
      eps(i) = 1e-8 * nd(gen);
    }
    const auto x = solve_projections(cm, data).projections;
    const auto y = solve_projections(cm, data + eps).projections;
    EXPECT_LE((y - x).norm(), eps.norm() / smin * (1.0 + 1e-6));
  }
}

TEST(SolveProjections, QutritProjectionsEqualDirectTraces) {
  const auto rho = random_density_matrix(3, 31);
  const auto grid = auto_grid(Scheme::qutrit_thm31, qutrit_rates());
  const auto rec = simulate(rho, qutrit_rates(), observables_qutrit(), grid);
  const std::vector<double> rates{1, 2, 3};
  const auto cm = coefficient_matrix(rates, grid);
  auto tr = [&](int i) { return testing::loop_trace_product(gellmann_qutrit(i).mat, rho.matrix()).real(); };
  const int q1_terms[] = {3, 1, 5, 7};
  const int q2_terms[] = {8, 2, 4, 6};
  for (const auto& [label, terms] : {std::pair{"Q1", q1_terms}, std::pair{"Q2", q2_terms}}) {
    Eigen::VectorXd data(4);
    for (int j = 1; j <= 4; ++j) data(j - 1) = rec.find(label, grid.instant(j))->value;
    const auto x = solve_projections(cm, data).projections;
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(x(i), tr(terms[i]), 1e-11) << label << " term " << i;
  }
}

// --- identify_ggm --------------------------------------------------------------

TEST(IdentifyGGM, Forms) {
  EXPECT_FALSE(identify_ggm(ComplexMatrix(3)).has_value());
  const auto c = identify_ggm(ggm(GGMIndex::antisymmetric(1, 3, 4)).mat * 2.5);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->index, GGMIndex::antisymmetric(1, 3, 4));
  EXPECT_NEAR(c->scale, 2.5, 1e-15);
  EXPECT_NEAR(c->offset, 0.0, 1e-15);
  const auto shifted = identify_ggm(ComplexMatrix::identity(3) * 0.5 + gellmann_qutrit(8).mat);
  ASSERT_TRUE(shifted.has_value());
  EXPECT_NEAR(shifted->offset, 0.5, 1e-15);
  EXPECT_THROW(identify_ggm(gellmann_qutrit(1).mat + gellmann_qutrit(2).mat), SchemeError);
  EXPECT_THROW(identify_ggm(ComplexMatrix::identity(3)), SchemeError);
}

// --- qutrit --------------------------------------------------------------------

TEST(ReconstructQutrit, MaximallyMixed) {
  const DensityMatrix mixed(ComplexMatrix::identity(3) * (1.0 / 3.0));
  const auto grid = auto_grid(Scheme::qutrit_thm31, qutrit_rates());
  const auto rep = reconstruct_qutrit(simulate(mixed, qutrit_rates(), observables_qutrit(), grid), qutrit_rates(), grid);
  EXPECT_LE(rep.bloch.components.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(rep.rho_hat.max_abs_diff(mixed.matrix()), 1e-15);
}

TEST(ReconstructQutrit, NoiselessRoundTrip) {
  const auto grid = auto_grid(Scheme::qutrit_thm31, qutrit_rates());
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto rho = random_density_matrix(3, s);
    const auto rep = reconstruct_qutrit(simulate(rho, qutrit_rates(), observables_qutrit(), grid), qutrit_rates(), grid);
    EXPECT_LE(trace_distance(rep.rho_hat, rho), 1e-9) << "seed " << s;
    EXPECT_LE((rep.bloch.components - bloch_decompose(rho).components).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE(rep.psd);
    EXPECT_FALSE(rep.psd_repair_applied);
    EXPECT_LE(rep.max_residual, 1e-12);
  }
}

TEST(ReconstructQutrit, NoiseStaysInsideConditionEnvelope) {
  const auto grid = auto_grid(Scheme::qutrit_thm31, qutrit_rates());
  const double sigma = 1e-6;
  std::vector<double> errors;
  double cond = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto rho = random_density_matrix(3, s);
    const auto rep = reconstruct_qutrit(simulate(rho, qutrit_rates(), observables_qutrit(), grid, sigma, s),
                                        qutrit_rates(), grid);
    for (const auto& sys : rep.systems) cond = std::max(cond, sys.condition_number);
    errors.push_back(trace_distance(rep.rho_hat, rho));
  }
  EXPECT_LE(*std::max_element(errors.begin(), errors.end()), 10.0 * cond * sigma);
  EXPECT_GT(*std::max_element(errors.begin(), errors.end()), 0.0);
}

TEST(ReconstructQutrit, ReportsSystems) {
  const auto grid = auto_grid(Scheme::qutrit_thm31, qutrit_rates());
  const auto rep = reconstruct_qutrit(simulate(random_density_matrix(3, 1), qutrit_rates(), observables_qutrit(), grid),
                                      qutrit_rates(), grid);
  ASSERT_EQ(rep.systems.size(), 2u);
  EXPECT_EQ(rep.systems[0].unknowns, (std::vector<std::string>{"d1", "s1,2", "a1,3", "a2,3"}));
  EXPECT_EQ(rep.systems[1].unknowns, (std::vector<std::string>{"d2", "a1,2", "s1,3", "s2,3"}));
  for (auto src : rep.sources) EXPECT_EQ(src, ComponentSource::dynamic);
  const auto j = to_json(rep);
  EXPECT_EQ(j.at("scheme"), "qutrit_thm31");
  EXPECT_EQ(j.at("bloch").size(), 8u);
  EXPECT_TRUE(j.at("bloch").contains("s1,2"));
  EXPECT_EQ(j.at("systems").size(), 2u);
  EXPECT_TRUE(j.at("systems")[0].contains("condition_number"));
  EXPECT_EQ(complex_matrix_from_json(j.at("rho_hat")), rep.rho_hat);
}

TEST(ReconstructQutrit, Errors) {
  const auto grid = auto_grid(Scheme::qutrit_thm31, qutrit_rates());
  auto rec = simulate(random_density_matrix(3, 1), qutrit_rates(), observables_qutrit(), grid);
  const auto equal = DecoherenceRates::from_ordered(3, {1, 1, 3});
  EXPECT_THROW(reconstruct_qutrit(rec, equal, grid), SingularSystemError);

  auto tagged = rec;
  tagged.scheme = Scheme::bell_single;
  EXPECT_THROW(reconstruct_qutrit(tagged, qutrit_rates(), grid), SchemeError);

  auto missing = rec;
  missing.entries.erase(missing.entries.begin() + 2);
  try {
    reconstruct_qutrit(missing, qutrit_rates(), grid);
    FAIL() << "expected SchemeError";
  } catch (const SchemeError& e) {
    EXPECT_NE(std::string(e.what()).find("Q1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
  }

  auto extra = rec;
  extra.entries.push_back({"Q7", 0.1, 1.0});
  EXPECT_THROW(reconstruct_qutrit(extra, qutrit_rates(), grid), SchemeError);
}

// --- four-level ----------------------------------------------------------------

TEST(ReconstructFourLevel, MaximallyMixedAndRoundTrip) {
  const auto rates = testing::sequential_rates(4);
  const auto grid = auto_grid(Scheme::fourlevel_thm41, rates);
  const DensityMatrix mixed(ComplexMatrix::identity(4) * 0.25);
  auto rep = reconstruct_fourlevel(simulate(mixed, rates, observables_fourlevel(), grid), rates, grid);
  EXPECT_LE(rep.rho_hat.max_abs_diff(mixed.matrix()), 1e-14);

  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto rho = random_density_matrix(4, s);
    rep = reconstruct_fourlevel(simulate(rho, rates, observables_fourlevel(), grid), rates, grid);
    EXPECT_LE(trace_distance(rep.rho_hat, rho), 1e-8) << "seed " << s;
  }
  EXPECT_EQ(rep.sources[GGMIndex::diagonal(3, 4).canonical_position()], ComponentSource::statics);
}

TEST(ReconstructFourLevel, CollidingRatesNamePairs) {
  const auto good = testing::sequential_rates(4);
  const auto grid = auto_grid(Scheme::fourlevel_thm41, good);
  const auto rec = simulate(random_density_matrix(4, 2), good, observables_fourlevel(), grid);
  const auto bad = DecoherenceRates::from_ordered(4, {1, 2, 3, 4, 2, 6});
  try {
    reconstruct_fourlevel(rec, bad, grid);
    FAIL() << "expected SingularSystemError";
  } catch (const SingularSystemError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1,3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2,4"), std::string::npos) << msg;
  }
}

TEST(ReconstructFourLevel, MissingStaticEntry) {
  const auto rates = testing::sequential_rates(4);
  const auto grid = auto_grid(Scheme::fourlevel_thm41, rates);
  auto rec = simulate(random_density_matrix(4, 2), rates, observables_fourlevel(), grid);
  rec.entries.pop_back();
  EXPECT_THROW(reconstruct_fourlevel(rec, rates, grid), SchemeError);
}

// --- Bell ----------------------------------------------------------------------

TEST(BellMixtureState, Examples) {
  const auto phi_plus = bell_mixture_state({1, 0, 0}).matrix();
  EXPECT_LE(phi_plus.max_abs_diff(ComplexMatrix::from_rows({{0.5, 0, 0, 0.5}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0.5, 0, 0, 0.5}})),
            1e-15);
  EXPECT_LE(bell_mixture_state({0.25, 0.25, 0.25}).matrix().max_abs_diff(ComplexMatrix::identity(4) * 0.25), 1e-15);
  EXPECT_THROW(bell_mixture_state({0.6, 0.6, 0.0}), ValidationError);
  EXPECT_THROW(bell_mixture_state({-0.1, 0.5, 0.0}), ValidationError);
}

TEST(BellMixtureState, WernerState) {
  // w |Ψ-><Ψ-| + (1-w) I/4 built entry by entry.
  for (double w : {0.0, 0.3, 0.7, 1.0}) {
    const double q = (1 - w) / 4.0;
    ComplexMatrix werner = ComplexMatrix::identity(4) * q;
    werner.set(1, 1, q + w / 2);
    werner.set(2, 2, q + w / 2);
    werner.set(1, 2, -w / 2);
    werner.set(2, 1, -w / 2);
    EXPECT_LE(bell_mixture_state({q, q, q}).matrix().max_abs_diff(werner), 1e-15) << "w " << w;
  }
}

TEST(BellMixtureState, BlochExpansionHasFiveComponents) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    double c[3] = {u(gen), u(gen), u(gen)};
    std::sort(c, c + 3);
    const BellMixture p{c[0], c[1] - c[0], c[2] - c[1]};
    const double p12 = p.p1 + p.p2;
    std::map<std::string, double> expected{{"d1", (2 * p12 - 1) / 2},
                                           {"d2", (2 * p12 - 1) / (2 * std::sqrt(3.0))},
                                           {"d3", (1 - 2 * p12) / std::sqrt(6.0)},
                                           {"s1,4", p.p1 - p.p2},
                                           {"s2,3", p.p3 - p.p4()}};
    const auto s = bloch_decompose(bell_mixture_state(p));
    const auto idx = canonical_indices(4);
    for (std::size_t a = 0; a < idx.size(); ++a) {
      const auto it = expected.find(idx[a].key());
      EXPECT_NEAR(s.components(static_cast<Eigen::Index>(a)), it == expected.end() ? 0.0 : it->second, 1e-12)
          << idx[a].key();
    }
  }
}

DecoherenceRates bell_rates(bool frozen_others) {
  if (frozen_others)
    return DecoherenceRates::from_ordered(4, {0, 0, 2, 3, 0, 0},
                                          {PairIndex{1, 2}, PairIndex{1, 3}, PairIndex{2, 4}, PairIndex{3, 4}});
  return DecoherenceRates::from_ordered(4, {1.5, 2.5, 2, 3, 3.5, 4.5});
}

TEST(ReconstructBell, EqualMixture) {
  const auto rates = bell_rates(false);
  const auto grid = auto_grid(Scheme::bell_single, rates);
  const auto res = reconstruct_bell(simulate(bell_mixture_state({0.25, 0.25, 0.25}), rates, observable_bell(), grid),
                                    rates, grid);
  EXPECT_NEAR(res.probabilities.p1, 0.25, 1e-12);
  EXPECT_NEAR(res.probabilities.p2, 0.25, 1e-12);
  EXPECT_NEAR(res.probabilities.p3, 0.25, 1e-12);
  EXPECT_TRUE(res.in_range);
}

TEST(ReconstructBell, ExactRecoveryAndFrozenRatesIrrelevant) {
  const BellMixture truth{0.5, 0.3, 0.1};
  std::optional<BellMixture> first;
  for (bool frozen : {false, true}) {
    const auto rates = bell_rates(frozen);
    const auto grid = TimeGrid::make(1.0 / 6.0, 3);
    const auto res = reconstruct_bell(simulate(bell_mixture_state(truth), rates, observable_bell(), grid), rates, grid);
    EXPECT_NEAR(res.probabilities.p1, 0.5, 1e-10);
    EXPECT_NEAR(res.probabilities.p2, 0.3, 1e-10);
    EXPECT_NEAR(res.probabilities.p3, 0.1, 1e-10);
    if (first) {
      EXPECT_NEAR(res.probabilities.p1, first->p1, 1e-13);
      EXPECT_NEAR(res.probabilities.p3, first->p3, 1e-13);
    }
    first = res.probabilities;
  }
}

TEST(ReconstructBell, EqualRelevantRatesAreSingular) {
  const auto rates = DecoherenceRates::from_ordered(4, {1, 2, 3, 3, 5, 6});
  const auto grid = TimeGrid::make(0.1, 3);
  const auto rec = simulate(bell_mixture_state({0.4, 0.3, 0.2}), bell_rates(false), observable_bell(), grid);
  EXPECT_THROW(reconstruct_bell(rec, rates, grid), SingularSystemError);
}

TEST(ReconstructBell, OutOfRangeFlaggedAndClampedOnRequest) {
  const auto rates = bell_rates(false);
  const auto grid = auto_grid(Scheme::bell_single, rates);
  auto rec = simulate(bell_mixture_state({1.0, 0.0, 0.0}), rates, observable_bell(), grid);
  for (auto& e : rec.entries) e.value += 0.05;
  const auto raw = reconstruct_bell(rec, rates, grid);
  EXPECT_FALSE(raw.in_range);
  EXPECT_FALSE(raw.clamped);
  ReconstructOptions opt;
  opt.clamp_probabilities = true;
  const auto clamped = reconstruct_bell(rec, rates, grid, opt);
  EXPECT_TRUE(clamped.clamped);
  EXPECT_TRUE(clamped.probabilities.valid(1e-12));
  const auto j = to_json(clamped);
  EXPECT_TRUE(j.at("clamped").get<bool>());
  EXPECT_TRUE(j.at("probabilities").contains("p4"));
}

// --- qudit ---------------------------------------------------------------------

TEST(ReconstructQudit, FourLevelCounts) {
  const auto rates = testing::sequential_rates(4);
  const auto set = observables_qudit(4);
  EXPECT_EQ(required_instants(Scheme::qudit_general, 4), 7);
  EXPECT_EQ(set.statics.size(), 1u);
  EXPECT_EQ(set.distinct_count(), 3u);
  const auto grid = auto_grid(Scheme::qudit_general, rates);
  const auto rho = random_density_matrix(4, 5);
  const auto rep = reconstruct_qudit(simulate(rho, rates, set, grid), rates, grid);
  EXPECT_LE(trace_distance(rep.rho_hat, rho), 1e-7);
}

TEST(ReconstructQudit, FiveLevelRoundTrip) {
  const auto rates = DecoherenceRates::from_ordered(5, testing::chebyshev_rates(10));
  const auto grid = TimeGrid::make(1.0, required_instants(Scheme::qudit_general, 5));
  const auto set = observables_qudit(5);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto rho = random_density_matrix(5, s);
    const auto rec = simulate(rho, rates, set, grid);
    std::vector<double> statics;
    for (int l = 3; l <= 4; ++l)
      statics.push_back(trace_inner_product(ggm(GGMIndex::diagonal(l, 5)).mat, rho.matrix()).real());
    const auto rep = reconstruct_qudit(rec, rates, grid, statics);
    EXPECT_LE(trace_distance(rep.rho_hat, rho), 1e-7) << "seed " << s;
  }
}

TEST(ReconstructQudit, SequentialRatesAtDefaultStepAreRefused) {
  const auto rates = testing::sequential_rates(5);
  const auto grid = auto_grid(Scheme::qudit_general, rates);
  const auto rec = simulate(random_density_matrix(5, 0), rates, observables_qudit(5), grid);
  EXPECT_THROW(reconstruct_qudit(rec, rates, grid), IllConditionedError);
}

TEST(ReconstructQudit, ThreeLevelMatchesQutrit) {
  const auto grid = auto_grid(Scheme::qutrit_thm31, qutrit_rates());
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto rec = simulate(random_density_matrix(3, s), qutrit_rates(), observables_qutrit(), grid);
    const auto a = reconstruct_qutrit(rec, qutrit_rates(), grid);
    const auto b = reconstruct_qudit(rec, qutrit_rates(), grid, std::span<const double>{});
    EXPECT_LE(a.rho_hat.max_abs_diff(b.rho_hat), 1e-15);
  }
}

TEST(ReconstructQudit, Errors) {
  const auto rates = testing::sequential_rates(4);
  const auto grid = auto_grid(Scheme::qudit_general, rates);
  const auto rec = simulate(random_density_matrix(4, 0), rates, observables_qudit(4), grid);
  const std::vector<double> two{0.1, 0.2};
  EXPECT_THROW(reconstruct_qudit(rec, rates, grid, two), SchemeError);
  EXPECT_THROW(reconstruct_qudit(rec, DecoherenceRates::from_ordered(4, {1, 2, 3, 4, 5, 5}), grid),
               SingularSystemError);
  auto other = rec;
  other.scheme = Scheme::fourlevel_thm41;
  EXPECT_THROW(reconstruct_qudit(other, rates, grid), SchemeError);
}

// Static inputs only move the diagonal, dynamic data only moves what its column fixes.
TEST(ReconstructQudit, DiagonalImmunity) {
  const auto rates = DecoherenceRates::from_ordered(5, testing::chebyshev_rates(10));
  const auto grid = TimeGrid::make(1.0, required_instants(Scheme::qudit_general, 5));
  const auto set = observables_qudit(5);
  const auto rec = simulate(random_density_matrix(5, 3), rates, set, grid);
  const std::vector<double> statics{0.05, -0.02};
  const auto base = reconstruct_qudit(rec, rates, grid, statics);

  const std::vector<double> moved{0.35, 0.4};
  const auto shifted = reconstruct_qudit(rec, rates, grid, moved);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c)
      if (r != c) EXPECT_LE(std::abs(shifted.rho_hat.at(r, c) - base.rho_hat.at(r, c)), 1e-12);

  // Adding a multiple of an exponential column of Q1's coefficient matrix
  // changes only the projection that column multiplies, an off-diagonal one.
  const auto systems = observable_systems(set, rates, grid);
  const double delta = 1e-3;
  const double rounding = 10.0 * delta * systems[0].matrix.condition_number * std::numeric_limits<double>::epsilon();
  for (Eigen::Index col = 1; col < systems[0].matrix.values.cols(); ++col) {
    auto perturbed = rec;
    for (int j = 1; j <= grid.count; ++j)
      for (auto& e : perturbed.entries)
        if (e.observable == "Q1" && e.time == grid.instant(j)) e.value += delta * systems[0].matrix.values(j - 1, col);
    const auto out = reconstruct_qudit(perturbed, rates, grid, statics);
    for (int d = 0; d < 5; ++d) EXPECT_LE(std::abs(out.rho_hat.at(d, d) - base.rho_hat.at(d, d)), rounding);
  }
}

// --- PSD repair ----------------------------------------------------------------

TEST(PsdRepair, ValidStateUnchanged) {
  const auto rho = random_density_matrix(3, 2);
  const auto out = psd_repair(rho.matrix());
  EXPECT_FALSE(out.applied);
  EXPECT_EQ(out.rho.matrix(), rho.matrix());
}

TEST(PsdRepair, ClipsAndRenormalizes) {
  const auto out = psd_repair(ComplexMatrix::diagonal({1.1, -0.1}));
  EXPECT_TRUE(out.applied);
  EXPECT_LE(out.rho.matrix().max_abs_diff(ComplexMatrix::diagonal({1.0, 0.0})), 1e-15);
}

TEST(PsdRepair, Errors) {
  EXPECT_THROW(psd_repair(ComplexMatrix::diagonal({1.2, 0.2})), ValidationError);
  EXPECT_THROW(psd_repair(ComplexMatrix::from_rows({{0.5, 0.1}, {0.3, 0.5}})), ValidationError);
}

TEST(PsdRepair, NoisyQutritProperty) {
  const auto grid = auto_grid(Scheme::qutrit_thm31, qutrit_rates());
  int repaired = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    // Nearly pure states so that noise pushes an eigenvalue below zero.
    const auto g = random_density_matrix(3, s).matrix();
    Eigen::SelfAdjointEigenSolver<ComplexMatrix::Storage> eig(g.eigen());
    const Eigen::VectorXcd v = eig.eigenvectors().col(2);
    const DensityMatrix rho(ComplexMatrix(ComplexMatrix::Storage(v * v.adjoint())));
    const auto rep = reconstruct_qutrit(simulate(rho, qutrit_rates(), observables_qutrit(), grid, 1e-3, s),
                                        qutrit_rates(), grid);
    const auto out = psd_repair(rep.raw);
    EXPECT_TRUE(is_psd(out.rho.matrix(), 1e-12).psd);
    EXPECT_NEAR(out.rho.matrix().trace().real(), 1.0, 1e-12);
    const auto ev = hermitian_eigenvalues(rep.raw);
    double clipped = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) clipped += std::max(0.0, -ev(i));
    EXPECT_LE(matrix_distance(out.rho.matrix(), rep.raw).trace_distance, clipped + 1e-12);
    repaired += out.applied ? 1 : 0;
  }
  EXPECT_GT(repaired, 0);
}

TEST(PsdRepair, OptionAppliesOnlyWhenNeeded) {
  const auto grid = auto_grid(Scheme::qutrit_thm31, qutrit_rates());
  const DensityMatrix pure(ComplexMatrix::diagonal({1.0, 0.0, 0.0}));
  ReconstructOptions opt;
  opt.psd_repair = true;
  auto rec = simulate(pure, qutrit_rates(), observables_qutrit(), grid);
  rec.entries[1].value -= 0.01;
  const auto rep = reconstruct_qutrit(rec, qutrit_rates(), grid, opt);
  EXPECT_FALSE(rep.psd);
  EXPECT_TRUE(rep.psd_repair_applied);
  EXPECT_TRUE(is_psd(rep.rho_hat, 1e-12).psd);
  const auto clean = reconstruct_qutrit(simulate(random_density_matrix(3, 0), qutrit_rates(), observables_qutrit(), grid),
                                        qutrit_rates(), grid, opt);
  EXPECT_FALSE(clean.psd_repair_applied);
}

}  // namespace
}  // namespace dyntomo
