#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "dyntomo/basis.hpp"
#include "dyntomo/matcore.hpp"
#include "dyntomo/measurement.hpp"
#include "support.hpp"

namespace dyntomo {
namespace {

using testing::random_complex;
using testing::random_hermitian;

TEST(ComplexMatrix, RejectsDimBelowTwo) {
  EXPECT_THROW(ComplexMatrix(1), DimensionError);
  EXPECT_THROW(ComplexMatrix(ComplexMatrix::Storage(2, 3)), DimensionError);
}

TEST(ComplexMatrix, AccessOutsideRangeThrows) {
  ComplexMatrix m(3);
  EXPECT_THROW(m.at(3, 0), DimensionError);
  EXPECT_THROW(m.at(0, -1), DimensionError);
  EXPECT_THROW(m.set(-1, 2, 1.0), DimensionError);
  m.set(2, 2, Complex(1.0, 2.0));
  EXPECT_EQ(m.at(2, 2), Complex(1.0, 2.0));
}

TEST(HadamardProduct, AllOnesIsNeutral) {
  std::mt19937_64 gen(1);
  const auto m = random_complex(4, gen);
  EXPECT_EQ(hadamard_product(ComplexMatrix::ones(4), m), m);
}

TEST(HadamardProduct, IdentityKeepsDiagonal) {
  std::mt19937_64 gen(2);
  const auto m = random_complex(3, gen);
  const auto d = hadamard_product(ComplexMatrix::identity(3), m);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(d.at(r, c), r == c ? m.at(r, c) : Complex(0.0));
}

TEST(HadamardProduct, QutritQ1WithFirstPairMatrixIsLambda1) {
  const auto q1 = observables_qutrit().dynamic[0].mat;
  const auto a12 = ComplexMatrix::from_rows({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}});
  EXPECT_EQ(hadamard_product(q1, a12), gellmann_qutrit(1).mat);
}

TEST(HadamardProduct, DimensionMismatchThrows) {
  EXPECT_THROW(hadamard_product(ComplexMatrix(2), ComplexMatrix(3)), DimensionError);
}

TEST(HadamardProduct, AlgebraicLaws) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 5;
    const auto a = random_complex(n, gen);
    const auto b = random_complex(n, gen);
    const auto c = random_complex(n, gen);
    EXPECT_LE(hadamard_product(a, b).max_abs_diff(hadamard_product(b, a)), 1e-12);
    EXPECT_LE(hadamard_product(hadamard_product(a, b), c).max_abs_diff(hadamard_product(a, hadamard_product(b, c))),
              1e-12);
    EXPECT_LE(hadamard_product(a, b + c).max_abs_diff(hadamard_product(a, b) + hadamard_product(a, c)), 1e-12);
  }
}

TEST(HadamardProduct, SchurProductOfPsdIsPsd) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int n = 2 + static_cast<int>(seed % 6);
    const auto a = random_density_matrix(n, seed);
    const auto b = random_density_matrix(n, seed + 1000);
    EXPECT_TRUE(is_psd(hadamard_product(a.matrix(), b.matrix()), 1e-12).psd) << "seed " << seed;
  }
}

TEST(TraceInnerProduct, GellMannOrthogonality) {
  EXPECT_EQ(trace_inner_product(gellmann_qutrit(3).mat, gellmann_qutrit(3).mat), Complex(2.0));
  EXPECT_EQ(trace_inner_product(gellmann_qutrit(1).mat, gellmann_qutrit(2).mat), Complex(0.0));
  const auto mixed = ComplexMatrix::identity(3) * (1.0 / 3.0);
  EXPECT_EQ(trace_inner_product(mixed, gellmann_qutrit(5).mat), Complex(0.0));
}

TEST(TraceInnerProduct, MatchesLoopOracleAndIsRealForHermitian) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 7;
    const auto a = random_hermitian(n, gen);
    const auto b = random_hermitian(n, gen);
    const auto v = trace_inner_product(a, b);
    EXPECT_LE(std::abs(v - testing::loop_trace_product(a, b)), 1e-12 * std::max(1.0, std::abs(v)));
    EXPECT_LE(std::abs(v.imag()), 1e-12);
  }
  EXPECT_THROW(trace_inner_product(ComplexMatrix(2), ComplexMatrix(3)), DimensionError);
}

TEST(IsPsd, Examples) {
  auto r = is_psd(ComplexMatrix::identity(3));
  EXPECT_TRUE(r.psd);
  EXPECT_NEAR(r.min_eigenvalue, 1.0, 1e-15);

  r = is_psd(ComplexMatrix::diagonal({1.0, -0.5}));
  EXPECT_FALSE(r.psd);
  EXPECT_NEAR(r.min_eigenvalue, -0.5, 1e-15);

  r = is_psd(ComplexMatrix::ones(3));
  EXPECT_TRUE(r.psd);
  EXPECT_NEAR(r.min_eigenvalue, 0.0, 1e-14);
}

TEST(IsPsd, NonHermitianThrows) {
  EXPECT_THROW(is_psd(ComplexMatrix::from_rows({{1, 1}, {0, 1}})), ValidationError);
}

TEST(DensityMatrix, ValidatesInvariants) {
  EXPECT_NO_THROW(DensityMatrix(ComplexMatrix::diagonal({0.5, 0.5})));
  EXPECT_THROW(DensityMatrix(ComplexMatrix::diagonal({0.6, 0.6})), ValidationError);
  EXPECT_THROW(DensityMatrix(ComplexMatrix::diagonal({1.5, -0.5})), ValidationError);
  EXPECT_THROW(DensityMatrix(ComplexMatrix::from_rows({{0.5, 0.1}, {0.2, 0.5}})), ValidationError);
}

TEST(RandomDensityMatrix, TraceAndPositivity) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_NEAR(random_density_matrix(3, s).matrix().trace().real(), 1.0, 1e-12);
    EXPECT_GE(is_psd(random_density_matrix(4, s).matrix(), 1e-12).min_eigenvalue, -1e-12);
  }
}

TEST(RandomDensityMatrix, DeterministicForSeed) {
  EXPECT_EQ(random_density_matrix(3, 42).matrix(), random_density_matrix(3, 42).matrix());
  EXPECT_FALSE(random_density_matrix(3, 42).matrix() == random_density_matrix(3, 43).matrix());
}

TEST(RandomDensityMatrix, ThousandSeedsAcrossDimsArePsd) {
  for (int n = 2; n <= 8; ++n)
    for (std::uint64_t s = 0; s < 1000; ++s)
      ASSERT_TRUE(is_psd(random_density_matrix(n, s).matrix(), 1e-10).psd) << "dim " << n << " seed " << s;
}

TEST(RandomDensityMatrix, RejectsSmallDim) { EXPECT_THROW(random_density_matrix(1, 0), DimensionError); }

TEST(StateDistance, Examples) {
  const auto rho = random_density_matrix(3, 5);
  const auto d0 = state_distance(rho, rho);
  EXPECT_EQ(d0.trace_distance, 0.0);
  EXPECT_EQ(d0.hs_distance, 0.0);

  const DensityMatrix zero(ComplexMatrix::diagonal({1.0, 0.0}));
  const DensityMatrix one(ComplexMatrix::diagonal({0.0, 1.0}));
  EXPECT_NEAR(state_distance(zero, one).trace_distance, 1.0, 1e-15);
  EXPECT_NEAR(state_distance(zero, one).hs_distance, std::sqrt(2.0), 1e-15);
}

TEST(StateDistance, MatchesEigenvalueOracle) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const int n = 2 + static_cast<int>(s % 5);
    const auto a = random_density_matrix(n, s);
    const auto b = random_density_matrix(n, s + 500);
    // The difference is Hermitian, so its singular values are |eigenvalues|.
    Eigen::ComplexEigenSolver<ComplexMatrix::Storage> eig(a.matrix().eigen() - b.matrix().eigen());
    const double oracle = 0.5 * eig.eigenvalues().cwiseAbs().sum();
    double frob = 0.0;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) frob += std::norm(a.matrix().at(r, c) - b.matrix().at(r, c));
    const auto d = state_distance(a, b);
    EXPECT_NEAR(d.trace_distance, oracle, 1e-12);
    EXPECT_NEAR(d.hs_distance, std::sqrt(frob), 1e-12);
    EXPECT_GE(d.trace_distance, 0.0);
    EXPECT_LE(d.trace_distance, 1.0);
  }
}

TEST(StateDistance, DimensionMismatchThrows) {
  EXPECT_THROW(state_distance(random_density_matrix(2, 0), random_density_matrix(3, 0)), DimensionError);
}

TEST(Fidelity, PureStatesAndIdentity) {
  const auto rho = random_density_matrix(4, 9);
  EXPECT_NEAR(fidelity(rho.matrix(), rho.matrix()), 1.0, 1e-10);
  const auto zero = ComplexMatrix::diagonal({1.0, 0.0});
  const auto one = ComplexMatrix::diagonal({0.0, 1.0});
  EXPECT_NEAR(fidelity(zero, one), 0.0, 1e-15);
  EXPECT_NEAR(fidelity(zero, ComplexMatrix::identity(2) * 0.5), 0.5, 1e-15);
}

TEST(MatrixJson, RoundTripAndRaggedRejection) {
  const auto m = random_density_matrix(3, 11).matrix();
  EXPECT_EQ(complex_matrix_from_json(to_json(m)), m);

  auto j = to_json(m);
  j["entries"][1].erase(0);
  EXPECT_THROW(complex_matrix_from_json(j), ParseError);
  EXPECT_THROW(complex_matrix_from_json(nlohmann::json::parse(R"({"dim": 2, "entries": [[[1,0]]]})")), ParseError);
  EXPECT_THROW(complex_matrix_from_json(nlohmann::json::parse(R"({"dim": 2})")), ParseError);
}

}  // namespace
}  // namespace dyntomo
