#pragma once

// Generators and brute-force oracles shared by the unit tests.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "dyntomo/channel.hpp"
#include "dyntomo/matcore.hpp"

namespace dyntomo::testing {

using Dense = std::vector<std::vector<Complex>>;

inline Dense to_dense(const ComplexMatrix& m) {
  Dense d(m.dim(), std::vector<Complex>(m.dim()));
  for (int r = 0; r < m.dim(); ++r)
    for (int c = 0; c < m.dim(); ++c) d[r][c] = m.at(r, c);
  return d;
}

// Tr{a b} by explicit double loop.
inline Complex loop_trace_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  Complex sum = 0.0;
  for (int r = 0; r < a.dim(); ++r)
    for (int c = 0; c < a.dim(); ++c) sum += a.at(r, c) * b.at(c, r);
  return sum;
}

inline ComplexMatrix random_hermitian(int dim, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  ComplexMatrix m(dim);
  for (int r = 0; r < dim; ++r) {
    m.set(r, r, n(gen));
    for (int c = r + 1; c < dim; ++c) {
      const Complex z(n(gen), n(gen));
      m.set(r, c, z);
      m.set(c, r, std::conj(z));
    }
  }
  return m;
}

inline ComplexMatrix random_complex(int dim, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix m(dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) m.set(r, c, Complex(n(gen), n(gen)));
  return m;
}

// Pairwise distinct positive rates drawn from [lo, hi], spaced at least `gap` apart.
inline std::vector<double> random_distinct_rates(std::size_t count, std::mt19937_64& gen, double lo = 0.5,
                                                 double hi = 5.0, double gap = 0.05) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out;
  while (out.size() < count) {
    const double g = u(gen);
    bool ok = true;
    for (double h : out) ok = ok && std::abs(g - h) >= gap;
    if (ok) out.push_back(g);
  }
  return out;
}

// Determinant by cofactor expansion along the first row.
inline double cofactor_determinant(const std::vector<std::vector<double>>& m) {
  const auto n = m.size();
  if (n == 1) return m[0][0];
  double det = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::vector<double>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<double> row;
      for (std::size_t cc = 0; cc < n; ++cc)
        if (cc != c) row.push_back(m[r][cc]);
      minor.push_back(row);
    }
    det += (c % 2 == 0 ? 1.0 : -1.0) * m[0][c] * cofactor_determinant(minor);
  }
  return det;
}

// Rates 1, 2, ..., N(N-1)/2 in lexicographic pair order.
inline DecoherenceRates sequential_rates(int dim) {
  std::vector<double> r;
  for (int i = 1; i <= dim * (dim - 1) / 2; ++i) r.push_back(i);
  return DecoherenceRates::from_ordered(dim, r);
}

// Rates whose nodes ξ = exp(-γ) at unit step sit on Chebyshev points of [lo, hi].
// These keep the coefficient matrices as well conditioned as an arithmetic grid allows.
inline std::vector<double> chebyshev_rates(std::size_t count, double lo = 0.02, double hi = 0.98) {
  std::vector<double> out;
  const double pi = std::acos(-1.0);
  for (std::size_t i = 1; i <= count; ++i) {
    const double x = std::cos((2.0 * static_cast<double>(i) - 1.0) * pi / (2.0 * static_cast<double>(count)));
    out.push_back(-std::log(0.5 * (lo + hi) + 0.5 * (hi - lo) * x));
  }
  return out;
}

}  // namespace dyntomo::testing
