#pragma once

#include "finola/types.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace finola::testing {

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline RealMatrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  RealMatrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

inline RealVector random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  RealVector v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline ComplexMatrix random_complex_matrix(std::mt19937_64& rng, int rows, int cols,
                                           double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  ComplexMatrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = {dist(rng), dist(rng)};
  return m;
}

/// Direction matrices drawn like the trained ones: entries within ±1/√C.
inline FinolaParams random_params(std::mt19937_64& rng, int channels,
                                  double epsilon = default_epsilon<double>()) {
  const double bound = 1.0 / std::sqrt(double(channels));
  FinolaParams p;
  p.A = random_matrix(rng, channels, channels, bound);
  p.B = random_matrix(rng, channels, channels, bound);
  p.A_minus = random_matrix(rng, channels, channels, bound);
  p.B_minus = random_matrix(rng, channels, channels, bound);
  p.epsilon = epsilon;
  return p;
}

inline LatentSet single_latent(std::mt19937_64& rng, int channels, GridPos pos,
                               double scale = 1.0) {
  LatentSet set;
  set.vectors.push_back(random_vector(rng, channels, scale));
  set.positions.push_back(pos);
  return set;
}

/// Gauss-Jordan elimination with full pivoting; the independent inversion
/// path the LU-based implementation is checked against.
inline RealMatrix gauss_jordan_inverse(RealMatrix a) {
  const int n = static_cast<int>(a.rows());
  RealMatrix inv = RealMatrix::Identity(n, n);
  std::vector<int> col_of(n, -1);
  std::vector<bool> used_row(n, false), used_col(n, false);
  for (int step = 0; step < n; ++step) {
    int pr = -1, pc = -1;
    double best = -1.0;
    for (int r = 0; r < n; ++r) {
      if (used_row[r]) continue;
      for (int c = 0; c < n; ++c)
        if (!used_col[c] && std::abs(a(r, c)) > best) {
          best = std::abs(a(r, c));
          pr = r;
          pc = c;
        }
    }
    used_row[pr] = true;
    used_col[pc] = true;
    col_of[pr] = pc;
    const double pivot = a(pr, pc);
    a.row(pr) /= pivot;
    inv.row(pr) /= pivot;
    for (int r = 0; r < n; ++r)
      if (r != pr && a(r, pc) != 0.0) {
        const double f = a(r, pc);
        a.row(r) -= f * a.row(pr);
        inv.row(r) -= f * inv.row(pr);
      }
  }
  RealMatrix out(n, n);
  for (int r = 0; r < n; ++r) out.row(col_of[r]) = inv.row(r);
  return out;
}

}  // namespace finola::testing
