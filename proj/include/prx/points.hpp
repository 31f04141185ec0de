#pragma once

// Evaluation-point constructions on [0,1]^p: a uniform grid (1-D), the two
// corner points followed by a Sobol sequence (the construction used for
// high-dimensional summaries), a Halton fallback for dimensions beyond the
// direction-number table, and k-means centers of a dataset.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "prx/errors.hpp"
#include "prx/localization.hpp"
#include "prx/rng.hpp"

namespace prx {

/// count equally spaced points on [0,1], endpoints included. dim must be 1.
inline Matrix uniform_grid_points(int count, int dim = 1) {
  if (count < 1) throw UsageError("uniform_grid_points: count < 1");
  if (dim != 1)
    throw UsageError("uniform_grid_points: only one dimension supported");
  Matrix out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double x =
        count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
    out.push_back({x});
  }
  return out;
}

namespace detail {

// Direction-number table (primitive polynomial degree s, coefficient a, and
// initial m values) for Sobol dimensions 2..21; dimension 1 uses the van der
// Corput sequence (all m = 1).
struct SobolRow {
  int s;
  unsigned a;
  unsigned m[8];
};

inline const SobolRow* sobol_table() {
  static const SobolRow rows[20] = {
      {1, 0, {1, 0, 0, 0, 0, 0, 0, 0}},
      {2, 1, {1, 3, 0, 0, 0, 0, 0, 0}},
      {3, 1, {1, 3, 1, 0, 0, 0, 0, 0}},
      {3, 2, {1, 1, 1, 0, 0, 0, 0, 0}},
      {4, 1, {1, 1, 3, 3, 0, 0, 0, 0}},
      {4, 4, {1, 3, 5, 13, 0, 0, 0, 0}},
      {5, 2, {1, 1, 5, 5, 17, 0, 0, 0}},
      {5, 4, {1, 1, 5, 5, 5, 0, 0, 0}},
      {5, 7, {1, 1, 7, 11, 19, 0, 0, 0}},
      {5, 11, {1, 1, 5, 1, 1, 0, 0, 0}},
      {5, 13, {1, 1, 1, 3, 11, 0, 0, 0}},
      {5, 14, {1, 3, 5, 5, 31, 0, 0, 0}},
      {6, 1, {1, 3, 3, 9, 7, 49, 0, 0}},
      {6, 13, {1, 1, 1, 15, 21, 21, 0, 0}},
      {6, 16, {1, 3, 1, 13, 27, 49, 0, 0}},
      {6, 19, {1, 1, 1, 15, 7, 5, 0, 0}},
      {6, 22, {1, 3, 1, 15, 13, 25, 0, 0}},
      {6, 25, {1, 1, 5, 5, 19, 61, 0, 0}},
      {7, 1, {1, 3, 7, 11, 23, 15, 103, 0}},
      {7, 4, {1, 3, 7, 13, 13, 15, 69, 0}},
  };
  return rows;
}

constexpr int kSobolMaxDim = 21;
constexpr int kSobolBits = 32;

// Direction integers v_k (scaled by 2^32) for one dimension (0-based).
inline std::vector<std::uint64_t> sobol_directions(int dim) {
  std::vector<std::uint64_t> v(kSobolBits);
  if (dim == 0) {  // van der Corput: m_k = 1
    for (int k = 0; k < kSobolBits; ++k)
      v[k] = 1ull << (kSobolBits - 1 - k);
    return v;
  }
  const SobolRow& row = sobol_table()[dim - 1];
  const int s = row.s;
  std::vector<std::uint64_t> m(static_cast<std::size_t>(kSobolBits));
  for (int k = 0; k < s; ++k) m[static_cast<std::size_t>(k)] = row.m[k];
  for (int k = s; k < kSobolBits; ++k) {
    std::uint64_t mk = m[static_cast<std::size_t>(k - s)] ^
                       (m[static_cast<std::size_t>(k - s)] << s);
    for (int j = 1; j < s; ++j)
      if ((row.a >> (s - 1 - j)) & 1u) mk ^= m[static_cast<std::size_t>(k - j)]
                                             << j;
    m[static_cast<std::size_t>(k)] = mk;
  }
  for (int k = 0; k < kSobolBits; ++k)
    v[k] = m[static_cast<std::size_t>(k)] << (kSobolBits - 1 - k);
  return v;
}

inline int lowest_zero_bit(std::uint64_t n) {
  int c = 0;
  while (n & 1ull) {
    n >>= 1;
    ++c;
  }
  return c;
}

}  // namespace detail

/// First `count` points of the Sobol sequence in `dim` dimensions (Gray-code
/// order, the all-zeros initial point skipped). dim <= 21.
inline Matrix sobol_points(int count, int dim) {
  if (count < 0) throw UsageError("sobol_points: negative count");
  if (dim < 1 || dim > detail::kSobolMaxDim)
    throw UsageError("sobol_points: dimension outside 1..21");
  std::vector<std::vector<std::uint64_t>> v(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j)
    v[static_cast<std::size_t>(j)] = detail::sobol_directions(j);
  Matrix out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::uint64_t> state(static_cast<std::size_t>(dim), 0);
  for (int i = 0; i < count; ++i) {
    const int c = detail::lowest_zero_bit(static_cast<std::uint64_t>(i));
    std::vector<double> p(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      state[static_cast<std::size_t>(j)] ^=
          v[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
      p[static_cast<std::size_t>(j)] =
          static_cast<double>(state[static_cast<std::size_t>(j)]) *
          0x1p-32;
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Halton sequence (primes 2, 3, 5, ...), the fallback beyond 21 dimensions.
inline Matrix halton_points(int count, int dim) {
  if (count < 0) throw UsageError("halton_points: negative count");
  if (dim < 1) throw UsageError("halton_points: dimension < 1");
  std::vector<int> primes;
  for (int c = 2; static_cast<int>(primes.size()) < dim; ++c) {
    bool is_prime = true;
    for (int p : primes)
      if (c % p == 0) is_prime = false;
    if (is_prime) primes.push_back(c);
  }
  Matrix out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) {
    std::vector<double> p(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      double f = 1.0, r = 0.0;
      for (int k = i; k > 0; k /= primes[static_cast<std::size_t>(j)]) {
        f /= primes[static_cast<std::size_t>(j)];
        r += f * (k % primes[static_cast<std::size_t>(j)]);
      }
      p[static_cast<std::size_t>(j)] = r;
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// The corners (0,...,0) and (1,...,1) followed by low-discrepancy fill:
/// Sobol for dim <= 21, Halton beyond.
inline Matrix sobol_with_corners(int count, int dim) {
  if (count < 1) throw UsageError("sobol_with_corners: count < 1");
  if (dim < 1) throw UsageError("sobol_with_corners: dimension < 1");
  Matrix out;
  out.push_back(std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  if (count >= 2)
    out.push_back(std::vector<double>(static_cast<std::size_t>(dim), 1.0));
  if (count > 2) {
    // Both sequences below already omit the all-zeros point, which would
    // duplicate the first corner.
    const Matrix fill = dim <= detail::kSobolMaxDim
                            ? sobol_points(count - 2, dim)
                            : halton_points(count - 2, dim);
    for (const auto& row : fill) out.push_back(row);
  }
  return out;
}

/// Lloyd's algorithm with seeded initial centers drawn from the data.
/// Returns k centers; empty clusters keep their previous center.
inline Matrix kmeans_centers(const Matrix& data, int k, std::uint64_t seed,
                             int max_iters = 100) {
  if (data.empty()) throw UsageError("kmeans_centers: no data");
  if (k < 1) throw UsageError("kmeans_centers: k < 1");
  const std::size_t n = data.size();
  const std::size_t p = data[0].size();
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);

  Rng rng(seed);
  Matrix centers;
  {  // distinct seeded picks
    auto order = random_permutation(n, rng);
    for (std::size_t c = 0; c < kk; ++c) centers.push_back(data[order[c]]);
  }
  std::vector<std::size_t> assign(n, 0);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      double best = -1.0;
      std::size_t bc = 0;
      for (std::size_t c = 0; c < kk; ++c) {
        double q = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          const double d = data[i][j] - centers[c][j];
          q += d * d;
        }
        if (best < 0.0 || q < best) {
          best = q;
          bc = c;
        }
      }
      if (assign[i] != bc) changed = true;
      assign[i] = bc;
    }
    Matrix fresh(kk, std::vector<double>(p, 0.0));
    std::vector<std::size_t> counts(kk, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < p; ++j) fresh[assign[i]][j] += data[i][j];
    }
    for (std::size_t c = 0; c < kk; ++c) {
      if (counts[c] == 0) continue;  // keep previous center
      for (std::size_t j = 0; j < p; ++j)
        centers[c][j] = fresh[c][j] / static_cast<double>(counts[c]);
    }
    if (!changed && it > 0) break;
  }
  return centers;
}

}  // namespace prx
