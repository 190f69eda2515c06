#pragma once

// Shared between the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace stella::fixtures {

struct KMedoidsFixture {
  std::vector<std::vector<double>> points;
  std::size_t k = 1;
};

// n in [4, 12], k in [1, 3]. Points are planar unit vectors in k visible
// groups: group centres at least 30 degrees apart, each point within 10
// degrees of its centre.
inline KMedoidsFixture grouped_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  KMedoidsFixture f;
  f.k = 1 + rng() % 3;
  const std::size_t n = 4 + rng() % 9;
  std::vector<double> centres;
  while (centres.size() < f.k) {
    const double a = u(rng) * 170.0;
    if (std::all_of(centres.begin(), centres.end(), [&](double c) { return std::abs(c - a) >= 30.0; })) {
      centres.push_back(a);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double deg = centres[i % f.k] + (u(rng) - 0.5) * 20.0;
    const double r = deg * std::numbers::pi / 180.0;
    f.points.push_back({std::cos(r), std::sin(r)});
  }
  return f;
}

// Isotropic Gaussian directions, no cluster structure.
inline KMedoidsFixture gaussian_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  KMedoidsFixture f;
  const std::size_t n = 4 + rng() % 9;
  f.k = 1 + rng() % 3;
  const std::size_t dim = 2 + rng() % 4;
  f.points.assign(n, std::vector<double>(dim));
  for (auto& row : f.points) {
    for (auto& x : row) x = g(rng);
  }
  return f;
}

// Cosine distances in long double, written independently of the library.
inline std::vector<double> naive_cosine_distances(const std::vector<std::vector<double>>& v) {
  const auto n = v.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      long double dot = 0, a = 0, b = 0;
      for (std::size_t t = 0; t < v[i].size(); ++t) {
        dot += static_cast<long double>(v[i][t]) * v[j][t];
        a += static_cast<long double>(v[i][t]) * v[i][t];
        b += static_cast<long double>(v[j][t]) * v[j][t];
      }
      d[i * n + j] = static_cast<double>(std::max(0.0L, 1.0L - dot / std::sqrt(a * b)));
    }
  }
  return d;
}

// Objective of a medoid set; summed in index order.
inline double deviation(const std::vector<double>& d, std::size_t n, const std::vector<std::size_t>& medoids) {
  double total = 0;
  for (std::size_t j = 0; j < n; ++j) {
    double nearest = std::numeric_limits<double>::infinity();
    for (auto m : medoids) nearest = std::min(nearest, d[m * n + j]);
    total += nearest;
  }
  return total;
}

// Minimum objective over every k-subset.
inline double exhaustive_optimum(const std::vector<double>& d, std::size_t n, std::size_t k) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> mask(n, false);
  std::fill(mask.begin(), mask.begin() + static_cast<long>(k), true);
  do {
    std::vector<std::size_t> medoids;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) medoids.push_back(i);
    }
    best = std::min(best, deviation(d, n, medoids));
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

}  // namespace stella::fixtures
