#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "stella/error.hpp"
#include "stella/kernels/vector_ops.hpp"

namespace k = stella::kernels;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> dist;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

// Compensated reference sum, independent of all kernel variants.
double oracle_dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

class IsaGuard {
 public:
  IsaGuard() : saved_(k::active_isa()) {}
  ~IsaGuard() { k::set_active_isa(saved_); }

 private:
  k::Isa saved_;
};

}  // namespace

TEST(VectorOps, ScalarMatchesOracleOnOddLengths) {
  std::mt19937_64 rng(7);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 63u, 64u, 65u, 768u}) {
    auto a = random_vector(rng, n);
    auto b = random_vector(rng, n);
    EXPECT_NEAR(k::scalar::dot(a.data(), b.data(), n), oracle_dot(a, b), 1e-10) << n;
    EXPECT_NEAR(k::scalar::squared_norm(a.data(), n), oracle_dot(a, a), 1e-10) << n;
  }
}

#if defined(STELLA_HAVE_AVX2)
TEST(VectorOps, Avx2MatchesScalar) {
  if (!k::isa_supported(k::Isa::avx2)) GTEST_SKIP() << "CPU lacks AVX2/FMA";
  std::mt19937_64 rng(11);
  for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 255u, 768u, 1025u}) {
    auto a = random_vector(rng, n);
    auto b = random_vector(rng, n);
    const double ref = k::scalar::dot(a.data(), b.data(), n);
    EXPECT_NEAR(k::avx2::dot(a.data(), b.data(), n), ref, 1e-12 * (1 + std::abs(ref)) * (n + 1));
    EXPECT_NEAR(k::avx2::squared_norm(a.data(), n), k::scalar::squared_norm(a.data(), n), 1e-12 * (n + 1));
  }
  const std::size_t rows = 13, dim = 37;
  auto q = random_vector(rng, dim);
  auto m = random_vector(rng, rows * dim);
  std::vector<double> s(rows), v(rows);
  k::scalar::dot_rows(q.data(), m.data(), rows, dim, s.data());
  k::avx2::dot_rows(q.data(), m.data(), rows, dim, v.data());
  for (std::size_t r = 0; r < rows; ++r) EXPECT_NEAR(v[r], s[r], 1e-12 * dim);
}
#endif

#if defined(STELLA_HAVE_NEON)
TEST(VectorOps, NeonMatchesScalar) {
  std::mt19937_64 rng(13);
  for (std::size_t n : {0u, 1u, 2u, 3u, 5u, 17u, 768u}) {
    auto a = random_vector(rng, n);
    auto b = random_vector(rng, n);
    EXPECT_NEAR(k::neon::dot(a.data(), b.data(), n), k::scalar::dot(a.data(), b.data(), n), 1e-12 * (n + 1));
  }
}
#endif

TEST(VectorOps, DispatchedCosineAgreesAcrossIsas) {
  IsaGuard guard;
  std::mt19937_64 rng(3);
  auto a = random_vector(rng, 100);
  auto b = random_vector(rng, 100);
  k::set_active_isa(k::Isa::scalar);
  const double ref = k::cosine(a, b);
  for (auto isa : {k::Isa::avx2, k::Isa::neon}) {
    if (!k::isa_supported(isa)) continue;
    k::set_active_isa(isa);
    EXPECT_NEAR(k::cosine(a, b), ref, 1e-12);
  }
}

TEST(VectorOps, CosineEdgeCases) {
  std::vector<double> a{1, 2, 3}, zero{0, 0, 0}, neg{-1, -2, -3};
  EXPECT_NEAR(k::cosine(a, a), 1.0, 1e-15);
  EXPECT_NEAR(k::cosine(a, neg), -1.0, 1e-15);
  EXPECT_EQ(k::cosine(a, zero), 0.0);
  std::vector<double> short_v{1, 2};
  try {
    k::cosine(a, short_v);
    FAIL();
  } catch (const stella::Error& e) {
    EXPECT_EQ(e.kind(), stella::ErrorKind::dimension_mismatch);
  }
}

TEST(VectorOps, NormalizeGivesUnitLength) {
  std::vector<double> v{3, 4};
  k::normalize(v);
  EXPECT_NEAR(v[0], 0.6, 1e-15);
  EXPECT_NEAR(v[1], 0.8, 1e-15);
  std::vector<double> z{0, 0};
  k::normalize(z);
  EXPECT_EQ(z[0], 0.0);
}

TEST(VectorOps, UnsupportedIsaRejected) {
  for (auto isa : {k::Isa::avx2, k::Isa::neon}) {
    if (k::isa_supported(isa)) continue;
    EXPECT_THROW(k::set_active_isa(isa), stella::Error);
  }
}
