#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "stella/error.hpp"
#include "stella/kernels/vector_ops.hpp"

namespace stella::kernels {

namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*squared_norm)(const double*, std::size_t);
  void (*dot_rows)(const double*, const double*, std::size_t, std::size_t, double*);
};

Table table_for(Isa isa) {
  switch (isa) {
#if defined(STELLA_HAVE_AVX2)
    case Isa::avx2: return {avx2::dot, avx2::squared_norm, avx2::dot_rows};
#endif
#if defined(STELLA_HAVE_NEON)
    case Isa::neon: return {neon::dot, neon::squared_norm, neon::dot_rows};
#endif
    default: return {scalar::dot, scalar::squared_norm, scalar::dot_rows};
  }
}

Isa best_isa() {
  if (std::getenv("STELLA_FORCE_SCALAR") != nullptr) return Isa::scalar;
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  if (isa_supported(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{best_isa()};
  return isa;
}

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorKind::dimension_mismatch,
                "vector dimensions differ: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(STELLA_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(STELLA_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return active().load(); }

void set_active_isa(Isa isa) {
  require(isa_supported(isa), "ISA not supported here: " + std::string(to_string(isa)));
  active().store(isa);
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size());
  return table_for(active_isa()).dot(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const double> a) {
  return table_for(active_isa()).squared_norm(a.data(), a.size());
}

void dot_rows(std::span<const double> query, std::span<const double> rows,
              std::span<double> out) {
  const auto dim = query.size();
  require(dim > 0, "dot_rows: empty query vector");
  if (rows.size() % dim != 0) {
    throw Error(ErrorKind::dimension_mismatch, "row buffer is not a multiple of the query dimension");
  }
  const auto n_rows = rows.size() / dim;
  require(out.size() == n_rows, "dot_rows: output size does not match row count");
  table_for(active_isa()).dot_rows(query.data(), rows.data(), n_rows, dim, out.data());
}

double cosine(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size());
  const auto& t = table_for(active_isa());
  const double na = t.squared_norm(a.data(), a.size());
  const double nb = t.squared_norm(b.data(), b.size());
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  const double c = t.dot(a.data(), b.data(), a.size()) / std::sqrt(na * nb);
  return std::clamp(c, -1.0, 1.0);
}

void normalize(std::span<double> v) {
  const double n2 = squared_norm(v);
  if (n2 <= 0.0) return;
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
}

}  // namespace stella::kernels
