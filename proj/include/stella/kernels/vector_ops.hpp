#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense vector kernels behind cosine distance, dense retrieval and the
// back-translation audit. Every variant computes the same quantities; the
// scalar one is the reference the SIMD paths are tested against.
namespace stella::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa);

// True when the variant is compiled in and the running CPU supports it.
bool isa_supported(Isa isa);

// Variant used by the dispatched entry points. Defaults to the best
// supported ISA unless STELLA_FORCE_SCALAR is set in the environment.
Isa active_isa();

// Throws Error(precondition) when the ISA is not supported.
void set_active_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);

// out[r] = dot(query, rows[r*dim, (r+1)*dim)) with dim = query.size().
void dot_rows(std::span<const double> query, std::span<const double> rows,
              std::span<double> out);

// Cosine similarity clamped to [-1, 1]; 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

// Scales to unit L2 norm in place; zero vectors are left unchanged.
void normalize(std::span<double> v);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_norm(const double* a, std::size_t n);
void dot_rows(const double* query, const double* rows, std::size_t n_rows, std::size_t dim,
              double* out);
}  // namespace scalar

#if defined(STELLA_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_norm(const double* a, std::size_t n);
void dot_rows(const double* query, const double* rows, std::size_t n_rows, std::size_t dim,
              double* out);
}  // namespace avx2
#endif

#if defined(STELLA_HAVE_NEON)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
double squared_norm(const double* a, std::size_t n);
void dot_rows(const double* query, const double* rows, std::size_t n_rows, std::size_t dim,
              double* out);
}  // namespace neon
#endif

}  // namespace stella::kernels
