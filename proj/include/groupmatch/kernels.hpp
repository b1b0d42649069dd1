#pragma once
// Data-parallel inner loops used by the criterion evaluator.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The variant is chosen once per process from CPUID; setting the
// environment variable GROUPMATCH_SIMD=scalar forces the reference path.
// Variants agree to rounding (summation order differs), not bit-for-bit, so a
// given process always uses a single variant.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace groupmatch::kernels {

struct MaskedSum {
  double count = 0.0;
  double sum = 0.0;
};

enum class Isa { scalar, avx2 };

Isa active_isa();
std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);

/// Count and sum of x[i] over rows with mask[i] == 1 (mask entries are 0/1).
MaskedSum masked_sum(std::span<const double> x, std::span<const std::uint8_t> mask);

/// Sum of (x[i] - center)^2 over rows with mask[i] == 1.
double masked_sq_dev(std::span<const double> x, std::span<const std::uint8_t> mask, double center);

/// Inner Anderson-Darling k-sample sum for one sample over the distinct pooled
/// values j:  sum_j l[j]/N * (N*m[j] - n*b[j])^2 / (b[j]*(N - b[j]) - N*l[j]/4)
/// where l are tie counts, b pooled midrank positions and m the sample's
/// midrank counts.
double ad_inner_sum(std::span<const double> l, std::span<const double> b, std::span<const double> m,
                    double total, double sample_size);

// Raw variants, exposed for equivalence testing.
namespace scalar {
MaskedSum masked_sum(const double* x, const std::uint8_t* mask, std::size_t n) noexcept;
double masked_sq_dev(const double* x, const std::uint8_t* mask, std::size_t n, double center) noexcept;
double ad_inner_sum(const double* l, const double* b, const double* m, std::size_t n, double total,
                    double sample_size) noexcept;
}  // namespace scalar

#if defined(GROUPMATCH_HAVE_AVX2)
namespace avx2 {
MaskedSum masked_sum(const double* x, const std::uint8_t* mask, std::size_t n) noexcept;
double masked_sq_dev(const double* x, const std::uint8_t* mask, std::size_t n, double center) noexcept;
double ad_inner_sum(const double* l, const double* b, const double* m, std::size_t n, double total,
                    double sample_size) noexcept;
}  // namespace avx2
#endif

}  // namespace groupmatch::kernels
