#include <cstdlib>
#include <string_view>

#include "groupmatch/kernels.hpp"

namespace groupmatch::kernels {
namespace {

struct Table {
  Isa isa;
  MaskedSum (*masked_sum)(const double*, const std::uint8_t*, std::size_t) noexcept;
  double (*masked_sq_dev)(const double*, const std::uint8_t*, std::size_t, double) noexcept;
  double (*ad_inner_sum)(const double*, const double*, const double*, std::size_t, double, double) noexcept;
};

constexpr Table kScalar{Isa::scalar, &scalar::masked_sum, &scalar::masked_sq_dev, &scalar::ad_inner_sum};
#if defined(GROUPMATCH_HAVE_AVX2)
constexpr Table kAvx2{Isa::avx2, &avx2::masked_sum, &avx2::masked_sq_dev, &avx2::ad_inner_sum};
#endif

const Table& select() {
  const char* env = std::getenv("GROUPMATCH_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return kScalar;
#if defined(GROUPMATCH_HAVE_AVX2)
  if (isa_supported(Isa::avx2)) return kAvx2;
#endif
  return kScalar;
}

const Table& table() {
  static const Table& t = select();
  return t;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(GROUPMATCH_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return table().isa; }

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

MaskedSum masked_sum(std::span<const double> x, std::span<const std::uint8_t> mask) {
  return table().masked_sum(x.data(), mask.data(), x.size());
}

double masked_sq_dev(std::span<const double> x, std::span<const std::uint8_t> mask, double center) {
  return table().masked_sq_dev(x.data(), mask.data(), x.size(), center);
}

double ad_inner_sum(std::span<const double> l, std::span<const double> b, std::span<const double> m,
                    double total, double sample_size) {
  return table().ad_inner_sum(l.data(), b.data(), m.data(), l.size(), total, sample_size);
}

}  // namespace groupmatch::kernels
