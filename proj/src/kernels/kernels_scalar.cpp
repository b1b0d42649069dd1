#include "groupmatch/kernels.hpp"

namespace groupmatch::kernels::scalar {

MaskedSum masked_sum(const double* x, const std::uint8_t* mask, std::size_t n) noexcept {
  MaskedSum out;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = mask[i];
    out.count += m;
    out.sum += m * x[i];
  }
  return out;
}

double masked_sq_dev(const double* x, const std::uint8_t* mask, std::size_t n, double center) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (x[i] - center) * static_cast<double>(mask[i]);
    acc += d * d;
  }
  return acc;
}

double ad_inner_sum(const double* l, const double* b, const double* m, std::size_t n, double total,
                    double sample_size) noexcept {
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double diff = total * m[j] - sample_size * b[j];
    const double denom = b[j] * (total - b[j]) - total * l[j] * 0.25;
    acc += l[j] / total * diff * diff / denom;
  }
  return acc;
}

}  // namespace groupmatch::kernels::scalar
