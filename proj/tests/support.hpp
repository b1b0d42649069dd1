#pragma once

#include <random>
#include <string>
#include <vector>

#include "groupmatch/dataset.hpp"

namespace groupmatch::testing {

/// Two-column helper: one covariate per entry of `columns`, ids "s0", "s1", ...
inline Dataset make_dataset(const std::vector<std::string>& groups, std::vector<std::vector<double>> columns) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < groups.size(); ++i) ids.push_back("s" + std::to_string(i));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < columns.size(); ++k) names.push_back("x" + std::to_string(k + 1));
  return Dataset::from_columns(std::move(ids), groups, std::move(names), std::move(columns));
}

/// Two groups of normal draws; group B shifted by `shift`.
inline Dataset random_two_group(std::size_t n_a, std::size_t n_b, std::size_t covariates, double shift,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::string> groups;
  for (std::size_t i = 0; i < n_a; ++i) groups.push_back("A");
  for (std::size_t i = 0; i < n_b; ++i) groups.push_back("B");
  std::vector<std::vector<double>> cols(covariates);
  for (auto& c : cols)
    for (std::size_t i = 0; i < n_a + n_b; ++i) c.push_back(z(rng) + (i >= n_a ? shift : 0.0));
  return make_dataset(groups, std::move(cols));
}

inline SubsetState state_from_mask(const Dataset& d, const std::vector<bool>& keep) {
  SubsetState s(d);
  for (std::size_t row = 0; row < d.size(); ++row)
    if (!keep[row]) s.remove(d, row);
  return s;
}

}  // namespace groupmatch::testing

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <optional>

namespace groupmatch::testing {

/// Welch p from first principles, kept separate from the library code.
inline std::optional<double> oracle_welch_p(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2 || y.size() < 2) return std::nullopt;
  auto mean_var = [](const std::vector<double>& v) {
    double m = 0;
    for (double a : v) m += a;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double a : v) s += (a - m) * (a - m);
    return std::pair{m, s / static_cast<double>(v.size() - 1)};
  };
  const auto [mx, vx] = mean_var(x);
  const auto [my, vy] = mean_var(y);
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  const double se2 = vx / nx + vy / ny;
  if (se2 <= 0) return std::nullopt;
  const double t = (mx - my) / std::sqrt(se2);
  const double df = se2 * se2 / (vx * vx / (nx * nx * (nx - 1)) + vy * vy / (ny * ny * (ny - 1)));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

/// Largest subset (by kept count) whose Welch p / alpha >= 1 on every
/// covariate between two groups, each group keeping at least `min_size`.
/// Returns the kept count, or nullopt if no subset qualifies.
inline std::optional<std::size_t> brute_force_best(const Dataset& d, double alpha, std::size_t min_size = 2) {
  const std::size_t n = d.size();
  std::optional<std::size_t> best;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const auto kept = static_cast<std::size_t>(__builtin_popcount(mask));
    if (best && kept <= *best) continue;
    bool ok = true;
    for (std::size_t k = 0; ok && k < d.num_covariates(); ++k) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1u) (d.group_of(i) == 0 ? a : b).push_back(d.value(i, k));
      if (a.size() < min_size || b.size() < min_size) ok = false;
      const auto p = ok ? oracle_welch_p(a, b) : std::nullopt;
      ok = p && *p / alpha >= 1.0;
    }
    if (ok) best = kept;
  }
  return best;
}

/// Two groups of six, two covariates, Welch at 0.2 on each. No single removal
/// succeeds; the best pair does, and greedy needs three removals.
inline Dataset trap_instance() {
  const double x[12][2] = {{2.5, 1.6},  {-2.5, 1.3}, {-1.6, -0.0}, {-0.0, 0.4}, {0.4, 0.4},   {-2.4, 0.7},
                           {1.1, -0.4}, {-0.7, 0.6}, {-2.9, -0.6}, {0.1, 0.7},  {-0.4, 0.1}, {-0.4, -0.6}};
  std::vector<std::string> groups;
  std::vector<std::vector<double>> cols(2);
  for (int i = 0; i < 12; ++i) {
    groups.push_back(i < 6 ? "A" : "B");
    cols[0].push_back(x[i][0]);
    cols[1].push_back(x[i][1]);
  }
  return make_dataset(groups, std::move(cols));
}

}  // namespace groupmatch::testing
