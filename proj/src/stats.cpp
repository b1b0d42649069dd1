#include "groupmatch/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <utility>

#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include "groupmatch/kernels.hpp"

namespace groupmatch {
namespace {

detail::Moments moments_of(std::span<const double> x) {
  detail::Moments m;
  m.n = static_cast<double>(x.size());
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / m.n;
  auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) {
    m.mean = *lo;
    return m;
  }
  for (double v : x) m.m2 += (v - m.mean) * (v - m.mean);
  return m;
}

std::optional<WelchResult> try_welch(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2 || y.size() < 2) return std::nullopt;
  return detail::welch_from_moments(moments_of(x), moments_of(y), 0.0, 0.0);
}

std::optional<AndersonDarlingResult> try_anderson_darling(SampleList samples, detail::AdScratch& scratch) {
  const std::size_t k = samples.size();
  if (k < 2) return std::nullopt;
  std::vector<std::pair<double, std::size_t>> pooled;
  std::vector<double> sizes(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (samples[i].size() < 2) return std::nullopt;
    sizes[i] = static_cast<double>(samples[i].size());
    for (double v : samples[i]) pooled.emplace_back(v, i);
  }
  std::sort(pooled.begin(), pooled.end());

  scratch.tie_counts.clear();
  scratch.sample_counts.clear();
  std::vector<double> run(k, 0.0);
  std::vector<std::vector<double>> per_sample(k);
  for (std::size_t a = 0; a < pooled.size();) {
    std::size_t b = a;
    std::fill(run.begin(), run.end(), 0.0);
    while (b < pooled.size() && pooled[b].first == pooled[a].first) {
      run[pooled[b].second] += 1.0;
      ++b;
    }
    scratch.tie_counts.push_back(static_cast<double>(b - a));
    for (std::size_t i = 0; i < k; ++i) per_sample[i].push_back(run[i]);
    a = b;
  }
  for (auto& row : per_sample) scratch.sample_counts.insert(scratch.sample_counts.end(), row.begin(), row.end());
  return detail::anderson_darling_from_runs(scratch, sizes);
}

// Scholz & Stephens (1987) interpolation coefficients for the critical values
// at the significance levels below.
constexpr std::array<double, 7> kSig{0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001};
constexpr std::array<double, 7> kB0{0.675, 1.281, 1.645, 1.96, 2.326, 2.573, 3.085};
constexpr std::array<double, 7> kB1{-0.245, 0.25, 0.678, 1.149, 1.822, 2.364, 3.615};
constexpr std::array<double, 7> kB2{-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154};

struct LogSigFit {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;  // log(sig) ~ c0 + c1 x + c2 x^2
  double lo = 0.0, hi = 0.0;            // tabulated critical-value range
};

LogSigFit fit_for(std::size_t m) {
  std::array<double, 7> crit{};
  const double md = static_cast<double>(m);
  for (std::size_t i = 0; i < crit.size(); ++i) crit[i] = kB0[i] + kB1[i] / std::sqrt(md) + kB2[i] / md;

  // normal equations for the least-squares quadratic
  std::array<double, 5> s{};
  std::array<double, 3> r{};
  for (std::size_t i = 0; i < crit.size(); ++i) {
    double p = 1.0;
    const double y = std::log(kSig[i]);
    for (std::size_t e = 0; e < 5; ++e) {
      s[e] += p;
      if (e < 3) r[e] += p * y;
      p *= crit[i];
    }
  }
  std::array<std::array<double, 4>, 3> a{{{s[0], s[1], s[2], r[0]}, {s[1], s[2], s[3], r[1]}, {s[2], s[3], s[4], r[2]}}};
  for (std::size_t col = 0; col < 3; ++col) {
    std::size_t piv = col;
    for (std::size_t row = col + 1; row < 3; ++row)
      if (std::abs(a[row][col]) > std::abs(a[piv][col])) piv = row;
    std::swap(a[col], a[piv]);
    for (std::size_t row = 0; row < 3; ++row) {
      if (row == col) continue;
      const double f = a[row][col] / a[col][col];
      for (std::size_t c = col; c < 4; ++c) a[row][c] -= f * a[col][c];
    }
  }
  LogSigFit fit;
  fit.c0 = a[0][3] / a[0][0];
  fit.c1 = a[1][3] / a[1][1];
  fit.c2 = a[2][3] / a[2][2];
  fit.lo = *std::min_element(crit.begin(), crit.end());
  fit.hi = *std::max_element(crit.begin(), crit.end());
  return fit;
}

const LogSigFit& cached_fit(std::size_t m) {
  static const std::vector<LogSigFit> table = [] {
    std::vector<LogSigFit> t(65);
    for (std::size_t i = 1; i < t.size(); ++i) t[i] = fit_for(i);
    return t;
  }();
  if (m < table.size()) return table[m];
  thread_local LogSigFit extra;
  extra = fit_for(m);
  return extra;
}

}  // namespace

namespace detail {

std::optional<WelchResult> welch_from_moments(const Moments& x, const Moments& y, double zero_variance,
                                              double mean_tolerance) {
  if (x.n < 2.0 || y.n < 2.0) return std::nullopt;
  double vx = x.m2 / (x.n - 1.0);
  double vy = y.m2 / (y.n - 1.0);
  if (vx <= zero_variance) vx = 0.0;
  if (vy <= zero_variance) vy = 0.0;
  if (vx == 0.0 && vy == 0.0) {
    if (std::abs(x.mean - y.mean) <= mean_tolerance) return WelchResult{0.0, x.n + y.n - 2.0, 1.0};
    return std::nullopt;
  }
  const double sx = vx / x.n;
  const double sy = vy / y.n;
  const double se2 = sx + sy;
  WelchResult out;
  out.t = (x.mean - y.mean) / std::sqrt(se2);
  out.df = se2 * se2 / (sx * sx / (x.n - 1.0) + sy * sy / (y.n - 1.0));
  const double t2 = out.t * out.t;
  if (t2 == 0.0) {
    out.p = 1.0;
  } else {
    // P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2); use the complement form when
    // that argument is close to 1.
    const double z = out.df / (out.df + t2);
    if (z < 0.5)
      out.p = boost::math::ibeta(out.df / 2.0, 0.5, z);
    else
      out.p = boost::math::ibetac(0.5, out.df / 2.0, t2 / (out.df + t2));
  }
  out.p = std::clamp(out.p, 0.0, 1.0);
  return out;
}

std::optional<AndersonDarlingResult> anderson_darling_from_runs(AdScratch& scratch,
                                                                std::span<const double> sizes) {
  const std::size_t k = sizes.size();
  const std::size_t runs = scratch.tie_counts.size();
  if (k < 2 || runs < 2) return std::nullopt;
  for (double n : sizes)
    if (n < 2.0) return std::nullopt;

  const auto& l = scratch.tie_counts;
  scratch.midranks.resize(runs);
  double total = 0.0;
  for (std::size_t j = 0; j < runs; ++j) {
    scratch.midranks[j] = total + 0.5 * l[j];
    total += l[j];
  }
  double a2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    std::span<double> m(scratch.sample_counts.data() + i * runs, runs);
    double cum = 0.0;
    for (double& f : m) {
      const double count = f;
      f = cum + 0.5 * count;
      cum += count;
    }
    a2 += kernels::ad_inner_sum(l, scratch.midranks, m, total, sizes[i]) / sizes[i];
  }
  a2 *= (total - 1.0) / total;

  const auto n = static_cast<std::size_t>(total);
  const double kd = static_cast<double>(k);
  double big_h = 0.0;
  for (double s : sizes) big_h += 1.0 / s;
  // h = sum_{i<N} 1/i ; g = sum_{i<=N-2} sum_{j=i+1}^{N-1} 1/((N-i) j)
  double tail = 0.0;
  double g = 0.0;
  for (std::size_t t = 0; t + 2 < n; ++t) {
    tail += 1.0 / static_cast<double>(n - 1 - t);
    g += tail / static_cast<double>(t + 2);
  }
  const double h = tail + 1.0;
  const double nd = total;
  const double a = (4 * g - 6) * (kd - 1) + (10 - 6 * g) * big_h;
  const double b = (2 * g - 4) * kd * kd + 8 * h * kd + (2 * g - 14 * h - 4) * big_h - 8 * h + 4 * g - 6;
  const double c = (6 * h + 2 * g - 2) * kd * kd + (4 * h - 4 * g + 6) * kd + (2 * h - 6) * big_h + 4 * h;
  const double d = (2 * h + 6) * kd * kd - 4 * h * kd;
  const double sigmasq = (a * nd * nd * nd + b * nd * nd + c * nd + d) / ((nd - 1.0) * (nd - 2.0) * (nd - 3.0));
  if (!(sigmasq > 0.0)) return std::nullopt;

  AndersonDarlingResult out;
  out.statistic = a2;
  out.standardized = (a2 - (kd - 1.0)) / std::sqrt(sigmasq);
  out.outcome = anderson_darling_pvalue(out.standardized, k);
  return out;
}

TestOutcome anderson_darling_pvalue(double standardized, std::size_t k) {
  const LogSigFit& fit = cached_fit(k - 1);
  double x = standardized;
  // Hold the fitted curve at its turning point so p never increases with the
  // statistic when extrapolating far outside the table.
  if (fit.c2 != 0.0) {
    const double vertex = -fit.c1 / (2.0 * fit.c2);
    if (fit.c2 > 0.0 && x > vertex) x = vertex;
    if (fit.c2 < 0.0 && x < vertex) x = vertex;
  }
  TestOutcome out;
  const double p = std::exp(fit.c0 + fit.c1 * x + fit.c2 * x * x);
  out.p = std::clamp(p, 1e-12, 1.0);
  out.extrapolated = standardized < fit.lo || standardized > fit.hi;
  return out;
}

}  // namespace detail

WelchResult welch_t_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2 || y.size() < 2)
    throw UndefinedTest(fmt::format("welch t-test needs at least 2 values per sample (got {} and {})", x.size(),
                                    y.size()));
  auto r = try_welch(x, y);
  if (!r) throw UndefinedTest("welch t-test undefined: both samples are constant with different values");
  return *r;
}

double welch_t_p(std::span<const double> x, std::span<const double> y) { return welch_t_test(x, y).p; }

AndersonDarlingResult anderson_darling_test(SampleList samples) {
  if (samples.size() < 2) throw UndefinedTest("anderson-darling test needs at least 2 samples");
  for (const auto& s : samples)
    if (s.size() < 2) throw UndefinedTest("anderson-darling test needs at least 2 values per sample");
  detail::AdScratch scratch;
  auto r = try_anderson_darling(samples, scratch);
  if (!r) throw UndefinedTest("anderson-darling test undefined: all pooled values are identical");
  return *r;
}

double anderson_darling_p(SampleList samples) { return anderson_darling_test(samples).outcome.p; }

double anderson_darling_p(std::span<const double> x, std::span<const double> y) {
  const std::array<std::span<const double>, 2> samples{x, y};
  return anderson_darling_p(samples);
}

TestFunction welch_test_function() {
  TestFunction fn;
  fn.name = "welch_t";
  fn.arity = Arity::two_sample;
  fn.builtin = BuiltinTest::welch_t;
  fn.evaluate = [](SampleList s) -> std::optional<TestOutcome> {
    if (s.size() != 2) return std::nullopt;
    auto r = try_welch(s[0], s[1]);
    if (!r) return std::nullopt;
    return TestOutcome{r->p, false};
  };
  return fn;
}

TestFunction anderson_darling_test_function() {
  TestFunction fn;
  fn.name = "anderson_darling";
  fn.arity = Arity::k_sample;
  fn.builtin = BuiltinTest::anderson_darling;
  fn.evaluate = [](SampleList s) -> std::optional<TestOutcome> {
    detail::AdScratch scratch;
    auto r = try_anderson_darling(s, scratch);
    if (!r) return std::nullopt;
    return r->outcome;
  };
  return fn;
}

TestRegistry TestRegistry::with_builtins() {
  TestRegistry reg;
  reg.register_test(welch_test_function());
  reg.register_test(anderson_darling_test_function());
  return reg;
}

TestHandle TestRegistry::register_test(TestFunction fn) {
  if (fn.name.empty()) throw RegistryError("test name must not be empty");
  if (!fn.evaluate) throw RegistryError(fmt::format("test '{}' has no evaluate function", fn.name));
  if (find(fn.name)) throw RegistryError(fmt::format("test '{}' is already registered", fn.name));
  tests_.push_back(std::move(fn));
  return TestHandle{tests_.size() - 1};
}

std::optional<TestHandle> TestRegistry::find(std::string_view name) const {
  for (std::size_t i = 0; i < tests_.size(); ++i)
    if (tests_[i].name == name) return TestHandle{i};
  return std::nullopt;
}

TestHandle TestRegistry::resolve(std::string_view name) const {
  auto h = find(name);
  if (!h) throw RegistryError(fmt::format("unknown test '{}'", name));
  return *h;
}

std::vector<std::string> TestRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& t : tests_) out.push_back(t.name);
  return out;
}

}  // namespace groupmatch
