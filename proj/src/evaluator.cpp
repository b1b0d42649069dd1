#include "groupmatch/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "groupmatch/kernels.hpp"

namespace groupmatch {
namespace {

// Welch moments live on standardized columns, so these are in units of the
// full-sample standard deviation.
constexpr double kZeroVariance = 1e-12;
constexpr double kMeanTolerance = 1e-9;

std::atomic<std::uint64_t> next_baseline_id{1};

void downdate(detail::Moments& m, double x) {
  const double n1 = m.n - 1.0;
  if (n1 <= 0.0) {
    m = detail::Moments{};
    return;
  }
  const double delta = x - m.mean;
  const double mean1 = m.mean - delta / n1;
  m.m2 = std::max(0.0, m.m2 - delta * (x - mean1));
  m.mean = mean1;
  m.n = n1;
}

}  // namespace

Evaluator::Evaluator(const Dataset& d, const CriteriaSet& criteria, const TestRegistry& registry) : data_(&d) {
  const std::size_t n = d.size();
  const std::size_t num_groups = d.num_groups();

  for (const auto& spec : criteria.criteria) {
    Compiled c;
    auto handle = registry.find(spec.test);
    if (!handle) throw ConfigError(fmt::format("{}: unknown test '{}'", spec.describe(), spec.test));
    c.fn = registry.get(*handle);
    auto k = d.find_covariate(spec.covariate);
    if (!k) throw ConfigError(fmt::format("{}: unknown covariate '{}'", spec.describe(), spec.covariate));
    c.covariate = *k;
    if (spec.groups.empty()) {
      for (GroupId g = 0; g < num_groups; ++g) c.groups.push_back(g);
    } else {
      for (const auto& label : spec.groups) {
        auto g = d.find_group(label);
        if (!g) throw ConfigError(fmt::format("{}: unknown group '{}'", spec.describe(), label));
        c.groups.push_back(*g);
      }
      std::sort(c.groups.begin(), c.groups.end());
      c.groups.erase(std::unique(c.groups.begin(), c.groups.end()), c.groups.end());
    }
    if (c.groups.size() < 2) throw ConfigError(fmt::format("{}: needs at least 2 groups", spec.describe()));
    if (c.fn.arity == Arity::two_sample && c.groups.size() != 2)
      throw ConfigError(fmt::format("{}: two-sample test needs exactly 2 groups", spec.describe()));
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0))
      throw ConfigError(fmt::format("{}: alpha {} must lie in (0, 1)", spec.describe(), spec.alpha));
    c.sample_of_group.assign(num_groups, -1);
    for (std::size_t i = 0; i < c.groups.size(); ++i) c.sample_of_group[c.groups[i]] = static_cast<int>(i);
    c.alpha = spec.alpha;
    c.label = spec.describe();
    if (c.fn.builtin == BuiltinTest::welch_t) {
      for (GroupId g : c.groups) {
        auto key = std::make_pair(c.covariate, g);
        auto it = std::find(slots_.begin(), slots_.end(), key);
        c.slots.push_back(static_cast<std::size_t>(it - slots_.begin()));
        if (it == slots_.end()) slots_.push_back(key);
      }
    }
    criteria_.push_back(std::move(c));
  }

  standardized_.resize(d.num_covariates());
  for (std::size_t k = 0; k < d.num_covariates(); ++k) {
    auto col = d.covariate(k);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    auto& z = standardized_[k];
    z.resize(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = sd > 0.0 ? (col[i] - mean) / sd : col[i] - mean;
  }

  group_offset_.assign(num_groups + 1, 0);
  for (GroupId g = 0; g < num_groups; ++g) {
    auto rows = d.members(g);
    group_order_.insert(group_order_.end(), rows.begin(), rows.end());
    group_offset_[g + 1] = group_order_.size();
  }
  grouped_values_.resize(d.num_covariates());
  for (std::size_t k = 0; k < d.num_covariates(); ++k) {
    grouped_values_[k].resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) grouped_values_[k][pos] = standardized_[k][group_order_[pos]];
  }

  sorted_rows_.resize(d.num_covariates());
  run_starts_.resize(d.num_covariates());
  for (std::size_t k = 0; k < d.num_covariates(); ++k) {
    auto col = d.covariate(k);
    auto& order = sorted_rows_[k];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    auto& starts = run_starts_[k];
    for (std::size_t i = 0; i < n; ++i)
      if (i == 0 || col[order[i]] != col[order[i - 1]]) starts.push_back(static_cast<std::uint32_t>(i));
    starts.push_back(static_cast<std::uint32_t>(n));
  }
}

Evaluator::Baseline Evaluator::prepare(const SubsetState& s) const {
  Baseline base;
  base.id = next_baseline_id.fetch_add(1, std::memory_order_relaxed);
  base.keep.assign(s.mask().begin(), s.mask().end());
  if (slots_.empty()) return base;

  std::vector<std::uint8_t> grouped_mask(group_order_.size());
  for (std::size_t pos = 0; pos < group_order_.size(); ++pos) grouped_mask[pos] = base.keep[group_order_[pos]];
  base.moments.reserve(slots_.size());
  for (const auto& [k, g] : slots_) {
    const std::size_t lo = group_offset_[g];
    const std::size_t len = group_offset_[g + 1] - lo;
    std::span<const double> x(grouped_values_[k].data() + lo, len);
    std::span<const std::uint8_t> m(grouped_mask.data() + lo, len);
    auto sum = kernels::masked_sum(x, m);
    detail::Moments mo;
    mo.n = sum.count;
    if (sum.count > 0.0) {
      mo.mean = sum.sum / sum.count;
      mo.m2 = kernels::masked_sq_dev(x, m, mo.mean);
    }
    base.moments.push_back(mo);
  }
  return base;
}

void Evaluator::sync(const Baseline& base, Workspace& ws) const {
  if (ws.baseline_id == base.id) return;
  ws.keep = base.keep;
  ws.baseline_id = base.id;
}

std::optional<TestOutcome> Evaluator::outcome(const Compiled& c, const Baseline& base,
                                              std::span<const std::size_t> removed, Workspace& ws) const {
  const Dataset& d = *data_;
  const std::size_t k = c.groups.size();

  if (c.fn.builtin == BuiltinTest::welch_t) {
    detail::Moments m[2] = {base.moments[c.slots[0]], base.moments[c.slots[1]]};
    for (std::size_t row : removed) {
      const int sample = c.sample_of_group[d.group_of(row)];
      if (sample >= 0) downdate(m[sample], standardized_[c.covariate][row]);
    }
    auto w = detail::welch_from_moments(m[0], m[1], kZeroVariance, kMeanTolerance);
    if (!w) return std::nullopt;
    return TestOutcome{w->p, false};
  }

  if (c.fn.builtin == BuiltinTest::anderson_darling) {
    const auto& order = sorted_rows_[c.covariate];
    const auto& starts = run_starts_[c.covariate];
    ws.counts.assign(k, 0.0);  // sample sizes
    ws.run_counts.clear();     // run-major k counts per distinct kept value
    ws.ad.tie_counts.clear();
    std::vector<double>& sizes = ws.counts;
    for (std::size_t r = 0; r + 1 < starts.size(); ++r) {
      const std::size_t base_pos = ws.run_counts.size();
      double total = 0.0;
      for (std::uint32_t i = starts[r]; i < starts[r + 1]; ++i) {
        const std::uint32_t row = order[i];
        if (!ws.keep[row]) continue;
        const int sample = c.sample_of_group[d.group_of(row)];
        if (sample < 0) continue;
        if (total == 0.0) ws.run_counts.resize(base_pos + k, 0.0);
        ws.run_counts[base_pos + static_cast<std::size_t>(sample)] += 1.0;
        total += 1.0;
      }
      if (total > 0.0) ws.ad.tie_counts.push_back(total);
    }
    const std::size_t runs = ws.ad.tie_counts.size();
    ws.ad.sample_counts.resize(k * runs);
    for (std::size_t j = 0; j < runs; ++j)
      for (std::size_t i = 0; i < k; ++i) {
        const double v = ws.run_counts[j * k + i];
        ws.ad.sample_counts[i * runs + j] = v;
        sizes[i] += v;
      }
    auto ad = detail::anderson_darling_from_runs(ws.ad, sizes);
    if (!ad) return std::nullopt;
    return ad->outcome;
  }

  ws.samples.resize(k);
  for (auto& v : ws.samples) v.clear();
  auto col = d.covariate(c.covariate);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t row : d.members(c.groups[i]))
      if (ws.keep[row]) ws.samples[i].push_back(col[row]);
  std::vector<std::span<const double>> spans(ws.samples.begin(), ws.samples.end());
  std::optional<TestOutcome> out;
  try {
    out = c.fn.evaluate(SampleList(spans));
  } catch (const UndefinedTest&) {
    return std::nullopt;
  }
  if (!out || std::isnan(out->p)) return std::nullopt;
  out->p = std::clamp(out->p, 0.0, 1.0);
  return out;
}

std::optional<double> Evaluator::r_without(const Baseline& base, std::span<const std::size_t> removed,
                                           Workspace& ws) const {
  sync(base, ws);
  for (std::size_t row : removed) ws.keep[row] = 0;
  std::optional<double> r = std::numeric_limits<double>::infinity();
  for (const auto& c : criteria_) {
    auto o = outcome(c, base, removed, ws);
    if (!o) {
      r.reset();
      break;
    }
    *r = std::min(*r, o->p / c.alpha);
  }
  for (std::size_t row : removed) ws.keep[row] = 1;
  return r;
}

std::optional<Evaluation> Evaluator::evaluate(const SubsetState& s) const {
  const Baseline base = prepare(s);
  Workspace ws;
  sync(base, ws);
  Evaluation ev;
  ev.r = std::numeric_limits<double>::infinity();
  for (const auto& c : criteria_) {
    auto o = outcome(c, base, {}, ws);
    if (!o) return std::nullopt;
    ev.p_values.push_back(o->p);
    ev.extrapolated.push_back(o->extrapolated);
    ev.r = std::min(ev.r, o->p / c.alpha);
  }
  return ev;
}

std::optional<double> Evaluator::compute_r(const SubsetState& s) const {
  auto ev = evaluate(s);
  if (!ev) return std::nullopt;
  return ev->r;
}

std::optional<double> compute_r(const Dataset& d, const SubsetState& s, const CriteriaSet& c,
                                const TestRegistry& registry) {
  return Evaluator(d, c, registry).compute_r(s);
}

}  // namespace groupmatch
