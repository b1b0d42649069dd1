#include "groupmatch/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace groupmatch {

std::string CriterionSpec::describe() const {
  if (groups.empty()) return fmt::format("{} on {} across all groups", test, covariate);
  return fmt::format("{} on {} for {}", test, covariate, fmt::join(groups, "/"));
}

void validate(const Dataset& d, const MatchConfig& cfg, const TestRegistry& registry) {
  const auto& list = cfg.criteria.criteria;
  if (list.empty()) throw ConfigError("at least one criterion is required");

  std::set<std::tuple<std::string, std::string, std::vector<std::string>>> seen;
  for (std::size_t j = 0; j < list.size(); ++j) {
    const auto& c = list[j];
    auto where = [&] { return fmt::format("criterion {} ({})", j + 1, c.describe()); };
    if (!(c.alpha > 0.0 && c.alpha < 1.0))
      throw ConfigError(fmt::format("{}: alpha {} must lie in (0, 1)", where(), c.alpha));
    auto handle = registry.find(c.test);
    if (!handle) throw ConfigError(fmt::format("{}: unknown test '{}'", where(), c.test));
    if (!d.find_covariate(c.covariate))
      throw ConfigError(fmt::format("{}: unknown covariate '{}'", where(), c.covariate));
    std::vector<std::string> groups = c.groups;
    if (groups.empty()) groups.assign(d.group_labels().begin(), d.group_labels().end());
    for (const auto& g : groups)
      if (!d.find_group(g)) throw ConfigError(fmt::format("{}: unknown group '{}'", where(), g));
    std::sort(groups.begin(), groups.end());
    if (std::adjacent_find(groups.begin(), groups.end()) != groups.end())
      throw ConfigError(fmt::format("{}: a group is listed twice", where()));
    if (groups.size() < 2) throw ConfigError(fmt::format("{}: needs at least 2 groups", where()));
    if (registry.get(*handle).arity == Arity::two_sample && groups.size() != 2)
      throw ConfigError(fmt::format("{}: '{}' is a two-sample test but {} groups were given", where(), c.test,
                                    groups.size()));
    if (!seen.emplace(c.test, c.covariate, groups).second)
      throw ConfigError(fmt::format("{}: duplicate criterion", where()));
  }

  if (const auto* p = std::get_if<ProportionsBalance>(&cfg.balance); p && !p->target.empty()) {
    double sum = 0.0;
    for (const auto& [label, w] : p->target) {
      if (!d.find_group(label)) throw ConfigError(fmt::format("balance target: unknown group '{}'", label));
      if (!(w > 0.0)) throw ConfigError(fmt::format("balance target for '{}' must be positive", label));
      sum += w;
    }
    if (p->target.size() != d.num_groups())
      throw ConfigError("balance target must give a proportion for every group");
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(fmt::format("balance target sums to {}, not 1", sum));
  }
  if (const auto* p = std::get_if<PrecedenceBalance>(&cfg.balance)) {
    std::set<std::string> listed;
    for (const auto& label : p->order) {
      if (!d.find_group(label)) throw ConfigError(fmt::format("precedence: unknown group '{}'", label));
      if (!listed.insert(label).second) throw ConfigError(fmt::format("precedence: '{}' listed twice", label));
    }
  }

  const auto& sp = cfg.params;
  if (sp.iterations == 0) throw ConfigError("iterations must be at least 1");
  if (sp.lookahead == 0) throw ConfigError("lookahead must be at least 1");
  if (sp.rho == 0) throw ConfigError("rho must be at least 1");
  if (sp.pool_cap == 0) throw ConfigError("pool_cap must be at least 1");
  if (sp.timeout_seconds && !(*sp.timeout_seconds > 0.0)) throw ConfigError("timeout must be positive");

  FeasibilityRules rules(d, cfg.constraints);  // throws on bad constraints
  (void)rules;
}

bool r_ties(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= kRTieTolerance * std::max(std::abs(a), std::abs(b));
}

Ordering compare_balance(const SolutionRank& a, const SolutionRank& b) {
  if (a.kind == BalanceKind::divergence) {
    if (std::abs(a.divergence - b.divergence) <= kDivergenceTieTolerance) return Ordering::equivalent;
    return a.divergence < b.divergence ? Ordering::better : Ordering::worse;
  }
  for (std::size_t i = 0; i < std::min(a.removals.size(), b.removals.size()); ++i) {
    if (a.removals[i] != b.removals[i]) return a.removals[i] < b.removals[i] ? Ordering::better : Ordering::worse;
  }
  return Ordering::equivalent;
}

Ordering compare_solutions(const SolutionRank& a, const SolutionRank& b) {
  if (a.preserved != b.preserved) return a.preserved > b.preserved ? Ordering::better : Ordering::worse;
  if (auto o = compare_balance(a, b); o != Ordering::equivalent) return o;
  if (r_ties(a.r, b.r)) return Ordering::equivalent;
  return a.r > b.r ? Ordering::better : Ordering::worse;
}

double kl_divergence(std::span<const double> observed, std::span<const double> target) {
  if (observed.size() != target.size())
    throw std::invalid_argument(
        fmt::format("kl_divergence: length mismatch ({} vs {})", observed.size(), target.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(target[i] > 0.0)) throw std::invalid_argument("kl_divergence: target entries must be positive");
    if (observed[i] < 0.0) throw std::invalid_argument("kl_divergence: observed entries must be nonnegative");
    if (observed[i] > 0.0) acc += observed[i] * std::log(observed[i] / target[i]);
  }
  return std::max(acc, 0.0);
}

Ranker::Ranker(const Dataset& d, const BalanceMode& mode) : data_(&d), target_(d.num_groups()) {
  const double n = static_cast<double>(d.size());
  for (GroupId g = 0; g < d.num_groups(); ++g) target_[g] = static_cast<double>(d.group_size(g)) / n;

  if (const auto* p = std::get_if<ProportionsBalance>(&mode)) {
    kind_ = BalanceKind::divergence;
    if (!p->target.empty()) {
      for (const auto& [label, w] : p->target) {
        auto g = d.find_group(label);
        if (!g) throw ConfigError(fmt::format("balance target: unknown group '{}'", label));
        target_[*g] = w;
      }
    }
  } else {
    kind_ = BalanceKind::precedence;
    const auto& order = std::get<PrecedenceBalance>(mode).order;
    std::vector<std::uint8_t> listed(d.num_groups(), 0);
    for (const auto& label : order) {
      auto g = d.find_group(label);
      if (!g) throw ConfigError(fmt::format("precedence: unknown group '{}'", label));
      if (!listed[*g]) order_.push_back(*g);
      listed[*g] = 1;
    }
    for (GroupId g = 0; g < d.num_groups(); ++g)
      if (!listed[g]) order_.push_back(g);
  }
}

SolutionRank Ranker::rank(std::span<const std::size_t> group_counts, double r) const {
  SolutionRank out;
  out.kind = kind_;
  out.r = r;
  std::size_t kept = 0;
  for (auto c : group_counts) kept += c;
  out.preserved = kept;
  if (kind_ == BalanceKind::divergence) {
    const double total = static_cast<double>(kept);
    double acc = 0.0;
    for (std::size_t g = 0; g < group_counts.size(); ++g) {
      if (group_counts[g] == 0) continue;
      const double q = static_cast<double>(group_counts[g]) / total;
      acc += q * std::log(q / target_[g]);
    }
    out.divergence = std::max(acc, 0.0);
  } else {
    out.removals.reserve(order_.size());
    for (GroupId g : order_)
      out.removals.push_back(static_cast<std::uint32_t>(data_->group_size(g) - group_counts[g]));
  }
  return out;
}

}  // namespace groupmatch
