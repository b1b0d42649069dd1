#include "search/common.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

#include <boost/container/small_vector.hpp>

namespace groupmatch::search_detail {

std::size_t Rng::below(std::size_t n) {
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = engine_();
    if (x >= threshold) return static_cast<std::size_t>(x % bound);
  }
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t pick(Rng& rng, std::size_t n) { return n > 1 ? rng.below(n) : 0; }

Ordering step_order(const SolutionRank& a, const SolutionRank& b) {
  const bool sa = a.r >= 1.0;
  const bool sb = b.r >= 1.0;
  if (sa != sb) return sa ? Ordering::better : Ordering::worse;
  if (sa) return compare_solutions(a, b);
  if (!r_ties(a.r, b.r)) return a.r > b.r ? Ordering::better : Ordering::worse;
  if (a.preserved != b.preserved) return a.preserved > b.preserved ? Ordering::better : Ordering::worse;
  return compare_balance(a, b);
}

bool step_sorts_before(const SolutionRank& a, const SolutionRank& b) {
  const bool sa = a.r >= 1.0;
  const bool sb = b.r >= 1.0;
  if (sa != sb) return sa;
  auto balance_less = [](const SolutionRank& x, const SolutionRank& y) {
    if (x.kind == BalanceKind::divergence) return x.divergence < y.divergence;
    return std::lexicographical_compare(x.removals.begin(), x.removals.end(), y.removals.begin(),
                                        y.removals.end());
  };
  auto balance_equal = [](const SolutionRank& x, const SolutionRank& y) {
    if (x.kind == BalanceKind::divergence) return x.divergence == y.divergence;
    return x.removals == y.removals;
  };
  if (sa) {
    if (a.preserved != b.preserved) return a.preserved > b.preserved;
    if (!balance_equal(a, b)) return balance_less(a, b);
    return a.r > b.r;
  }
  if (a.r != b.r) return a.r > b.r;
  if (a.preserved != b.preserved) return a.preserved > b.preserved;
  return balance_less(a, b);
}

Context::Context(const Dataset& d, const MatchConfig& config, const TestRegistry& registry)
    : data(d),
      cfg(config),
      evaluator(d, config.criteria, registry),
      ranker(d, config.balance),
      rules(d, config.constraints),
      workers(config.params.threads),
      workspaces(workers.size()),
      rng(config.seed),
      start_(std::chrono::steady_clock::now()) {}

double Context::elapsed() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

bool Context::timed_out() const { return cfg.params.timeout_seconds && elapsed() > *cfg.params.timeout_seconds; }

bool Context::affordable(std::uint64_t sets) const {
  const std::uint64_t t = criteria();
  if (sets > (std::numeric_limits<std::uint64_t>::max() - evaluations) / std::max<std::uint64_t>(t, 1)) return false;
  return evaluations + sets * t <= cfg.params.budget;
}

std::vector<std::optional<SolutionRank>> Context::score_sets(const SubsetState& state,
                                                             const Evaluator::Baseline& base,
                                                             std::span<const std::size_t> flat,
                                                             std::size_t set_size) {
  const std::size_t n = set_size == 0 ? 0 : flat.size() / set_size;
  std::vector<std::optional<SolutionRank>> out(n);
  const auto counts = state.group_counts();
  workers.run(n, [&](std::size_t i, unsigned w) {
    auto rows = flat.subspan(i * set_size, set_size);
    auto r = evaluator.r_without(base, rows, workspaces[w]);
    if (!r) return;
    boost::container::small_vector<std::size_t, 8> kept(counts.begin(), counts.end());
    for (std::size_t row : rows) --kept[data.group_of(row)];
    out[i] = ranker.rank(std::span<const std::size_t>(kept.data(), kept.size()), *r);
  });
  evaluations += static_cast<std::uint64_t>(n) * criteria();
  return out;
}

std::optional<SolutionRank> Context::fresh_rank(const SubsetState& state) {
  evaluations += criteria();
  auto r = evaluator.compute_r(state);
  if (!r) return std::nullopt;
  return ranker.rank(state, *r);
}

void Context::finish(MatchResult& result, std::vector<SubsetState> solutions, bool success, std::size_t equivalent,
                     std::string stop_reason) {
  result.seed = cfg.seed;
  result.success = success;
  result.solutions = std::move(solutions);
  result.equivalent_found = success ? equivalent : 0;
  result.stop_reason = std::move(stop_reason);
  const SubsetState& best = result.solutions.front();
  result.evaluation = evaluator.evaluate(best);
  result.rank = ranker.rank(best, result.evaluation ? result.evaluation->r : 0.0);
  result.wall_seconds = elapsed();
  result.evaluations = evaluations;
}

std::vector<std::size_t> combinations(std::span<const std::size_t> items, std::size_t k) {
  std::vector<std::size_t> out;
  const std::size_t n = items.size();
  if (k == 0 || k > n) return out;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  for (;;) {
    for (std::size_t i : idx) out.push_back(items[i]);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

}  // namespace groupmatch::search_detail
