#include <algorithm>

#include <fmt/format.h>

#include "search/common.hpp"

namespace groupmatch {
namespace {

constexpr std::size_t kChunk = 8192;
constexpr std::size_t kMaxStoredSolutions = 4096;

// Lexicographic k-combinations of [0, n), produced in chunks.
class CombinationCursor {
 public:
  CombinationCursor(std::size_t n, std::size_t k) : n_(n), k_(k), idx_(k), done_(k > n) {
    for (std::size_t i = 0; i < k; ++i) idx_[i] = i;
  }

  bool done() const { return done_; }
  const std::vector<std::size_t>& current() const { return idx_; }

  void advance() {
    std::size_t i = k_;
    while (i > 0 && idx_[i - 1] == n_ - k_ + (i - 1)) --i;
    if (i == 0) {
      done_ = true;
      return;
    }
    ++idx_[i - 1];
    for (std::size_t j = i; j < k_; ++j) idx_[j] = idx_[j - 1] + 1;
  }

 private:
  std::size_t n_, k_;
  std::vector<std::size_t> idx_;
  bool done_;
};

}  // namespace

MatchResult exhaustive_search(const Dataset& d, const MatchConfig& cfg, const TestRegistry& registry) {
  search_detail::Context ctx(d, cfg, registry);
  MatchResult result;
  result.algorithm = "exhaustive";

  const SubsetState full(d);
  const auto rows = ctx.rules.removable(full);
  std::size_t allowed = 0;
  for (GroupId g = 0; g < d.num_groups(); ++g) allowed += ctx.rules.removal_allowance(g);
  std::size_t depth_limit = std::min({allowed, ctx.rules.total_allowance(), rows.size()});
  if (cfg.params.max_removed) depth_limit = std::min(depth_limit, *cfg.params.max_removed);
  result.parameters = fmt::format("max_removed={}", depth_limit);

  const Evaluator::Baseline base = ctx.evaluator.prepare(full);
  std::optional<SolutionRank> best_failing;
  SubsetState best_failing_state = full;
  std::string reason = "depth bound";

  auto note_failing = [&](const SolutionRank& rank, const SubsetState& s) {
    if (!best_failing || search_detail::step_order(rank, *best_failing) == Ordering::better) {
      best_failing = rank;
      best_failing_state = s;
    }
  };

  if (auto rank = ctx.fresh_rank(full)) {
    if (rank->r >= 1.0) {
      ctx.finish(result, {full}, true, 1, "matched");
      return result;
    }
    note_failing(*rank, full);
  }

  for (std::size_t k = 1; k <= depth_limit; ++k) {
    if (ctx.timed_out()) {
      reason = "timeout";
      break;
    }
    BigCount sets = 1;
    for (std::size_t i = 0; i < k; ++i) sets = sets * (rows.size() - i) / (i + 1);
    const BigCount total = BigCount(ctx.evaluations) + sets * ctx.criteria();
    if (total > BigCount(cfg.params.budget))
      throw BudgetExceeded(fmt::format(
          "exhaustive search at {} removals needs {} criterion evaluations in total, over the budget of {}", k,
          total.str(), cfg.params.budget));

    search_detail::TiePool<std::vector<std::size_t>> pool(kMaxStoredSolutions, ctx.rng);
    CombinationCursor cursor(rows.size(), k);
    std::vector<std::size_t> flat;
    std::vector<std::size_t> set(k);
    while (!cursor.done()) {
      flat.clear();
      while (!cursor.done() && flat.size() < kChunk * k) {
        for (std::size_t i = 0; i < k; ++i) set[i] = rows[cursor.current()[i]];
        if (ctx.rules.can_remove_all(full, set)) flat.insert(flat.end(), set.begin(), set.end());
        cursor.advance();
      }
      auto scores = ctx.score_sets(full, base, flat, k);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!scores[i]) continue;
        std::vector<std::size_t> removed(flat.begin() + i * k, flat.begin() + (i + 1) * k);
        if (scores[i]->r >= 1.0) {
          pool.offer(*scores[i], removed);
        } else if (!best_failing || search_detail::step_order(*scores[i], *best_failing) == Ordering::better) {
          SubsetState s = full;
          for (std::size_t row : removed) s.remove(d, row);
          note_failing(*scores[i], s);
        }
      }
    }

    if (pool.empty()) continue;
    // Confirm with fresh evaluations and keep the best equivalence class.
    std::vector<std::pair<SubsetState, SolutionRank>> verified;
    for (const auto& removed : pool.items()) {
      SubsetState s = full;
      for (std::size_t row : removed) s.remove(d, row);
      auto rank = ctx.fresh_rank(s);
      if (rank && rank->r >= 1.0) verified.emplace_back(std::move(s), *rank);
    }
    if (verified.empty()) continue;
    std::size_t lead = 0;
    for (std::size_t i = 1; i < verified.size(); ++i)
      if (compare_solutions(verified[i].second, verified[lead].second) == Ordering::better) lead = i;
    std::vector<SubsetState> solutions{verified[lead].first};
    for (std::size_t i = 0; i < verified.size(); ++i)
      if (i != lead && compare_solutions(verified[i].second, verified[lead].second) == Ordering::equivalent)
        solutions.push_back(verified[i].first);
    const std::size_t equivalent = pool.seen() > kMaxStoredSolutions ? pool.seen() : solutions.size();
    ctx.finish(result, std::move(solutions), true, equivalent, "matched");
    return result;
  }

  ctx.finish(result, {best_failing_state}, false, 0, reason);
  return result;
}

}  // namespace groupmatch
