// Greedy removal and its lookahead generalizations.

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "search/common.hpp"

namespace groupmatch {
namespace {

using search_detail::Context;
using search_detail::TiePool;

enum class Mode { greedy, h3, h4 };

struct Choice {
  std::size_t row = 0;
  // Equally ranked single removals considered last, for collecting
  // equivalent solutions when this step succeeds.
  std::vector<std::pair<std::size_t, std::optional<SolutionRank>>> finals;
  std::size_t pool_size = 0;
  std::size_t ties = 0;
};

enum class StepStatus { ok, budget, undefined };

struct StepOutcome {
  StepStatus status = StepStatus::ok;
  Choice choice;
};

// Best single removals among `rows`, pooled by step rank.
StepStatus best_singles(Context& ctx, const SubsetState& state, const Evaluator::Baseline& base,
                        std::span<const std::size_t> rows, Choice& out) {
  if (!ctx.affordable(rows.size())) return StepStatus::budget;
  auto scores = ctx.score_sets(state, base, rows, 1);
  TiePool<std::size_t> pool(ctx.cfg.params.pool_cap, ctx.rng);
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (scores[i]) pool.offer(*scores[i], i);
  if (pool.empty()) return StepStatus::undefined;
  out.finals.clear();
  for (std::size_t i : pool.items()) out.finals.emplace_back(rows[i], scores[i]);
  out.pool_size = pool.items().size();
  out.ties = pool.seen();
  out.row = out.finals[search_detail::pick(ctx.rng, out.finals.size())].first;
  return StepStatus::ok;
}

StepOutcome choose(Context& ctx, const SubsetState& state, std::span<const std::size_t> rows, Mode mode,
                   std::size_t lookahead) {
  StepOutcome res;
  const Evaluator::Baseline base = ctx.evaluator.prepare(state);

  std::size_t l = std::min(lookahead, rows.size());
  std::vector<std::size_t> flat;
  for (; l > 1; --l) {
    auto all = search_detail::combinations(rows, l);
    flat.clear();
    for (std::size_t i = 0; i < all.size(); i += l) {
      std::span<const std::size_t> set(all.data() + i, l);
      if (ctx.rules.can_remove_all(state, set)) flat.insert(flat.end(), set.begin(), set.end());
    }
    if (!flat.empty()) break;
  }

  if (l <= 1) {
    res.status = best_singles(ctx, state, base, rows, res.choice);
    return res;
  }

  const std::size_t n_sets = flat.size() / l;
  if (!ctx.affordable(n_sets)) {
    res.status = StepStatus::budget;
    return res;
  }
  auto scores = ctx.score_sets(state, base, flat, l);
  TiePool<std::size_t> top(ctx.cfg.params.pool_cap, ctx.rng);
  for (std::size_t i = 0; i < n_sets; ++i)
    if (scores[i]) top.offer(*scores[i], i);
  if (top.empty()) {
    res.status = StepStatus::undefined;
    return res;
  }
  res.choice.pool_size = top.items().size();
  res.choice.ties = top.seen();

  std::vector<std::vector<std::size_t>> sets;
  for (std::size_t i : top.items()) sets.emplace_back(flat.begin() + i * l, flat.begin() + (i + 1) * l);

  if (mode == Mode::h4) {
    std::map<std::size_t, std::size_t> occurrences;
    for (const auto& set : sets)
      for (std::size_t row : set) ++occurrences[row];
    std::size_t most = 0;
    for (const auto& [row, count] : occurrences) most = std::max(most, count);
    std::vector<std::size_t> candidates;
    for (const auto& [row, count] : occurrences)
      if (count == most) candidates.push_back(row);
    if (candidates.size() == 1) {
      res.choice.row = candidates.front();
      res.choice.finals = {{candidates.front(), std::nullopt}};
      return res;
    }
    const std::size_t pool_size = res.choice.pool_size, ties = res.choice.ties;
    res.status = best_singles(ctx, state, base, candidates, res.choice);
    res.choice.pool_size = pool_size;
    res.choice.ties = ties;
    return res;
  }

  // h3: narrow the candidate sets one size at a time, staying inside them.
  for (std::size_t level = l - 1; level >= 1; --level) {
    std::set<std::vector<std::size_t>> subsets;
    for (const auto& set : sets) {
      auto combos = search_detail::combinations(set, level);
      for (std::size_t i = 0; i < combos.size(); i += level)
        subsets.emplace(combos.begin() + i, combos.begin() + i + level);
    }
    std::vector<std::size_t> sub_flat;
    for (const auto& s : subsets) sub_flat.insert(sub_flat.end(), s.begin(), s.end());
    auto sub_scores = ctx.score_sets(state, base, sub_flat, level);
    TiePool<std::size_t> pool(ctx.cfg.params.pool_cap, ctx.rng);
    for (std::size_t i = 0; i < sub_scores.size(); ++i)
      if (sub_scores[i]) pool.offer(*sub_scores[i], i);
    if (pool.empty()) break;  // keep the previous level's sets
    sets.clear();
    for (std::size_t i : pool.items()) sets.emplace_back(sub_flat.begin() + i * level, sub_flat.begin() + (i + 1) * level);
    if (level == 1) {
      for (std::size_t i : pool.items()) res.choice.finals.emplace_back(sub_flat[i], sub_scores[i]);
      break;
    }
  }
  if (res.choice.finals.empty()) {
    std::set<std::size_t> members;
    for (const auto& set : sets) members.insert(set.begin(), set.end());
    for (std::size_t row : members) res.choice.finals.emplace_back(row, std::nullopt);
  }
  res.choice.row = res.choice.finals[search_detail::pick(ctx.rng, res.choice.finals.size())].first;
  return res;
}

// Single removals that tie with the chosen one and also succeed.
std::vector<SubsetState> equivalent_solutions(Context& ctx, const SubsetState& before, const SubsetState& chosen,
                                              const SolutionRank& chosen_rank, const Choice& choice) {
  std::vector<SubsetState> out{chosen};
  for (const auto& [row, rank] : choice.finals) {
    if (row == choice.row || !rank || rank->r < 1.0) continue;
    SubsetState alt = before;
    alt.remove(ctx.data, row);
    auto fresh = ctx.fresh_rank(alt);
    if (fresh && fresh->r >= 1.0 && compare_solutions(*fresh, chosen_rank) == Ordering::equivalent)
      out.push_back(std::move(alt));
  }
  return out;
}

MatchResult constructive(const Dataset& d, const MatchConfig& cfg, const TestRegistry& registry, Mode mode,
                         std::size_t lookahead, std::size_t rho) {
  Context ctx(d, cfg, registry);
  MatchResult result;
  if (mode == Mode::greedy) {
    result.algorithm = "greedy";
    result.parameters = "";
  } else {
    result.algorithm = mode == Mode::h3 ? "h3" : "h4";
    result.parameters = fmt::format("lookahead={} rho={} rho_revert={} pool_cap={}", lookahead, rho,
                                    cfg.params.rho_revert_threshold, cfg.params.pool_cap);
  }

  SubsetState state(d);
  std::optional<SolutionRank> current = ctx.fresh_rank(state);
  SubsetState best_state = state;
  std::optional<SolutionRank> best_rank = current;
  std::vector<SubsetState> solutions;
  std::size_t rho_eff = rho;
  std::string reason;
  if (current && current->r >= cfg.params.rho_revert_threshold) rho_eff = 1;

  for (std::size_t step = 1;; ++step) {
    if (current && current->r >= 1.0) {
      reason = "matched";
      if (solutions.empty()) solutions.push_back(state);
      break;
    }
    if (ctx.timed_out()) {
      reason = "timeout";
      break;
    }
    auto rows = ctx.rules.removable(state);
    if (rows.empty()) {
      reason = "no removable subject";
      break;
    }

    TraceRecord rec;
    rec.step = step;
    if (current) rec.r_before = current->r;

    if (rho_eff > 1) {
      if (!ctx.affordable(rows.size())) {
        reason = "budget";
        break;
      }
      const Evaluator::Baseline base = ctx.evaluator.prepare(state);
      auto scores = ctx.score_sets(state, base, rows, 1);
      std::vector<std::size_t> order;
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (scores[i]) order.push_back(i);
      if (order.empty()) {
        reason = "no defined candidate";
        break;
      }
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return search_detail::step_sorts_before(*scores[a], *scores[b]);
      });
      for (std::size_t i : order) {
        if (rec.rows.size() == rho_eff) break;
        if (!ctx.rules.can_remove(state, rows[i])) continue;
        state.remove(d, rows[i]);
        rec.rows.push_back(rows[i]);
      }
      rec.batch = true;
      rec.pool_size = order.size();
      rec.ties = order.size();
      current = ctx.fresh_rank(state);
      if (current && current->r >= cfg.params.rho_revert_threshold) rho_eff = 1;
    } else {
      const SubsetState before = state;
      auto outcome = choose(ctx, state, rows, mode, lookahead);
      if (outcome.status == StepStatus::budget) {
        reason = "budget";
        break;
      }
      if (outcome.status == StepStatus::undefined) {
        reason = "no defined candidate";
        break;
      }
      const Choice& choice = outcome.choice;
      state.remove(d, choice.row);
      rec.rows.push_back(choice.row);
      rec.pool_size = choice.pool_size;
      rec.ties = choice.ties;
      current = ctx.fresh_rank(state);
      if (current && current->r >= 1.0) solutions = equivalent_solutions(ctx, before, state, *current, choice);
    }

    for (std::size_t row : rec.rows) rec.removed.push_back(d.id(row));
    if (current) rec.r_after = current->r;
    result.trace.push_back(std::move(rec));
    if (current && (!best_rank || search_detail::step_order(*current, *best_rank) == Ordering::better)) {
      best_rank = current;
      best_state = state;
    }
  }

  if (reason == "matched") {
    const std::size_t count = solutions.size();
    ctx.finish(result, std::move(solutions), true, count, reason);
  } else {
    ctx.finish(result, {best_state}, false, 0, reason);
  }
  return result;
}

}  // namespace

MatchResult greedy_search(const Dataset& d, const MatchConfig& cfg, const TestRegistry& registry) {
  return constructive(d, cfg, registry, Mode::greedy, 1, 1);
}

MatchResult lookahead_search(const Dataset& d, const MatchConfig& cfg, LookaheadVariant variant,
                             const TestRegistry& registry) {
  return constructive(d, cfg, registry, variant == LookaheadVariant::h3 ? Mode::h3 : Mode::h4,
                      std::max<std::size_t>(1, cfg.params.lookahead), std::max<std::size_t>(1, cfg.params.rho));
}

}  // namespace groupmatch
