#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "search/common.hpp"

namespace groupmatch {
namespace {

constexpr std::size_t kBatch = 256;
constexpr std::size_t kMaxRedraws = 1000;

}  // namespace

MatchResult random_search(const Dataset& d, const MatchConfig& cfg, const TestRegistry& registry) {
  search_detail::Context ctx(d, cfg, registry);
  const auto& p = cfg.params;
  MatchResult result;
  result.algorithm = "random";
  result.parameters = fmt::format("iterations={} schedule={}", p.iterations,
                                  p.schedule == KeepSchedule::linear ? "linear" : "geometric");

  const double floor_q = static_cast<double>(d.num_groups()) / static_cast<double>(d.size());
  auto keep_probability = [&](std::size_t i) {
    const double t = static_cast<double>(i) / static_cast<double>(p.iterations);
    if (p.schedule == KeepSchedule::geometric) return std::pow(floor_q, t);
    return 1.0 - (1.0 - floor_q) * t;
  };

  const SubsetState full(d);
  auto draw = [&](std::size_t i) -> std::optional<SubsetState> {
    const double q = keep_probability(i);
    for (std::size_t attempt = 0; attempt < kMaxRedraws; ++attempt) {
      SubsetState s = full;
      for (std::size_t row = 0; row < d.size(); ++row) {
        if (ctx.rules.locked(d.group_of(row))) continue;
        if (ctx.rng.uniform() >= q) s.remove(d, row);
      }
      if (ctx.rules.feasible(s)) return s;
    }
    return std::nullopt;
  };

  search_detail::TiePool<SubsetState> pool(p.pool_cap, ctx.rng);
  std::string reason = "iterations done";
  std::size_t next = 0;  // 0 is the full set, then draws 1..I
  while (next <= p.iterations) {
    if (ctx.timed_out()) {
      reason = "timeout";
      break;
    }
    std::vector<SubsetState> batch;
    for (; next <= p.iterations && batch.size() < kBatch; ++next) {
      if (next == 0) {
        batch.push_back(full);
      } else if (auto s = draw(next)) {
        batch.push_back(std::move(*s));
      }
    }
    if (!ctx.affordable(batch.size())) {
      reason = "budget";
      break;
    }
    std::vector<std::optional<double>> rs(batch.size());
    ctx.workers.run(batch.size(), [&](std::size_t i, unsigned) { rs[i] = ctx.evaluator.compute_r(batch[i]); });
    ctx.evaluations += batch.size() * ctx.criteria();
    for (std::size_t i = 0; i < batch.size(); ++i)
      if (rs[i]) pool.offer(ctx.ranker.rank(batch[i], *rs[i]), batch[i]);
  }

  std::vector<SubsetState> solutions;
  for (const auto& s : pool.items())
    if (std::find(solutions.begin(), solutions.end(), s) == solutions.end()) solutions.push_back(s);
  const bool success = pool.best() && pool.best()->r >= 1.0;
  if (solutions.empty()) solutions.push_back(full);
  if (!success) solutions.resize(1);
  const std::size_t equivalent = pool.seen() > p.pool_cap ? pool.seen() : solutions.size();
  ctx.finish(result, std::move(solutions), success, equivalent, success ? "matched" : reason);
  return result;
}

}  // namespace groupmatch
