#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "groupmatch/search.hpp"
#include "search/worker_pool.hpp"

namespace groupmatch::search_detail {

/// The single seeded generator a search draws all randomness from.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [0, n), n > 0; unbiased.
  std::size_t below(std::size_t n);
  /// Uniform in [0, 1).
  double uniform();

 private:
  std::mt19937_64 engine_;
};

/// Ranking of tentative steps: a successful state beats a failing one;
/// successes compare as solutions, failures by r first, then balance.
Ordering step_order(const SolutionRank& a, const SolutionRank& b);

/// Strict total order consistent with step_order, without tolerances. Used
/// to sort batch candidates.
bool step_sorts_before(const SolutionRank& a, const SolutionRank& b);

/// Best-ranked items under step_order, offered in canonical order. Keeps at
/// most `cap` ties by reservoir sampling.
template <class T>
class TiePool {
 public:
  TiePool(std::size_t cap, Rng& rng) : cap_(cap), rng_(&rng) {}

  void offer(const SolutionRank& rank, const T& item) {
    if (!best_) {
      reset(rank, item);
      return;
    }
    switch (step_order(rank, *best_)) {
      case Ordering::better:
        reset(rank, item);
        break;
      case Ordering::equivalent:
        ++seen_;
        if (items_.size() < cap_) {
          items_.push_back(item);
        } else {
          const std::size_t j = rng_->below(seen_);
          if (j < cap_) items_[j] = item;
        }
        break;
      case Ordering::worse:
        break;
    }
  }

  bool empty() const { return items_.empty(); }
  const std::vector<T>& items() const { return items_; }
  std::size_t seen() const { return seen_; }
  const std::optional<SolutionRank>& best() const { return best_; }

 private:
  void reset(const SolutionRank& rank, const T& item) {
    best_ = rank;
    items_.assign(1, item);
    seen_ = 1;
  }

  std::size_t cap_;
  Rng* rng_;
  std::vector<T> items_;
  std::size_t seen_ = 0;
  std::optional<SolutionRank> best_;
};

/// Uniform pick among `n` tied options; consumes randomness only if n > 1.
std::size_t pick(Rng& rng, std::size_t n);

/// Shared machinery for one search run.
class Context {
 public:
  Context(const Dataset& d, const MatchConfig& cfg, const TestRegistry& registry);

  const Dataset& data;
  const MatchConfig& cfg;
  Evaluator evaluator;
  Ranker ranker;
  FeasibilityRules rules;
  WorkerPool workers;
  std::vector<Evaluator::Workspace> workspaces;
  Rng rng;
  std::uint64_t evaluations = 0;

  std::size_t criteria() const { return evaluator.num_criteria(); }
  double elapsed() const;
  bool timed_out() const;
  /// True if `sets` more configurations fit in the evaluation budget.
  bool affordable(std::uint64_t sets) const;

  /// Scores removal sets, stored flat (`set_size` rows each), against `base`.
  /// nullopt marks an undefined state.
  std::vector<std::optional<SolutionRank>> score_sets(const SubsetState& state, const Evaluator::Baseline& base,
                                                      std::span<const std::size_t> flat, std::size_t set_size);

  /// Fresh (uncached) rank of a state; nullopt if undefined.
  std::optional<SolutionRank> fresh_rank(const SubsetState& state);

  /// Fills the result's best-state metadata from `solutions` (best first).
  void finish(MatchResult& result, std::vector<SubsetState> solutions, bool success, std::size_t equivalent,
              std::string stop_reason);

 private:
  std::chrono::steady_clock::time_point start_;
};

/// All size-k combinations of `items` (ascending), flattened, in
/// lexicographic order.
std::vector<std::size_t> combinations(std::span<const std::size_t> items, std::size_t k);

}  // namespace groupmatch::search_detail
