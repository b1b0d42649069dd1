#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "groupmatch/criteria.hpp"
#include "groupmatch/dataset.hpp"
#include "groupmatch/evaluator.hpp"
#include "groupmatch/stats.hpp"

namespace groupmatch {

/// Exhaustive search would exceed its configured evaluation ceiling.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One removal step. Batched steps (rho > 1) remove several rows at once.
struct TraceRecord {
  std::size_t step = 0;
  std::vector<std::size_t> rows;
  std::vector<std::string> removed;
  std::optional<double> r_before;
  std::optional<double> r_after;
  std::size_t pool_size = 0;  // candidate sets retained
  std::size_t ties = 0;       // equal-rank candidate sets seen before capping
  bool batch = false;
};

struct MatchResult {
  std::string algorithm;
  std::string parameters;
  std::uint64_t seed = 0;
  bool success = false;
  /// Mutually equivalent best states, best first. For a failed run, the best
  /// state reached.
  std::vector<SubsetState> solutions;
  /// Equivalent best states found; may exceed solutions.size() when capped.
  std::size_t equivalent_found = 0;
  SolutionRank rank;
  std::optional<Evaluation> evaluation;
  double wall_seconds = 0.0;
  std::uint64_t evaluations = 0;  // criterion evaluations
  std::string stop_reason;
  std::vector<TraceRecord> trace;

  const SubsetState& best() const { return solutions.front(); }
};

enum class Algorithm { random, greedy, h3, h4, exhaustive };

std::string_view algorithm_name(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view name);

/// Algorithm plus per-algorithm overrides of the config's search parameters.
struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::greedy;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> lookahead;
  std::optional<std::size_t> rho;
  std::optional<std::size_t> max_removed;

  std::string label() const;
};

/// Draws subsets with a decreasing keep probability; the full set is always
/// scored first.
MatchResult random_search(const Dataset& d, const MatchConfig& cfg,
                          const TestRegistry& registry = TestRegistry::with_builtins());

/// Removes the single subject giving the best step rank until r >= 1.
MatchResult greedy_search(const Dataset& d, const MatchConfig& cfg,
                          const TestRegistry& registry = TestRegistry::with_builtins());

enum class LookaheadVariant { h3, h4 };

/// Scores removal sets of size `cfg.params.lookahead`, then removes one
/// subject from the best sets. With rho > 1, removes up to rho subjects per
/// recomputation until r reaches `rho_revert_threshold`.
MatchResult lookahead_search(const Dataset& d, const MatchConfig& cfg, LookaheadVariant variant,
                             const TestRegistry& registry = TestRegistry::with_builtins());

/// Breadth-first over removal counts up to `cfg.params.max_removed` (default:
/// everything the constraints allow). Throws BudgetExceeded before a depth
/// that would exceed `cfg.params.budget` criterion evaluations.
MatchResult exhaustive_search(const Dataset& d, const MatchConfig& cfg,
                              const TestRegistry& registry = TestRegistry::with_builtins());

MatchResult run_algorithm(const Dataset& d, const MatchConfig& cfg, const AlgorithmSpec& spec,
                          const TestRegistry& registry = TestRegistry::with_builtins());

using BigCount = boost::multiprecision::cpp_int;

/// sum_{i=0}^{n} C(N, i). Throws std::invalid_argument if n > N.
BigCount count_configurations(std::size_t N, std::size_t n);

struct ExhaustiveEstimate {
  BigCount configurations;
  double rate = 0.0;     // configurations per second
  double seconds = 0.0;  // may be inf for astronomically large counts
  bool feasible = false;
  std::string duration;  // e.g. "< 11 seconds", "≈ 13 minutes"
};

/// Human-readable duration: "< 11 seconds", "≈ 13 minutes", "≈ 2 hours", ...
std::string format_duration(double seconds);

/// Projected exhaustive run time. Feasible iff configurations * criteria fit
/// within `budget` criterion evaluations.
ExhaustiveEstimate estimate_exhaustive(std::size_t N, std::size_t bound, double rate, std::size_t num_criteria,
                                       std::uint64_t budget);
ExhaustiveEstimate estimate_exhaustive(const Dataset& d, const MatchConfig& cfg, std::size_t heuristic_removals,
                                       double calibrated_rate);

/// Configurations scored per second on `d`, timing single-removal
/// evaluations for at least `min_seconds`.
double calibrate_rate(const Dataset& d, const MatchConfig& cfg,
                      const TestRegistry& registry = TestRegistry::with_builtins(), double min_seconds = 0.2);

}  // namespace groupmatch
