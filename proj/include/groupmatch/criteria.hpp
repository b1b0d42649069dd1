#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/container/small_vector.hpp>

#include "groupmatch/dataset.hpp"
#include "groupmatch/stats.hpp"

namespace groupmatch {

/// Invalid matching configuration. Messages name the offending criterion/field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One statistical requirement: p(test on covariate across groups) > alpha.
struct CriterionSpec {
  std::string test;
  std::string covariate;
  /// Empty means every group in the dataset.
  std::vector<std::string> groups;
  double alpha = 0.2;

  std::string describe() const;
};

struct CriteriaSet {
  std::vector<CriterionSpec> criteria;
};

/// Keep the kept-group proportions close to a target (KL divergence).
/// An empty target means the dataset's original proportions.
struct ProportionsBalance {
  std::map<std::string, double> target;
};

/// Prefer keeping members of earlier groups. Groups not listed follow in
/// canonical order.
struct PrecedenceBalance {
  std::vector<std::string> order;
};

using BalanceMode = std::variant<ProportionsBalance, PrecedenceBalance>;

enum class KeepSchedule { linear, geometric };

struct SearchParams {
  std::size_t iterations = 1000;  // random search draws
  KeepSchedule schedule = KeepSchedule::linear;
  std::size_t lookahead = 1;
  std::size_t rho = 1;  // removals per r recomputation
  double rho_revert_threshold = 0.5;
  std::size_t pool_cap = 64;
  std::optional<std::size_t> max_removed;  // exhaustive depth bound
  std::uint64_t budget = 100'000'000;      // criterion evaluations per run
  unsigned threads = 1;
  std::optional<double> timeout_seconds;
};

struct MatchConfig {
  CriteriaSet criteria;
  BalanceMode balance = ProportionsBalance{};
  Constraints constraints;
  std::uint64_t seed = 0;
  SearchParams params;
};

/// Checks criteria, balance and constraints against the dataset and registry.
/// Throws ConfigError (or DataError for constraint problems).
void validate(const Dataset& d, const MatchConfig& cfg, const TestRegistry& registry);

enum class BalanceKind { divergence, precedence };

/// Lexicographic quality key: more preserved, then better balance, then higher r.
struct SolutionRank {
  std::size_t preserved = 0;
  BalanceKind kind = BalanceKind::divergence;
  double divergence = 0.0;
  /// Removal counts per group in precedence order (precedence mode only).
  boost::container::small_vector<std::uint32_t, 8> removals;
  double r = 0.0;
};

enum class Ordering { better, worse, equivalent };

/// Relative tie tolerance on r.
inline constexpr double kRTieTolerance = 1e-12;
/// Absolute tie tolerance on KL divergence.
inline constexpr double kDivergenceTieTolerance = 1e-12;

bool r_ties(double a, double b);
/// Compares balance terms only (smaller divergence / fewer high-precedence removals wins).
Ordering compare_balance(const SolutionRank& a, const SolutionRank& b);
/// Ordering of `a` relative to `b`.
Ordering compare_solutions(const SolutionRank& a, const SolutionRank& b);

/// KL(observed || target) in nats with 0 ln 0 = 0. Throws std::invalid_argument
/// on length mismatch or a non-positive target entry.
double kl_divergence(std::span<const double> observed, std::span<const double> target);

/// Builds SolutionRanks for a fixed dataset and balance mode.
class Ranker {
 public:
  Ranker(const Dataset& d, const BalanceMode& mode);

  BalanceKind kind() const { return kind_; }
  /// Target proportions in canonical group order (the original proportions in
  /// precedence mode).
  std::span<const double> target() const { return target_; }

  SolutionRank rank(std::span<const std::size_t> group_counts, double r) const;
  SolutionRank rank(const SubsetState& s, double r) const { return rank(s.group_counts(), r); }

 private:
  const Dataset* data_;
  BalanceKind kind_;
  std::vector<double> target_;
  std::vector<GroupId> order_;
};

}  // namespace groupmatch
