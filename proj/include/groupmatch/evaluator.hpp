#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groupmatch/criteria.hpp"
#include "groupmatch/dataset.hpp"
#include "groupmatch/stats.hpp"

namespace groupmatch {

/// Per-criterion outcome of a full evaluation.
struct Evaluation {
  double r = 0.0;
  std::vector<double> p_values;
  std::vector<bool> extrapolated;

  bool success() const { return r >= 1.0; }
};

/// Compiled criteria over one dataset.
///
/// Built-in tests run without materialising samples: Welch works from per-group
/// moments (downdated for tentative removals), Anderson-Darling walks a
/// presorted row order. Registered custom tests receive gathered samples.
/// All methods are const and thread-safe; each worker thread needs its own
/// Workspace.
class Evaluator {
 public:
  Evaluator(const Dataset& d, const CriteriaSet& criteria,
            const TestRegistry& registry = TestRegistry::with_builtins());

  const Dataset& dataset() const { return *data_; }
  std::size_t num_criteria() const { return criteria_.size(); }
  const std::string& criterion_label(std::size_t j) const { return criteria_[j].label; }

  /// Statistics of a fixed state that tentative removals are scored against.
  struct Baseline {
    std::uint64_t id = 0;
    std::vector<std::uint8_t> keep;
    std::vector<detail::Moments> moments;  // one per (covariate, group) Welch slot
  };

  struct Workspace {
    std::uint64_t baseline_id = 0;
    std::vector<std::uint8_t> keep;
    std::vector<double> counts;
    std::vector<double> run_counts;
    detail::AdScratch ad;
    std::vector<std::vector<double>> samples;
  };

  Baseline prepare(const SubsetState& s) const;
  Workspace make_workspace() const { return {}; }

  /// r of the baseline state with `removed` (kept rows, distinct) taken out;
  /// nullopt if any criterion is undefined there.
  std::optional<double> r_without(const Baseline& base, std::span<const std::size_t> removed,
                                  Workspace& ws) const;

  /// Full evaluation with per-criterion p-values.
  std::optional<Evaluation> evaluate(const SubsetState& s) const;
  std::optional<double> compute_r(const SubsetState& s) const;

 private:
  struct Compiled {
    TestFunction fn;
    std::size_t covariate = 0;
    std::vector<GroupId> groups;
    std::vector<int> sample_of_group;  // group id -> sample index or -1
    std::vector<std::size_t> slots;    // Welch moment slots, one per group
    double alpha = 0.2;
    std::string label;
  };

  std::optional<TestOutcome> outcome(const Compiled& c, const Baseline& base,
                                     std::span<const std::size_t> removed, Workspace& ws) const;
  void sync(const Baseline& base, Workspace& ws) const;

  const Dataset* data_;
  std::vector<Compiled> criteria_;
  // Standardized covariates (zero mean, unit sd over the full dataset).
  std::vector<std::vector<double>> standardized_;
  // Rows grouped by group, per covariate, for the moment kernels.
  std::vector<std::size_t> group_order_;
  std::vector<std::size_t> group_offset_;
  std::vector<std::vector<double>> grouped_values_;
  // Welch slots: (covariate, group) pairs whose moments a Baseline carries.
  std::vector<std::pair<std::size_t, GroupId>> slots_;
  // Per covariate: rows sorted by value and the start of each tie run.
  std::vector<std::vector<std::uint32_t>> sorted_rows_;
  std::vector<std::vector<std::uint32_t>> run_starts_;
};

/// r = min_j p_j / alpha_j over the criteria; nullopt if any test is undefined.
std::optional<double> compute_r(const Dataset& d, const SubsetState& s, const CriteriaSet& c,
                                const TestRegistry& registry = TestRegistry::with_builtins());

}  // namespace groupmatch
