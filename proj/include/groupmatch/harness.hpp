#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "groupmatch/criteria.hpp"
#include "groupmatch/dataset.hpp"
#include "groupmatch/search.hpp"
#include "groupmatch/synthgen.hpp"

namespace groupmatch {

struct EvalMetrics {
  std::size_t removed = 0;
  double pct_excluded_items = 0.0;
  /// Share of excluded items that are intruders (needs ground truth).
  std::optional<double> pct_excluded_intruders;
  /// Share of intruders that were excluded (needs ground truth).
  std::optional<double> intruder_recall;
  double balanced_divergence = 0.0;
  double post_match_p = 0.0;  // smallest criterion p-value of the best state
  double wall_time = 0.0;
  bool success = false;
  std::size_t n_solutions = 0;
};

/// Metrics of a result's best state. `truth` holds per-row intruder flags.
EvalMetrics evaluate_run(const Dataset& d, const MatchResult& result, const std::vector<bool>* truth,
                         const MatchConfig& cfg);

/// Welch and Anderson-Darling on every covariate between the two groups.
MatchConfig synthetic_config(const Dataset& d, double alpha, const SearchParams& params);

struct GridOptions {
  std::size_t replications = 5;
  std::uint64_t master_seed = 0;
  unsigned workers = 1;  // concurrent grid cells
  double alpha = 0.2;
  SearchParams params;   // threads applies within each run
};

struct GridRow {
  std::size_t spec_index = 0;
  std::size_t replicate = 0;
  std::string algorithm;
  std::uint64_t seed = 0;
  std::size_t n_items = 0;
  std::size_t n_covariates = 0;
  std::size_t n_shifted = 0;
  EvalMetrics metrics;
  std::string stop_reason;
  std::string error;
};

struct GridReport {
  std::vector<std::string> algorithms;
  std::size_t replications = 0;
  std::vector<GridRow> rows;  // grid order: spec, replicate, algorithm
};

/// Runs every algorithm on every (spec, replicate) dataset. Failures are
/// recorded as unsuccessful rows.
GridReport run_experiment_grid(const std::vector<SyntheticSpec>& specs, const std::vector<AlgorithmSpec>& algorithms,
                               const GridOptions& options);

struct AggregateRow {
  std::string algorithm;
  std::size_t runs = 0;
  std::size_t successes = 0;
  std::size_t replications = 0;
  // Central values over successful runs (median, or mean on request);
  // time is over all runs.
  double n_solutions = 0.0;
  double pct_excluded_items = 0.0;
  double pct_excluded_intruders = 0.0;
  double intruder_recall = 0.0;
  double balanced_divergence = 0.0;
  double post_match_p = 0.0;
  double wall_time = 0.0;

  double success_rate() const { return runs ? static_cast<double>(successes) / static_cast<double>(runs) : 0.0; }
};

std::vector<AggregateRow> aggregate(const GridReport& report, bool use_mean = false);

double median(std::vector<double> values);

void write_rows_csv(std::ostream& out, const GridReport& report);
void write_summary(std::ostream& out, const std::vector<AggregateRow>& rows);

/// One row for a single match run (optionally preceded by the header), same
/// columns as the grid CSV minus the grid coordinates.
void write_metrics_csv(std::ostream& out, const std::string& algorithm, const EvalMetrics& m, bool header = true);

}  // namespace groupmatch
