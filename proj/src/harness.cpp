#include "groupmatch/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace groupmatch {
namespace {

std::string num(double v) { return fmt::format("{:.6g}", v); }
std::string opt(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

EvalMetrics evaluate_run(const Dataset& d, const MatchResult& result, const std::vector<bool>* truth,
                         const MatchConfig& cfg) {
  EvalMetrics m;
  m.success = result.success;
  m.wall_time = result.wall_seconds;
  m.n_solutions = result.success ? result.equivalent_found : 0;
  const SubsetState& s = result.best();
  m.removed = s.removed_count();
  m.pct_excluded_items = 100.0 * static_cast<double>(m.removed) / static_cast<double>(d.size());

  if (truth) {
    std::size_t intruders = 0, excluded_intruders = 0;
    for (std::size_t row = 0; row < d.size(); ++row) {
      if (!(*truth)[row]) continue;
      ++intruders;
      if (!s.kept(row)) ++excluded_intruders;
    }
    m.pct_excluded_intruders =
        m.removed ? 100.0 * static_cast<double>(excluded_intruders) / static_cast<double>(m.removed) : 0.0;
    m.intruder_recall =
        intruders ? 100.0 * static_cast<double>(excluded_intruders) / static_cast<double>(intruders) : 0.0;
  }

  const Ranker ranker(d, cfg.balance);
  m.balanced_divergence = kl_divergence(group_proportions(d, s), ranker.target());
  if (result.evaluation && !result.evaluation->p_values.empty())
    m.post_match_p = *std::min_element(result.evaluation->p_values.begin(), result.evaluation->p_values.end());
  return m;
}

MatchConfig synthetic_config(const Dataset& d, double alpha, const SearchParams& params) {
  MatchConfig cfg;
  std::vector<std::string> groups(d.group_labels().begin(), d.group_labels().end());
  for (const auto& name : d.covariate_names()) {
    if (groups.size() == 2) cfg.criteria.criteria.push_back({"welch_t", name, groups, alpha});
    cfg.criteria.criteria.push_back({"anderson_darling", name, groups, alpha});
  }
  cfg.params = params;
  return cfg;
}

GridReport run_experiment_grid(const std::vector<SyntheticSpec>& specs, const std::vector<AlgorithmSpec>& algorithms,
                               const GridOptions& options) {
  if (specs.empty() || algorithms.empty()) throw std::invalid_argument("experiment grid needs specs and algorithms");
  GridReport report;
  report.replications = options.replications;
  for (const auto& a : algorithms) report.algorithms.push_back(a.label());

  const std::size_t cells = specs.size() * options.replications;
  std::vector<std::vector<GridRow>> results(cells);
  std::atomic<std::size_t> next{0};

  auto run_cell = [&](std::size_t cell) {
    const std::size_t si = cell / options.replications;
    const std::size_t rep = cell % options.replications;
    SyntheticSpec spec = specs[si];
    spec.seed = derive_seed(spec.seed, {rep});
    auto& out = results[cell];
    std::optional<SyntheticData> synth;
    std::string gen_error;
    try {
      synth = generate_dataset(spec);
    } catch (const std::exception& e) {
      gen_error = e.what();
    }
    for (std::size_t ai = 0; ai < algorithms.size(); ++ai) {
      GridRow row;
      row.spec_index = si;
      row.replicate = rep;
      row.algorithm = report.algorithms[ai];
      row.seed = derive_seed(options.master_seed, {si, rep, ai});
      row.n_items = spec.n_items;
      row.n_covariates = spec.n_covariates;
      row.n_shifted = spec.n_shifted_covariates;
      if (!synth) {
        row.error = gen_error;
        out.push_back(std::move(row));
        continue;
      }
      try {
        MatchConfig cfg = synthetic_config(synth->data, options.alpha, options.params);
        cfg.seed = row.seed;
        MatchResult res = run_algorithm(synth->data, cfg, algorithms[ai]);
        row.metrics = evaluate_run(synth->data, res, &synth->intruder, cfg);
        row.stop_reason = res.stop_reason;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      out.push_back(std::move(row));
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(cells)));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t cell; (cell = next.fetch_add(1)) < cells;) run_cell(cell);
    });
  for (auto& t : pool) t.join();

  for (auto& cell : results)
    for (auto& row : cell) report.rows.push_back(std::move(row));
  return report;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<AggregateRow> aggregate(const GridReport& report, bool use_mean) {
  std::vector<AggregateRow> out;
  auto center = [&](const std::vector<double>& v) { return use_mean ? mean(v) : median(v); };
  for (const auto& name : report.algorithms) {
    AggregateRow agg;
    agg.algorithm = name;
    agg.replications = report.replications;
    std::vector<double> sols, items, intr, recall, bd, p, time;
    for (const auto& row : report.rows) {
      if (row.algorithm != name) continue;
      ++agg.runs;
      time.push_back(row.metrics.wall_time);
      if (!row.metrics.success) continue;
      ++agg.successes;
      const auto& m = row.metrics;
      sols.push_back(static_cast<double>(m.n_solutions));
      items.push_back(m.pct_excluded_items);
      if (m.pct_excluded_intruders) intr.push_back(*m.pct_excluded_intruders);
      if (m.intruder_recall) recall.push_back(*m.intruder_recall);
      bd.push_back(m.balanced_divergence);
      p.push_back(m.post_match_p);
    }
    agg.n_solutions = center(sols);
    agg.pct_excluded_items = center(items);
    agg.pct_excluded_intruders = center(intr);
    agg.intruder_recall = center(recall);
    agg.balanced_divergence = center(bd);
    agg.post_match_p = center(p);
    agg.wall_time = center(time);
    out.push_back(agg);
  }
  return out;
}

void write_rows_csv(std::ostream& out, const GridReport& report) {
  out << "spec,replicate,algorithm,seed,n_items,n_covariates,n_shifted,success,n_solutions,removed,"
         "pct_excluded_items,pct_excluded_intruders,intruder_recall,balanced_divergence,post_match_p,wall_time,"
         "stop_reason,error\n";
  for (const auto& r : report.rows) {
    const auto& m = r.metrics;
    fmt::print(out, "{},{},\"{}\",{},{},{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"\n", r.spec_index, r.replicate,
               r.algorithm, r.seed, r.n_items, r.n_covariates, r.n_shifted, m.success ? 1 : 0, m.n_solutions,
               m.removed, num(m.pct_excluded_items), opt(m.pct_excluded_intruders), opt(m.intruder_recall),
               num(m.balanced_divergence), num(m.post_match_p), num(m.wall_time), r.stop_reason, r.error);
  }
}

void write_summary(std::ostream& out, const std::vector<AggregateRow>& rows) {
  fmt::print(out, "{:<24} {:>6} {:>8} {:>11} {:>9} {:>13} {:>7} {:>6} {:>10}\n", "algorithm", "runs", "success",
             "#solutions", "%E.items", "%E.intruders", "BD", "p", "time(s)");
  for (const auto& r : rows) {
    fmt::print(out, "{:<24} {:>6} {:>7.0f}% {:>11.1f} {:>9.1f} {:>13.1f} {:>7.3f} {:>6.3f} {:>10.3f}\n", r.algorithm,
               r.runs, 100.0 * r.success_rate(), r.n_solutions, r.pct_excluded_items, r.pct_excluded_intruders,
               r.balanced_divergence, r.post_match_p, r.wall_time);
  }
}

void write_metrics_csv(std::ostream& out, const std::string& algorithm, const EvalMetrics& m, bool header) {
  if (header)
    out << "algorithm,success,n_solutions,removed,pct_excluded_items,pct_excluded_intruders,intruder_recall,"
         "balanced_divergence,post_match_p,wall_time\n";
  fmt::print(out, "\"{}\",{},{},{},{},{},{},{},{},{}\n", algorithm, m.success ? 1 : 0, m.n_solutions, m.removed,
             num(m.pct_excluded_items), opt(m.pct_excluded_intruders), opt(m.intruder_recall),
             num(m.balanced_divergence), num(m.post_match_p), num(m.wall_time));
}

}  // namespace groupmatch
