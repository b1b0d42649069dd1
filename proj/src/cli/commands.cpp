#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "groupmatch/cli.hpp"
#include "groupmatch/harness.hpp"
#include "groupmatch/kernels.hpp"

namespace groupmatch {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

fs::path output_dir_or_cwd(const std::optional<fs::path>& dir) {
  fs::path out = dir.value_or(fs::current_path());
  fs::create_directories(out);
  return out;
}

void write_manifest(const fs::path& dir, std::string_view command, const std::string& canonical, std::uint64_t seed,
                    json extra = json::object()) {
  json m = std::move(extra);
  m["version"] = std::string(kVersion);
  m["command"] = std::string(command);
  m["config_hash"] = fnv1a_hex(canonical);
  m["seed"] = seed;
  m["isa"] = std::string(kernels::isa_name(kernels::active_isa()));
  auto out = open_output(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<std::string> kept_ids(const Dataset& d, const SubsetState& s) {
  std::vector<std::string> ids;
  for (std::size_t row = 0; row < d.size(); ++row)
    if (s.kept(row)) ids.push_back(d.id(row));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<bool> read_truth(const fs::path& path, const Dataset& d) {
  std::map<std::string, std::size_t> row_of;
  for (std::size_t row = 0; row < d.size(); ++row) row_of[d.id(row)] = row;
  std::istringstream in(read_file(path));
  std::vector<bool> truth(d.size(), false);
  std::string line;
  std::getline(in, line);  // header
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(fmt::format("{}:{}: expected 'id,intruder'", path.string(), lineno));
    auto it = row_of.find(line.substr(0, comma));
    if (it == row_of.end())
      throw DataError(fmt::format("{}:{}: unknown id '{}'", path.string(), lineno, line.substr(0, comma)));
    const std::string flag = line.substr(comma + 1);
    if (flag != "0" && flag != "1")
      throw DataError(fmt::format("{}:{}: intruder flag must be 0 or 1", path.string(), lineno));
    truth[it->second] = flag == "1";
  }
  return truth;
}

std::vector<SubsetState> read_solutions(const fs::path& path, const Dataset& d) {
  std::map<std::string, std::size_t> row_of;
  for (std::size_t row = 0; row < d.size(); ++row) row_of[d.id(row)] = row;
  std::istringstream in(read_file(path));
  std::vector<SubsetState> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream words(line);
    std::vector<bool> keep(d.size(), false);
    std::string id;
    bool any = false;
    while (words >> id) {
      auto it = row_of.find(id);
      if (it == row_of.end()) throw DataError(fmt::format("{}:{}: unknown id '{}'", path.string(), lineno, id));
      keep[it->second] = true;
      any = true;
    }
    if (!any) continue;
    SubsetState s(d);
    for (std::size_t row = 0; row < d.size(); ++row)
      if (!keep[row]) s.remove(d, row);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError(fmt::format("{}: no solutions", path.string()));
  return out;
}

void print_evaluation(std::ostream& out, const Evaluator& ev, const std::optional<Evaluation>& e) {
  if (!e) {
    out << "  r undefined (a test is undefined on this subset)\n";
    return;
  }
  for (std::size_t j = 0; j < ev.num_criteria(); ++j)
    fmt::print(out, "  {:<48} p = {:.4g}{}\n", ev.criterion_label(j), e->p_values[j],
               e->extrapolated[j] ? " (extrapolated)" : "");
  fmt::print(out, "  r = {:.4g}\n", e->r);
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
  } catch (const DataError& e) {
    fmt::print(err, "data error: {}\n", e.what());
  } catch (const SynthError& e) {
    fmt::print(err, "generation error: {}\n", e.what());
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
  }
  return 1;
}

struct Loaded {
  RunConfig rc;
  Dataset data;
};

Loaded load(const fs::path& config, const Overrides& overrides) {
  RunConfig rc = load_run_config(config, overrides);
  Dataset d = load_dataset(rc.dataset_path, rc.schema);
  validate(d, rc.match, TestRegistry::with_builtins());
  return {std::move(rc), std::move(d)};
}

}  // namespace

int cmd_match(const fs::path& config, const Overrides& overrides, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto [rc, d] = load(config, overrides);
    const fs::path dir = output_dir_or_cwd(rc.output_dir);
    const Evaluator ev(d, rc.match.criteria);

    std::vector<MatchResult> results;
    std::vector<EvalMetrics> metrics;
    bool any_error = false;
    for (const auto& spec : rc.algorithms) {
      try {
        results.push_back(run_algorithm(d, rc.match, spec));
        metrics.push_back(evaluate_run(d, results.back(), nullptr, rc.match));
      } catch (const BudgetExceeded& e) {
        fmt::print(err, "{}: budget exceeded: {}\n", spec.label(), e.what());
        any_error = true;
      } catch (const InfeasibleState& e) {
        fmt::print(err, "{}: {}\n", spec.label(), e.what());
        any_error = true;
      }
    }
    if (results.empty()) return 1;

    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i) {
      const bool better_success = results[i].success && !results[best].success;
      const bool same_success = results[i].success == results[best].success;
      if (better_success || (same_success && compare_solutions(results[i].rank, results[best].rank) == Ordering::better))
        best = i;
    }

    {
      auto f = open_output(dir / "metrics.csv");
      for (std::size_t i = 0; i < results.size(); ++i) write_metrics_csv(f, results[i].algorithm, metrics[i], i == 0);
    }
    {
      auto f = open_output(dir / "solutions.txt");
      for (const auto& s : results[best].solutions) {
        const auto ids = kept_ids(d, s);
        for (std::size_t i = 0; i < ids.size(); ++i) f << (i ? "," : "") << ids[i];
        f << '\n';
      }
    }
    {
      auto f = open_output(dir / "trace.jsonl");
      for (const auto& res : results)
        for (const auto& t : res.trace) {
          json j;
          j["algorithm"] = res.algorithm;
          j["step"] = t.step;
          j["removed"] = t.removed;
          j["r_before"] = optional_number(t.r_before);
          j["r_after"] = optional_number(t.r_after);
          j["pool_size"] = t.pool_size;
          j["ties"] = t.ties;
          j["batch"] = t.batch;
          f << j.dump() << '\n';
        }
    }
    json extra;
    extra["best_algorithm"] = results[best].algorithm;
    extra["success"] = results[best].success;
    write_manifest(dir, "match", rc.canonical, rc.match.seed, extra);

    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      fmt::print(out, "{}: {} ({}), removed {} of {}, {} equivalent solution(s), {:.3f} s\n", r.algorithm,
                 r.success ? "matched" : "no match", r.stop_reason, metrics[i].removed, d.size(),
                 r.equivalent_found, r.wall_seconds);
    }
    fmt::print(out, "best: {}\n", results[best].algorithm);
    print_evaluation(out, ev, results[best].evaluation);
    fmt::print(out, "outputs written to {}\n", dir.string());
    if (results[best].success) return 0;
    return any_error ? 1 : 2;
  });
}

int cmd_simulate(const fs::path& spec_path, const Overrides& overrides, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::string text = read_file(spec_path);
    SyntheticSpec spec = parse_synthetic_spec(text);
    if (overrides.seed) spec.seed = *overrides.seed;
    const SyntheticData synth = generate_dataset(spec);
    const fs::path dir = output_dir_or_cwd(overrides.output_dir);
    save_dataset(dir / "dataset.csv", synth.data);
    {
      auto f = open_output(dir / "truth.csv");
      write_truth(f, synth);
    }
    json extra;
    extra["attempts"] = synth.attempts;
    write_manifest(dir, "simulate", text + fmt::format("#seed={}", spec.seed), spec.seed, extra);
    fmt::print(out, "generated {} items ({} intruders) after {} attempt(s) into {}\n", synth.data.size(),
               spec.n_intruders, synth.attempts, dir.string());
    return 0;
  });
}

int cmd_estimate(const fs::path& config, std::size_t bound, std::optional<double> rate, const Overrides& overrides,
                 std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto [rc, d] = load(config, overrides);
    if (bound > d.size()) throw ConfigError(fmt::format("bound {} exceeds the {} subjects", bound, d.size()));
    if (rate && !(*rate > 0.0)) throw ConfigError("rate must be positive");
    const double r = rate ? *rate : bound == 0 ? 1.0 : calibrate_rate(d, rc.match);
    const ExhaustiveEstimate est = estimate_exhaustive(d, rc.match, bound, r);
    const bool one = est.configurations == 1;
    fmt::print(out, "subjects: {}\n", d.size());
    fmt::print(out, "removal bound: {}\n", bound);
    if (one) {
      fmt::print(out, "1 configuration, instantaneous\n");
    } else {
      fmt::print(out, "configurations: {}\n", est.configurations.str());
      fmt::print(out, "rate: {:.4g} configurations/second{}\n", r, rate ? "" : " (calibrated)");
      fmt::print(out, "projected time: {}\n", est.duration);
    }
    fmt::print(out, "verdict: {} (budget {} criterion evaluations)\n", est.feasible ? "feasible" : "infeasible",
               rc.match.params.budget);
    return 0;
  });
}

int cmd_evaluate(const fs::path& config, const std::optional<fs::path>& solutions,
                 const std::optional<fs::path>& truth, const Overrides& overrides, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    auto [rc, d] = load(config, overrides);
    const Evaluator ev(d, rc.match.criteria);
    std::vector<SubsetState> states = solutions ? read_solutions(*solutions, d) : std::vector<SubsetState>{SubsetState(d)};
    std::optional<std::vector<bool>> flags;
    if (truth) flags = read_truth(*truth, d);
    const FeasibilityRules rules(d, rc.match.constraints);
    bool all_matched = true;
    for (std::size_t i = 0; i < states.size(); ++i) {
      MatchResult res;
      res.solutions = {states[i]};
      res.evaluation = ev.evaluate(states[i]);
      res.success = res.evaluation && res.evaluation->success();
      res.equivalent_found = 1;
      all_matched = all_matched && res.success;
      const EvalMetrics m = evaluate_run(d, res, flags ? &*flags : nullptr, rc.match);
      fmt::print(out, "solution {}: kept {} of {}, {}{}\n", i + 1, d.size() - m.removed, d.size(),
                 res.success ? "matched" : "not matched", rules.feasible(states[i]) ? "" : " (violates constraints)");
      print_evaluation(out, ev, res.evaluation);
      fmt::print(out, "  balance divergence = {:.6g}\n", m.balanced_divergence);
      if (m.pct_excluded_intruders)
        fmt::print(out, "  excluded intruders: {:.1f}% of excluded, {:.1f}% of intruders\n", *m.pct_excluded_intruders,
                   *m.intruder_recall);
    }
    return all_matched ? 0 : 2;
  });
}

int cmd_grid(const fs::path& config, const Overrides& overrides, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Overrides o = overrides;
    o.output_dir.reset();
    const GridConfig g = parse_grid_config(read_file(config), o);
    const auto specs = parameter_grid(g.item_counts, g.draws_per_combination, g.master_seed);
    GridOptions opts;
    opts.replications = g.replications;
    opts.master_seed = g.master_seed;
    opts.workers = g.workers;
    opts.alpha = g.alpha;
    opts.params = g.params;
    const GridReport report = run_experiment_grid(specs, g.algorithms, opts);
    const auto summary = aggregate(report, g.use_mean);

    std::optional<fs::path> target = overrides.output_dir ? overrides.output_dir : g.output_dir;
    if (target && target->is_relative() && !overrides.output_dir) target = config.parent_path() / *target;
    const fs::path dir = output_dir_or_cwd(target);
    {
      auto f = open_output(dir / "grid_rows.csv");
      write_rows_csv(f, report);
    }
    {
      auto f = open_output(dir / "grid_summary.txt");
      write_summary(f, summary);
    }
    write_manifest(dir, "grid", g.canonical, g.master_seed);
    write_summary(out, summary);
    std::size_t errors = 0;
    for (const auto& r : report.rows) errors += r.error.empty() ? 0 : 1;
    if (errors) fmt::print(err, "{} grid run(s) failed; see grid_rows.csv\n", errors);
    return 0;
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subset selection that makes groups statistically indistinguishable", "groupmatch"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  fs::path config;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::uint64_t budget = 0;
  std::string output_dir, algorithms;
  std::size_t bound = 0;
  double rate = 0.0;
  std::string solutions, truth;

  auto common = [&](CLI::App* sub, bool with_algorithms) {
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--threads", threads, "Worker threads per run")->check(CLI::PositiveNumber);
    sub->add_option("--budget", budget, "Criterion evaluation budget")->check(CLI::PositiveNumber);
    sub->add_option("--output-dir", output_dir, "Output directory");
    if (with_algorithms)
      sub->add_option("--algorithms", algorithms, "Comma-separated list, e.g. greedy,h3:2,random:1000");
  };

  auto* match = app.add_subcommand("match", "Find maximal matched subsets");
  match->add_option("--config", config, "Run config (JSON)")->required();
  common(match, true);

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset with intruders");
  simulate->add_option("--config", config, "Synthetic spec (JSON)")->required();
  simulate->add_option("--seed", seed, "RNG seed");
  simulate->add_option("--output-dir", output_dir, "Output directory");

  auto* estimate = app.add_subcommand("estimate", "Project exhaustive search cost");
  estimate->add_option("--config", config, "Run config (JSON)")->required();
  estimate->add_option("--bound", bound, "Largest removal count considered")->required();
  estimate->add_option("--rate", rate, "Configurations per second (calibrated if omitted)");
  common(estimate, false);

  auto* evaluate = app.add_subcommand("evaluate", "Score subsets against the criteria");
  evaluate->add_option("--config", config, "Run config (JSON)")->required();
  evaluate->add_option("--solutions", solutions, "Kept ids, one subset per line");
  evaluate->add_option("--truth", truth, "id,intruder sidecar");
  common(evaluate, false);

  auto* grid = app.add_subcommand("grid", "Run the synthetic experiment grid");
  grid->add_option("--config", config, "Grid config (JSON)")->required();
  common(grid, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  auto given = [](const CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  const CLI::App* sub = app.get_subcommands().front();
  Overrides o;
  if (given(sub, "--seed")) o.seed = seed;
  if (sub->get_option_no_throw("--threads") && given(sub, "--threads")) o.threads = threads;
  if (sub->get_option_no_throw("--budget") && given(sub, "--budget")) o.budget = budget;
  if (given(sub, "--output-dir")) o.output_dir = fs::path(output_dir);
  if (sub->get_option_no_throw("--algorithms") && given(sub, "--algorithms")) o.algorithms = algorithms;

  if (sub == match) return cmd_match(config, o, out, err);
  if (sub == simulate) return cmd_simulate(config, o, out, err);
  if (sub == estimate) return cmd_estimate(config, bound, given(sub, "--rate") ? std::optional(rate) : std::nullopt, o, out, err);
  if (sub == evaluate)
    return cmd_evaluate(config, solutions.empty() ? std::nullopt : std::optional<fs::path>(solutions),
                        truth.empty() ? std::nullopt : std::optional<fs::path>(truth), o, out, err);
  return cmd_grid(config, o, out, err);
}

}  // namespace groupmatch
