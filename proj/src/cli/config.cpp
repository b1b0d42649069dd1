#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "groupmatch/cli.hpp"

namespace groupmatch {
namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{}: expected an object", where));
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

template <class T>
T get(const json& obj, std::string_view key, std::string_view where) {
  const auto& v = obj.at(std::string(key));
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw ConfigError(fmt::format("{}.{}: expected a nonnegative integer", where, key));
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(fmt::format("{}.{}: expected a number", where, key));
    }
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("{}.{}: wrong type ({})", where, key, v.type_name()));
  }
}

template <class T>
std::optional<T> get_opt(const json& obj, std::string_view key, std::string_view where) {
  if (!obj.contains(std::string(key)) || obj.at(std::string(key)).is_null()) return std::nullopt;
  return get<T>(obj, key, where);
}

std::vector<std::string> string_list(const json& obj, std::string_view key, std::string_view where) {
  std::vector<std::string> out;
  if (!obj.contains(std::string(key))) return out;
  const auto& v = obj.at(std::string(key));
  if (!v.is_array()) throw ConfigError(fmt::format("{}.{}: expected a list of strings", where, key));
  for (const auto& item : v) {
    if (!item.is_string()) throw ConfigError(fmt::format("{}.{}: expected a list of strings", where, key));
    out.push_back(item.get<std::string>());
  }
  return out;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("invalid JSON: {}", e.what()));
  }
}

AlgorithmSpec parse_algorithm_entry(const json& v, std::string_view where) {
  AlgorithmSpec spec;
  std::string name;
  if (v.is_string()) {
    name = v.get<std::string>();
  } else {
    check_keys(v, {"name", "iterations", "lookahead", "rho", "max_removed"}, where);
    if (!v.contains("name")) throw ConfigError(fmt::format("{}: missing 'name'", where));
    name = get<std::string>(v, "name", where);
    spec.iterations = get_opt<std::size_t>(v, "iterations", where);
    spec.lookahead = get_opt<std::size_t>(v, "lookahead", where);
    spec.rho = get_opt<std::size_t>(v, "rho", where);
    spec.max_removed = get_opt<std::size_t>(v, "max_removed", where);
  }
  auto alg = parse_algorithm(name);
  if (!alg) throw ConfigError(fmt::format("{}: unknown algorithm '{}'", where, name));
  spec.algorithm = *alg;
  if (spec.iterations && *spec.iterations == 0) throw ConfigError(fmt::format("{}: iterations must be at least 1", where));
  if (spec.lookahead && *spec.lookahead == 0) throw ConfigError(fmt::format("{}: lookahead must be at least 1", where));
  if (spec.rho && *spec.rho == 0) throw ConfigError(fmt::format("{}: rho must be at least 1", where));
  return spec;
}

json algorithm_json(const AlgorithmSpec& a) {
  json j;
  j["name"] = std::string(algorithm_name(a.algorithm));
  if (a.iterations) j["iterations"] = *a.iterations;
  if (a.lookahead) j["lookahead"] = *a.lookahead;
  if (a.rho) j["rho"] = *a.rho;
  if (a.max_removed) j["max_removed"] = *a.max_removed;
  return j;
}

std::vector<AlgorithmSpec> parse_algorithms(const json& root, std::string_view where) {
  std::vector<AlgorithmSpec> out;
  if (!root.contains("algorithms")) return {AlgorithmSpec{}};
  const auto& list = root.at("algorithms");
  if (!list.is_array() || list.empty()) throw ConfigError(fmt::format("{}: expected a nonempty list", where));
  for (std::size_t i = 0; i < list.size(); ++i)
    out.push_back(parse_algorithm_entry(list[i], fmt::format("{}[{}]", where, i)));
  return out;
}

SearchParams parse_search(const json& root, std::uint64_t* seed) {
  SearchParams p;
  if (!root.contains("search")) return p;
  const auto& s = root.at("search");
  constexpr std::string_view where = "search";
  check_keys(s,
             {"seed", "threads", "budget", "rho_revert_threshold", "pool_cap", "schedule", "timeout_seconds",
              "iterations", "lookahead", "rho", "max_removed"},
             where);
  if (auto v = get_opt<std::uint64_t>(s, "seed", where); v && seed) *seed = *v;
  if (auto v = get_opt<unsigned>(s, "threads", where)) p.threads = *v;
  if (auto v = get_opt<std::uint64_t>(s, "budget", where)) p.budget = *v;
  if (auto v = get_opt<double>(s, "rho_revert_threshold", where)) p.rho_revert_threshold = *v;
  if (auto v = get_opt<std::size_t>(s, "pool_cap", where)) p.pool_cap = *v;
  if (auto v = get_opt<std::string>(s, "schedule", where)) {
    if (*v == "linear") p.schedule = KeepSchedule::linear;
    else if (*v == "geometric") p.schedule = KeepSchedule::geometric;
    else throw ConfigError(fmt::format("search.schedule: expected 'linear' or 'geometric', got '{}'", *v));
  }
  if (auto v = get_opt<double>(s, "timeout_seconds", where)) p.timeout_seconds = *v;
  if (auto v = get_opt<std::size_t>(s, "iterations", where)) p.iterations = *v;
  if (auto v = get_opt<std::size_t>(s, "lookahead", where)) p.lookahead = *v;
  if (auto v = get_opt<std::size_t>(s, "rho", where)) p.rho = *v;
  if (auto v = get_opt<std::size_t>(s, "max_removed", where)) p.max_removed = *v;
  return p;
}

void apply_overrides(json& root, const Overrides& o) {
  if (o.seed || o.threads || o.budget) {
    if (!root.contains("search")) root["search"] = json::object();
    auto& s = root["search"];
    if (!s.is_object()) throw ConfigError("search: expected an object");
    if (o.seed) s["seed"] = *o.seed;
    if (o.threads) s["threads"] = *o.threads;
    if (o.budget) s["budget"] = *o.budget;
  }
  if (o.output_dir) root["output_dir"] = o.output_dir->string();
  if (o.algorithms) {
    json list = json::array();
    for (const auto& a : parse_algorithm_list(*o.algorithms)) list.push_back(algorithm_json(a));
    root["algorithms"] = list;
  }
}

Interval parse_interval(const json& obj, std::string_view key, Interval fallback) {
  if (!obj.contains(std::string(key))) return fallback;
  const auto& v = obj.at(std::string(key));
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(fmt::format("{}: expected [low, high]", key));
  return {v[0].get<double>(), v[1].get<double>()};
}

// Output location does not affect results, so it is left out of the hash.
std::string canonical_form(json root) {
  root.erase("output_dir");
  return root.dump();
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return fmt::format("{:016x}", h);
}

std::vector<AlgorithmSpec> parse_algorithm_list(std::string_view text) {
  std::vector<AlgorithmSpec> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = text.substr(start, end - start);
    start = end + 1;
    if (item.empty()) continue;
    std::string_view name = item;
    std::optional<std::size_t> number;
    if (auto colon = item.find(':'); colon != std::string_view::npos) {
      name = item.substr(0, colon);
      std::size_t v = 0;
      auto tail = item.substr(colon + 1);
      auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), v);
      if (ec != std::errc() || ptr != tail.data() + tail.size() || v == 0)
        throw ConfigError(fmt::format("algorithm '{}': expected a positive integer after ':'", item));
      number = v;
    }
    auto alg = parse_algorithm(name);
    if (!alg) throw ConfigError(fmt::format("unknown algorithm '{}'", name));
    AlgorithmSpec spec;
    spec.algorithm = *alg;
    if (number) {
      switch (*alg) {
        case Algorithm::random: spec.iterations = number; break;
        case Algorithm::h3:
        case Algorithm::h4: spec.lookahead = number; break;
        case Algorithm::exhaustive: spec.max_removed = number; break;
        case Algorithm::greedy: throw ConfigError("greedy takes no parameter");
      }
    }
    out.push_back(spec);
  }
  if (out.empty()) throw ConfigError("empty algorithm list");
  return out;
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir,
                           const Overrides& overrides) {
  json root = parse_json(json_text);
  check_keys(root, {"dataset", "criteria", "balance", "constraints", "algorithms", "search", "output_dir"}, "config");
  apply_overrides(root, overrides);
  RunConfig rc;

  if (!root.contains("dataset")) throw ConfigError("config: missing 'dataset'");
  const auto& ds = root.at("dataset");
  check_keys(ds, {"path", "id_column", "group_column", "covariates", "delimiter"}, "dataset");
  if (!ds.contains("path")) throw ConfigError("dataset: missing 'path'");
  rc.dataset_path = get<std::string>(ds, "path", "dataset");
  if (rc.dataset_path.is_relative()) rc.dataset_path = base_dir / rc.dataset_path;
  if (auto v = get_opt<std::string>(ds, "id_column", "dataset")) rc.schema.id_column = *v;
  if (auto v = get_opt<std::string>(ds, "group_column", "dataset")) rc.schema.group_column = *v;
  rc.schema.covariate_columns = string_list(ds, "covariates", "dataset");
  if (auto v = get_opt<std::string>(ds, "delimiter", "dataset")) {
    if (v->size() != 1) throw ConfigError("dataset.delimiter: expected a single character");
    rc.schema.delimiter = (*v)[0];
  }

  if (!root.contains("criteria") || !root.at("criteria").is_array())
    throw ConfigError("config: 'criteria' must be a list");
  const auto& crit = root.at("criteria");
  for (std::size_t i = 0; i < crit.size(); ++i) {
    const std::string where = fmt::format("criteria[{}]", i);
    check_keys(crit[i], {"test", "covariate", "groups", "alpha"}, where);
    if (!crit[i].contains("test") || !crit[i].contains("covariate"))
      throw ConfigError(fmt::format("{}: 'test' and 'covariate' are required", where));
    CriterionSpec c;
    c.test = get<std::string>(crit[i], "test", where);
    c.covariate = get<std::string>(crit[i], "covariate", where);
    c.groups = string_list(crit[i], "groups", where);
    if (auto a = get_opt<double>(crit[i], "alpha", where)) c.alpha = *a;
    rc.match.criteria.criteria.push_back(std::move(c));
  }

  if (root.contains("balance")) {
    const auto& b = root.at("balance");
    check_keys(b, {"mode", "target", "order"}, "balance");
    const std::string mode = b.contains("mode") ? get<std::string>(b, "mode", "balance") : "proportions";
    if (mode == "proportions") {
      if (b.contains("order")) throw ConfigError("balance: 'order' applies to precedence mode only");
      ProportionsBalance pb;
      if (b.contains("target")) {
        const auto& t = b.at("target");
        if (!t.is_object()) throw ConfigError("balance.target: expected an object of group proportions");
        for (const auto& [label, w] : t.items()) {
          if (!w.is_number()) throw ConfigError(fmt::format("balance.target.{}: expected a number", label));
          pb.target[label] = w.get<double>();
        }
      }
      rc.match.balance = pb;
    } else if (mode == "precedence") {
      if (b.contains("target")) throw ConfigError("balance: 'target' applies to proportions mode only");
      rc.match.balance = PrecedenceBalance{string_list(b, "order", "balance")};
    } else {
      throw ConfigError(fmt::format("balance.mode: expected 'proportions' or 'precedence', got '{}'", mode));
    }
  }

  if (root.contains("constraints")) {
    const auto& c = root.at("constraints");
    constexpr std::string_view where = "constraints";
    check_keys(c, {"locked_groups", "max_removals", "max_removals_per_group", "min_group_size"}, where);
    for (auto& g : string_list(c, "locked_groups", where)) rc.match.constraints.locked_groups.insert(g);
    rc.match.constraints.max_total_removals = get_opt<std::size_t>(c, "max_removals", where);
    if (auto v = get_opt<std::size_t>(c, "min_group_size", where)) rc.match.constraints.min_group_size = *v;
    if (c.contains("max_removals_per_group")) {
      const auto& m = c.at("max_removals_per_group");
      if (!m.is_object()) throw ConfigError("constraints.max_removals_per_group: expected an object");
      for (const auto& [label, v] : m.items()) {
        if (!v.is_number_unsigned())
          throw ConfigError(fmt::format("constraints.max_removals_per_group.{}: expected a nonnegative integer", label));
        rc.match.constraints.max_group_removals[label] = v.get<std::size_t>();
      }
    }
  }

  rc.algorithms = parse_algorithms(root, "algorithms");
  rc.match.params = parse_search(root, &rc.match.seed);
  if (auto v = get_opt<std::string>(root, "output_dir", "config")) {
    rc.output_dir = *v;
    if (rc.output_dir->is_relative()) rc.output_dir = base_dir / *rc.output_dir;
  }
  rc.canonical = canonical_form(root);
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.parent_path(), overrides);
}

GridConfig parse_grid_config(std::string_view json_text, const Overrides& overrides) {
  json root = parse_json(json_text);
  check_keys(root,
             {"item_counts", "draws_per_combination", "replications", "master_seed", "alpha", "workers", "use_mean",
              "algorithms", "search", "output_dir"},
             "grid");
  apply_overrides(root, overrides);
  GridConfig g;
  constexpr std::string_view where = "grid";
  if (root.contains("item_counts")) {
    const auto& v = root.at("item_counts");
    if (!v.is_array() || v.empty()) throw ConfigError("grid.item_counts: expected a nonempty list");
    g.item_counts.clear();
    for (const auto& x : v) {
      if (!x.is_number_unsigned()) throw ConfigError("grid.item_counts: expected positive integers");
      g.item_counts.push_back(x.get<std::size_t>());
    }
  }
  if (auto v = get_opt<std::size_t>(root, "draws_per_combination", where)) g.draws_per_combination = *v;
  if (auto v = get_opt<std::size_t>(root, "replications", where)) g.replications = *v;
  if (auto v = get_opt<std::uint64_t>(root, "master_seed", where)) g.master_seed = *v;
  if (auto v = get_opt<double>(root, "alpha", where)) g.alpha = *v;
  if (auto v = get_opt<unsigned>(root, "workers", where)) g.workers = *v;
  if (auto v = get_opt<bool>(root, "use_mean", where)) g.use_mean = *v;
  if (!(g.alpha > 0.0 && g.alpha < 1.0)) throw ConfigError(fmt::format("grid.alpha {} must lie in (0, 1)", g.alpha));
  if (g.replications == 0) throw ConfigError("grid.replications must be at least 1");
  g.algorithms = parse_algorithms(root, "algorithms");
  std::uint64_t seed_override = g.master_seed;
  g.params = parse_search(root, &seed_override);
  g.master_seed = seed_override;
  if (auto v = get_opt<std::string>(root, "output_dir", where)) g.output_dir = *v;
  g.canonical = canonical_form(root);
  return g;
}

SyntheticSpec parse_synthetic_spec(std::string_view json_text) {
  json root = parse_json(json_text);
  constexpr std::string_view where = "spec";
  check_keys(root,
             {"n_items", "n_intruders", "n_covariates", "n_shifted_covariates", "group_split", "mean_range",
              "variance_factor_range", "shift_range", "eigenvalue_range", "shift_scale", "acceptance_checks",
              "basic_p", "all_p_below", "max_attempts", "seed"},
             where);
  SyntheticSpec s;
  if (auto v = get_opt<std::size_t>(root, "n_items", where)) s.n_items = *v;
  if (auto v = get_opt<std::size_t>(root, "n_intruders", where)) s.n_intruders = *v;
  if (auto v = get_opt<std::size_t>(root, "n_covariates", where)) s.n_covariates = *v;
  if (auto v = get_opt<std::size_t>(root, "n_shifted_covariates", where)) s.n_shifted_covariates = *v;
  if (root.contains("group_split")) {
    const auto& gs = root.at("group_split");
    if (!gs.is_object()) throw ConfigError("spec.group_split: expected an object of group shares");
    s.group_split.clear();
    for (const auto& [label, w] : gs.items()) {
      if (!w.is_number()) throw ConfigError(fmt::format("spec.group_split.{}: expected a number", label));
      s.group_split.emplace_back(label, w.get<double>());
    }
  }
  s.mean_range = parse_interval(root, "mean_range", s.mean_range);
  s.variance_factor_range = parse_interval(root, "variance_factor_range", s.variance_factor_range);
  s.shift_range = parse_interval(root, "shift_range", s.shift_range);
  s.eigenvalue_range = parse_interval(root, "eigenvalue_range", s.eigenvalue_range);
  s.basic_p = parse_interval(root, "basic_p", s.basic_p);
  if (auto v = get_opt<std::string>(root, "shift_scale", where)) {
    if (*v == "sd") s.shift_scale = ShiftScale::sd;
    else if (*v == "variance") s.shift_scale = ShiftScale::variance;
    else throw ConfigError(fmt::format("spec.shift_scale: expected 'sd' or 'variance', got '{}'", *v));
  }
  if (auto v = get_opt<bool>(root, "acceptance_checks", where)) s.acceptance_checks = *v;
  if (auto v = get_opt<double>(root, "all_p_below", where)) s.all_p_below = *v;
  if (auto v = get_opt<std::size_t>(root, "max_attempts", where)) s.max_attempts = *v;
  if (auto v = get_opt<std::uint64_t>(root, "seed", where)) s.seed = *v;
  return s;
}

}  // namespace groupmatch
