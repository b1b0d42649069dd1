#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "groupmatch/criteria.hpp"
#include "groupmatch/dataset.hpp"
#include "groupmatch/search.hpp"
#include "groupmatch/synthgen.hpp"

namespace groupmatch {

inline constexpr std::string_view kVersion = "0.1.0";

/// Command-line values that override config fields.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> budget;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::string> algorithms;  // comma-separated names
};

/// A parsed `match`/`estimate`/`evaluate` config.
struct RunConfig {
  std::filesystem::path dataset_path;
  CsvSchema schema;
  MatchConfig match;
  std::vector<AlgorithmSpec> algorithms;
  std::optional<std::filesystem::path> output_dir;
  /// Canonical JSON of the effective config, overrides applied, output_dir omitted.
  std::string canonical;
};

/// Strict JSON config parsing: unknown keys and wrong types raise ConfigError.
/// Relative dataset paths resolve against `base_dir`.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir,
                           const Overrides& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides = {});

/// Experiment grid over generated parameter sets.
struct GridConfig {
  std::vector<std::size_t> item_counts{100};
  std::size_t draws_per_combination = 2;
  std::size_t replications = 5;
  std::uint64_t master_seed = 0;
  double alpha = 0.2;
  unsigned workers = 1;
  bool use_mean = false;
  std::vector<AlgorithmSpec> algorithms;
  SearchParams params;
  std::optional<std::filesystem::path> output_dir;
  std::string canonical;
};

GridConfig parse_grid_config(std::string_view json_text, const Overrides& overrides = {});

/// Parses a synthetic-data spec (same strictness).
SyntheticSpec parse_synthetic_spec(std::string_view json_text);

/// Parses a comma-separated algorithm list such as "greedy,h3:2,random:1000".
/// The number after ':' is the lookahead for h3/h4, the iteration count for
/// random and the depth bound for exhaustive.
std::vector<AlgorithmSpec> parse_algorithm_list(std::string_view text);

/// 64-bit FNV-1a, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Exit codes: 0 matched, 2 no match found, 1 usage or data error.
int cmd_match(const std::filesystem::path& config, const Overrides& overrides, std::ostream& out,
              std::ostream& err);
int cmd_simulate(const std::filesystem::path& spec, const Overrides& overrides, std::ostream& out,
                 std::ostream& err);
int cmd_estimate(const std::filesystem::path& config, std::size_t bound, std::optional<double> rate,
                 const Overrides& overrides, std::ostream& out, std::ostream& err);
int cmd_evaluate(const std::filesystem::path& config, const std::optional<std::filesystem::path>& solutions,
                 const std::optional<std::filesystem::path>& truth, const Overrides& overrides, std::ostream& out,
                 std::ostream& err);
int cmd_grid(const std::filesystem::path& config, const Overrides& overrides, std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace groupmatch
