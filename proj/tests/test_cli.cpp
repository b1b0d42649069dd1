#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "groupmatch/cli.hpp"
#include "support.hpp"

using namespace groupmatch;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "groupmatch");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("groupmatch_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

void write_two_group_csv(const fs::path& p, std::size_t per_group, double shift, std::uint64_t seed) {
  save_dataset(p, testing::random_two_group(per_group, per_group, 2, shift, seed));
}

std::string config(const std::string& extra = "", double alpha = 0.2) {
  return R"({"dataset": {"path": "data.csv"},
  "criteria": [{"test": "welch_t", "covariate": "x1", "alpha": )" +
         std::to_string(alpha) + R"(},
               {"test": "anderson_darling", "covariate": "x2"}])" +
         extra + "}";
}

}  // namespace

TEST_CASE("already matched data exits 0 and keeps every id") {
  TempDir dir("matched");
  save_dataset(dir / "data.csv", testing::make_dataset({"A", "A", "A", "B", "B", "B"}, {{1, 2, 3, 1, 2, 3}, {4, 5, 6, 4, 5, 6}}));
  spit(dir / "run.json", config());
  const Run r = cli({"match", "--config", (dir / "run.json").string(), "--output-dir", (dir / "out").string()});
  CHECK(r.code == 0);
  CHECK(slurp(dir / "out/solutions.txt") == "s0,s1,s2,s3,s4,s5\n");
  CHECK(fs::exists(dir / "out/metrics.csv"));
  CHECK(fs::exists(dir / "out/trace.jsonl"));
  CHECK(slurp(dir / "out/manifest.json").find("\"config_hash\"") != std::string::npos);
}

TEST_CASE("invalid alpha exits 1 naming the criterion") {
  TempDir dir("alpha");
  write_two_group_csv(dir / "data.csv", 10, 0.0, 1);
  spit(dir / "run.json", config("", 1.5));
  const Run r = cli({"match", "--config", (dir / "run.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("criterion 1 (welch_t on x1 across all groups)") != std::string::npos);
  CHECK(r.err.find("alpha 1.5") != std::string::npos);
}

TEST_CASE("strict config parsing rejects unknown keys and wrong types") {
  TempDir dir("strict");
  write_two_group_csv(dir / "data.csv", 10, 0.0, 1);
  spit(dir / "typo.json", config(R"(, "serach": {"seed": 1})"));
  Run r = cli({"match", "--config", (dir / "typo.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("unknown key 'serach'") != std::string::npos);
  spit(dir / "type.json", config(R"(, "search": {"lookahead": "two"})"));
  r = cli({"match", "--config", (dir / "type.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("search.lookahead") != std::string::npos);
  spit(dir / "bad.json", "{ not json");
  CHECK(cli({"match", "--config", (dir / "bad.json").string()}).code == 1);
  CHECK(cli({"match", "--config", (dir / "missing.json").string()}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"match"}).code == 1);
}

TEST_CASE("no match found exits 2") {
  TempDir dir("nomatch");
  write_two_group_csv(dir / "data.csv", 20, 2.0, 2);
  spit(dir / "run.json", config(R"(, "constraints": {"max_removals": 1})"));
  const Run r = cli({"match", "--config", (dir / "run.json").string(), "--output-dir", (dir / "out").string()});
  CHECK(r.code == 2);
  CHECK(r.out.find("no match") != std::string::npos);
}

TEST_CASE("several algorithms report the overall best") {
  TempDir dir("multi");
  write_two_group_csv(dir / "data.csv", 25, 0.6, 3);
  spit(dir / "run.json", config());
  const Run r = cli({"match", "--config", (dir / "run.json").string(), "--output-dir", (dir / "out").string(),
                     "--algorithms", "greedy,h3:2,random:200", "--seed", "5"});
  CHECK(r.code == 0);
  const std::string metrics = slurp(dir / "out/metrics.csv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 4);
  CHECK(metrics.find("\"h3(L=2)\"") != std::string::npos);
  CHECK(r.out.find("best: ") != std::string::npos);
  CHECK(slurp(dir / "out/trace.jsonl").find("\"r_after\"") != std::string::npos);
}

TEST_CASE("solutions and manifest are identical across thread counts") {
  TempDir dir("threads");
  write_two_group_csv(dir / "data.csv", 40, 0.5, 4);
  spit(dir / "run.json", config(R"(, "algorithms": ["greedy", {"name": "h4", "lookahead": 2}, "random"])"));
  const auto base = (dir / "run.json").string();
  CHECK(cli({"match", "--config", base, "--threads", "1", "--output-dir", (dir / "t1").string()}).code == 0);
  CHECK(cli({"match", "--config", base, "--threads", "4", "--output-dir", (dir / "t4").string()}).code == 0);
  CHECK(slurp(dir / "t1/solutions.txt") == slurp(dir / "t4/solutions.txt"));
  CHECK(cli({"match", "--config", base, "--threads", "1", "--output-dir", (dir / "again").string()}).code == 0);
  CHECK(slurp(dir / "t1/manifest.json") == slurp(dir / "again/manifest.json"));
}

TEST_CASE("simulate writes dataset and truth deterministically") {
  TempDir dir("simulate");
  spit(dir / "spec.json", R"({"n_items": 100, "n_intruders": 10, "seed": 8})");
  const auto spec = (dir / "spec.json").string();
  CHECK(cli({"simulate", "--config", spec, "--output-dir", (dir / "a").string()}).code == 0);
  CHECK(cli({"simulate", "--config", spec, "--output-dir", (dir / "b").string()}).code == 0);
  const std::string data = slurp(dir / "a/dataset.csv"), truth = slurp(dir / "a/truth.csv");
  CHECK(std::count(data.begin(), data.end(), '\n') == 101);
  CHECK(std::count(truth.begin(), truth.end(), '\n') == 101);
  std::size_t flags = 0;
  for (std::size_t pos = 0; (pos = truth.find(",1\n", pos)) != std::string::npos; ++pos) ++flags;
  CHECK(flags == 10);
  CHECK(data == slurp(dir / "b/dataset.csv"));
  CHECK(truth == slurp(dir / "b/truth.csv"));

  spit(dir / "bad.json", R"({"n_items": 10, "n_intruders": 10})");
  const Run bad = cli({"simulate", "--config", (dir / "bad.json").string(), "--output-dir", (dir / "c").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("n_intruders") != std::string::npos);
}

TEST_CASE("estimate prints counts, durations and verdicts") {
  TempDir dir("estimate");
  write_two_group_csv(dir / "data.csv", 20, 0.0, 5);
  spit(dir / "run.json", config());
  const auto cfg = (dir / "run.json").string();
  Run r = cli({"estimate", "--config", cfg, "--bound", "5", "--rate", "1000"});
  CHECK(r.code == 0);
  CHECK(r.out.find("760099") != std::string::npos);
  CHECK(r.out.find("≈ 13 minutes") != std::string::npos);
  r = cli({"estimate", "--config", cfg, "--bound", "3", "--rate", "1000"});
  CHECK(r.out.find("< 11 seconds") != std::string::npos);
  r = cli({"estimate", "--config", cfg, "--bound", "0"});
  CHECK(r.out.find("1 configuration, instantaneous") != std::string::npos);
  CHECK(cli({"estimate", "--config", cfg, "--bound", "41"}).code == 1);

  save_dataset(dir / "data.csv", testing::random_two_group(56, 57, 2, 0.0, 6));
  r = cli({"estimate", "--config", cfg, "--bound", "17", "--rate", "1e6"});
  CHECK(r.code == 0);
  CHECK(r.out.find("infeasible") != std::string::npos);
}

TEST_CASE("evaluate scores a solutions file against truth") {
  TempDir dir("evaluate");
  spit(dir / "spec.json", R"({"n_items": 100, "n_covariates": 2, "seed": 9})");
  REQUIRE(cli({"simulate", "--config", (dir / "spec.json").string(), "--output-dir", dir.path().string()}).code == 0);
  spit(dir / "run.json", R"({"dataset": {"path": "dataset.csv"},
    "criteria": [{"test": "welch_t", "covariate": "c1"}, {"test": "welch_t", "covariate": "c2"}],
    "output_dir": "res"})");
  REQUIRE(cli({"match", "--config", (dir / "run.json").string()}).code == 0);
  const Run r = cli({"evaluate", "--config", (dir / "run.json").string(), "--solutions",
                     (dir / "res/solutions.txt").string(), "--truth", (dir / "truth.csv").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("matched") != std::string::npos);
  CHECK(r.out.find("excluded intruders") != std::string::npos);
  const Run full = cli({"evaluate", "--config", (dir / "run.json").string()});
  CHECK(full.code == 2);
}

TEST_CASE("algorithm list syntax") {
  const auto list = parse_algorithm_list("greedy,h3:2,random:1000,exhaustive:4,heuristic4");
  REQUIRE(list.size() == 5);
  CHECK(list[1].lookahead == std::optional<std::size_t>{2});
  CHECK(list[2].iterations == std::optional<std::size_t>{1000});
  CHECK(list[3].max_removed == std::optional<std::size_t>{4});
  CHECK(list[4].algorithm == Algorithm::h4);
  CHECK_THROWS_AS(parse_algorithm_list("greedy:3"), ConfigError);
  CHECK_THROWS_AS(parse_algorithm_list("h3:0"), ConfigError);
  CHECK_THROWS_AS(parse_algorithm_list(""), ConfigError);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("the installed binary reports exit codes") {
  const std::string bin = GROUPMATCH_CLI_PATH;
  CHECK(std::system((bin + " --version > /dev/null").c_str()) == 0);
  CHECK(WEXITSTATUS(std::system((bin + " match --config /nonexistent.json 2> /dev/null").c_str())) == 1);
}
