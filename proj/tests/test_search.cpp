#include <doctest.h>

#include <random>

#include "groupmatch/search.hpp"
#include "support.hpp"

using namespace groupmatch;

namespace {

MatchConfig welch_config(const Dataset& d, double alpha = 0.2) {
  MatchConfig cfg;
  for (const auto& name : d.covariate_names()) cfg.criteria.criteria.push_back({"welch_t", name, {}, alpha});
  return cfg;
}

Dataset four_groups(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::string> groups;
  std::vector<std::vector<double>> cols(2);
  const char* labels[] = {"ALI", "ALN", "SLI", "TD"};
  const int sizes[] = {9, 8, 6, 12};
  for (int g = 0; g < 4; ++g)
    for (int i = 0; i < sizes[g]; ++i) {
      groups.push_back(labels[g]);
      cols[0].push_back(z(rng) + 0.4 * g);
      cols[1].push_back(z(rng) - 0.3 * g);
    }
  return testing::make_dataset(groups, std::move(cols));
}

MatchConfig pairwise_config() {
  MatchConfig cfg;
  const std::vector<std::pair<std::string, std::string>> pairs{{"TD", "ALN"}, {"TD", "ALI"}, {"SLI", "ALI"}};
  for (const auto& [a, b] : pairs)
    for (const char* cov : {"x1", "x2"}) cfg.criteria.criteria.push_back({"welch_t", cov, {a, b}, 0.2});
  cfg.constraints.locked_groups = {"SLI"};
  cfg.balance = PrecedenceBalance{{"SLI", "ALI", "ALN", "TD"}};
  return cfg;
}

std::vector<std::vector<std::string>> removal_trace(const MatchResult& r) {
  std::vector<std::vector<std::string>> out;
  for (const auto& t : r.trace) out.push_back(t.removed);
  return out;
}

}  // namespace

TEST_CASE("exhaustive search matches brute-force enumeration") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const std::size_t n_a = 5 + seed % 4, n_b = 5 + (seed / 2) % 4;
    const Dataset d = testing::random_two_group(n_a, n_b, 1, 1.0, 300 + seed);
    const auto oracle = testing::brute_force_best(d, 0.2);
    const MatchResult r = exhaustive_search(d, welch_config(d));
    CAPTURE(seed);
    REQUIRE(oracle.has_value() == r.success);
    if (!oracle) continue;
    CHECK(r.best().kept_count() == *oracle);
    for (const auto& s : r.solutions) {
      CHECK(s.kept_count() == *oracle);
      CHECK(*compute_r(d, s, welch_config(d).criteria) >= 1.0);
    }
  }
}

TEST_CASE("exhaustive search respects the budget and depth bound") {
  const Dataset d = testing::random_two_group(10, 10, 1, 2.0, 5);
  MatchConfig cfg = welch_config(d);
  cfg.params.budget = 200;
  CHECK_THROWS_AS(exhaustive_search(d, cfg), BudgetExceeded);
  cfg.params.budget = 100'000'000;
  cfg.params.max_removed = 1;
  const MatchResult r = exhaustive_search(d, cfg);
  CHECK_FALSE(r.success);
  CHECK(r.best().removed_count() <= 1);
}

TEST_CASE("already matched data needs no removals") {
  const Dataset d = testing::make_dataset({"A", "A", "A", "B", "B", "B"}, {{1, 2, 3, 1, 2, 3}});
  const MatchConfig cfg = welch_config(d);
  for (const Algorithm a : {Algorithm::random, Algorithm::greedy, Algorithm::h3, Algorithm::h4, Algorithm::exhaustive}) {
    const MatchResult r = run_algorithm(d, cfg, {a});
    CHECK(r.success);
    CHECK(r.best().removed_count() == 0);
  }
}

TEST_CASE("every algorithm returns feasible states honouring locks and bounds") {
  const Dataset d = four_groups(3);
  MatchConfig cfg = pairwise_config();
  cfg.constraints.max_group_removals = {{"TD", 4}};
  cfg.params.iterations = 200;
  const FeasibilityRules rules(d, cfg.constraints);
  for (const Algorithm a : {Algorithm::random, Algorithm::greedy, Algorithm::h3, Algorithm::h4}) {
    for (std::size_t lookahead : {1u, 2u}) {
      cfg.params.lookahead = lookahead;
      cfg.seed = 7;
      const MatchResult r = run_algorithm(d, cfg, {a});
      CAPTURE(r.algorithm);
      for (const auto& s : r.solutions) {
        CHECK(rules.feasible(s));
        CHECK(s.kept_in_group(*d.find_group("SLI")) == 6);
        CHECK(d.group_size(*d.find_group("TD")) - s.kept_in_group(*d.find_group("TD")) <= 4);
        const auto fresh = compute_r(d, s, cfg.criteria);
        if (r.success) CHECK((fresh && *fresh >= 1.0));
      }
    }
  }
}

TEST_CASE("greedy takes the best single removal at every step") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = four_groups(40 + seed);
    const MatchConfig cfg = pairwise_config();
    const MatchResult r = greedy_search(d, cfg);
    const FeasibilityRules rules(d, cfg.constraints);
    const Ranker ranker(d, cfg.balance);
    SubsetState s(d);
    for (const auto& step : r.trace) {
      REQUIRE(step.rows.size() == 1);
      double best_r = -1;
      std::optional<SolutionRank> best_success;
      for (std::size_t row : rules.removable(s)) {
        SubsetState t = s;
        t.remove(d, row);
        const auto rr = compute_r(d, t, cfg.criteria);
        if (!rr) continue;
        best_r = std::max(best_r, *rr);
        if (*rr >= 1.0) {
          const auto rank = ranker.rank(t, *rr);
          if (!best_success || compare_solutions(rank, *best_success) == Ordering::better) best_success = rank;
        }
      }
      s.remove(d, step.rows[0]);
      const double chosen = *compute_r(d, s, cfg.criteria);
      if (best_success) {
        CHECK(chosen >= 1.0);
        CHECK(compare_solutions(ranker.rank(s, chosen), *best_success) == Ordering::equivalent);
      } else {
        CHECK(r_ties(chosen, best_r));
      }
    }
  }
}

TEST_CASE("L = 1 lookahead variants reproduce greedy") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Dataset d = testing::random_two_group(20, 20, 2, 0.8, 500 + seed);
    MatchConfig cfg = welch_config(d);
    cfg.seed = seed;
    const auto g = greedy_search(d, cfg);
    const auto h3 = lookahead_search(d, cfg, LookaheadVariant::h3);
    const auto h4 = lookahead_search(d, cfg, LookaheadVariant::h4);
    CHECK(removal_trace(g) == removal_trace(h3));
    CHECK(removal_trace(g) == removal_trace(h4));
  }
}

TEST_CASE("two-step lookahead escapes the trap instance") {
  const Dataset d = testing::trap_instance();
  MatchConfig cfg = welch_config(d);
  CHECK(testing::brute_force_best(d, 0.2) == std::optional<std::size_t>{10});
  const auto greedy = greedy_search(d, cfg);
  REQUIRE(greedy.success);
  CHECK(greedy.best().removed_count() >= 3);
  cfg.params.lookahead = 2;
  for (auto variant : {LookaheadVariant::h3, LookaheadVariant::h4}) {
    const auto r = lookahead_search(d, cfg, variant);
    REQUIRE(r.success);
    CHECK(r.best().removed_count() == 2);
    CHECK(removal_trace(lookahead_search(d, cfg, variant)) == removal_trace(r));
  }
}

TEST_CASE("searches are deterministic across thread counts") {
  const Dataset d = four_groups(77);
  MatchConfig cfg = pairwise_config();
  cfg.seed = 99;
  cfg.params.iterations = 300;
  for (const AlgorithmSpec spec : {AlgorithmSpec{Algorithm::random}, AlgorithmSpec{Algorithm::greedy},
                                   AlgorithmSpec{Algorithm::h3, std::nullopt, 2}, AlgorithmSpec{Algorithm::h4, std::nullopt, 2}}) {
    cfg.params.threads = 1;
    const auto one = run_algorithm(d, cfg, spec);
    cfg.params.threads = 4;
    const auto four = run_algorithm(d, cfg, spec);
    CAPTURE(one.algorithm);
    CHECK(one.solutions == four.solutions);
    CHECK(removal_trace(one) == removal_trace(four));
    CHECK(one.evaluations == four.evaluations);
  }
}

TEST_CASE("random search keeps locked groups and depends on the seed only") {
  const Dataset d = four_groups(8);
  MatchConfig cfg = pairwise_config();
  cfg.params.iterations = 50;
  cfg.seed = 1;
  const auto a = random_search(d, cfg);
  const auto b = random_search(d, cfg);
  CHECK(a.solutions == b.solutions);
  CHECK(a.best().kept_in_group(*d.find_group("SLI")) == 6);
  CHECK(a.parameters.find("iterations=50") != std::string::npos);
}

TEST_CASE("batched removals record several rows per step and still succeed") {
  const Dataset d = testing::random_two_group(150, 150, 1, 0.5, 17);
  MatchConfig cfg = welch_config(d);
  cfg.params.rho = 10;
  cfg.params.rho_revert_threshold = 0.5;
  const auto r = lookahead_search(d, cfg, LookaheadVariant::h3);
  CHECK(r.success);
  bool any_batch = false;
  std::size_t removed = 0;
  for (const auto& t : r.trace) {
    any_batch = any_batch || (t.batch && t.rows.size() > 1);
    removed += t.rows.size();
    CHECK(t.rows.size() <= 10);
  }
  CHECK(removed == r.best().removed_count());
  const double r0 = *compute_r(d, SubsetState(d), cfg.criteria);
  if (r0 < 0.5) CHECK(any_batch);
}

TEST_CASE("timeouts stop the search with a reason") {
  const Dataset d = testing::random_two_group(200, 200, 2, 1.0, 3);
  MatchConfig cfg = welch_config(d);
  cfg.params.timeout_seconds = 1e-6;
  cfg.params.lookahead = 2;
  const auto r = lookahead_search(d, cfg, LookaheadVariant::h3);
  CHECK_FALSE(r.success);
  CHECK(r.stop_reason == "timeout");
}

TEST_CASE("configuration counts and projected durations") {
  CHECK(count_configurations(40, 3) == 10701);
  CHECK(count_configurations(40, 5) == 760099);
  CHECK(count_configurations(5, 0) == 1);
  CHECK(count_configurations(10, 10) == 1024);
  CHECK_THROWS_AS(count_configurations(3, 4), std::invalid_argument);
  CHECK(count_configurations(113, 17).str() == "76469633722545043772");

  CHECK(format_duration(10.701) == "< 11 seconds");
  CHECK(format_duration(760.099) == "≈ 13 minutes");
  CHECK(format_duration(3.0 * 3600) == "≈ 3 hours");
  CHECK(format_duration(5.0 * 86400) == "≈ 5 days");
  CHECK(format_duration(1e300 * 1e300) == "effectively forever");

  const auto e3 = estimate_exhaustive(40, 3, 1000.0, 1, 100'000'000);
  CHECK(e3.duration == "< 11 seconds");
  CHECK(e3.feasible);
  const auto e5 = estimate_exhaustive(40, 5, 1000.0, 1, 100'000'000);
  CHECK(e5.duration == "≈ 13 minutes");
  CHECK_FALSE(estimate_exhaustive(113, 17, 1e6, 12, 100'000'000).feasible);
  CHECK(estimate_exhaustive(113, 0, 1e6, 12, 100'000'000).configurations == 1);
}

TEST_CASE("algorithm names and labels") {
  CHECK(parse_algorithm("heuristic2") == Algorithm::greedy);
  CHECK(parse_algorithm("h4") == Algorithm::h4);
  CHECK_FALSE(parse_algorithm("annealing"));
  CHECK(AlgorithmSpec{Algorithm::random, 1000}.label() == "random(I=1000)");
  CHECK(AlgorithmSpec{Algorithm::h3, std::nullopt, 1}.label() == "h3(L=1)");
  CHECK(AlgorithmSpec{Algorithm::greedy}.label() == "greedy");
}

TEST_CASE("rate calibration returns a positive rate") {
  const Dataset d = testing::random_two_group(30, 30, 2, 0.0, 1);
  CHECK(calibrate_rate(d, welch_config(d), TestRegistry::with_builtins(), 0.02) > 0.0);
}
