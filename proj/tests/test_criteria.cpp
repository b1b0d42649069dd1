#include <doctest.h>

#include <cmath>
#include <random>

#include "groupmatch/criteria.hpp"
#include "support.hpp"

using namespace groupmatch;

namespace {

SolutionRank kl_rank(std::size_t preserved, double kl, double r) {
  SolutionRank s;
  s.preserved = preserved;
  s.divergence = kl;
  s.r = r;
  return s;
}

std::string validation_error(const Dataset& d, const MatchConfig& cfg) {
  try {
    validate(d, cfg, TestRegistry::with_builtins());
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("KL divergence worked examples") {
  const double a[] = {0.5, 0.5}, b[] = {0.6, 0.4}, c[] = {1.0, 0.0};
  CHECK(kl_divergence(a, a) == 0.0);
  CHECK(kl_divergence(b, a) == doctest::Approx(0.020136).epsilon(1e-5));
  CHECK(kl_divergence(c, a) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const double three[] = {0.2, 0.3, 0.5};
  CHECK_THROWS_AS(kl_divergence(three, a), std::invalid_argument);
  const double zero_target[] = {1.0, 0.0};
  CHECK_THROWS_AS(kl_divergence(a, zero_target), std::invalid_argument);
}

TEST_CASE("KL divergence is nonnegative and zero only at the target") {
  std::mt19937_64 rng(11);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  auto simplex = [&](std::size_t k) {
    std::vector<double> v(k);
    double s = 0;
    for (auto& x : v) s += x = gamma(rng) + 1e-9;
    for (auto& x : v) x /= s;
    return v;
  };
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + i % 4;
    const auto p = simplex(k), q = simplex(k);
    CHECK(kl_divergence(p, q) >= 0.0);
    CHECK(kl_divergence(q, q) == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("solution comparison is lexicographic") {
  CHECK(compare_solutions(kl_rank(96, 0.5, 0.1), kl_rank(95, 0.0, 9.0)) == Ordering::better);
  CHECK(compare_solutions(kl_rank(95, 0.02, 1.0), kl_rank(95, 0.12, 3.0)) == Ordering::better);
  CHECK(compare_solutions(kl_rank(95, 0.02, 1.3), kl_rank(95, 0.02, 1.1)) == Ordering::better);
  CHECK(compare_solutions(kl_rank(95, 0.02, 1.1), kl_rank(95, 0.02, 1.3)) == Ordering::worse);
  CHECK(compare_solutions(kl_rank(95, 0.02, 1.1), kl_rank(95, 0.02, 1.1 * (1 + 1e-14))) == Ordering::equivalent);
  CHECK(r_ties(2.0, 2.0 + 1e-13));
  CHECK_FALSE(r_ties(2.0, 2.0 + 1e-9));
}

TEST_CASE("solution comparison is a total preorder") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> small(0, 2);
  auto random_rank = [&] {
    // Coarse values so ties occur often.
    return kl_rank(90 + small(rng), 0.01 * small(rng), 0.5 * small(rng));
  };
  auto flip = [](Ordering o) {
    return o == Ordering::better ? Ordering::worse : o == Ordering::worse ? Ordering::better : o;
  };
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_rank(), b = random_rank(), c = random_rank();
    const auto ab = compare_solutions(a, b), bc = compare_solutions(b, c), ac = compare_solutions(a, c);
    CHECK(compare_solutions(b, a) == flip(ab));
    CHECK(compare_solutions(a, a) == Ordering::equivalent);
    if (ab != Ordering::worse && bc != Ordering::worse) CHECK(ac != Ordering::worse);
    if (ab == Ordering::equivalent && bc == Ordering::equivalent) CHECK(ac == Ordering::equivalent);
  }
}

TEST_CASE("precedence ranks removals from preferred groups as worse") {
  const Dataset d = testing::make_dataset({"ALI", "ALI", "ALI", "SLI", "SLI", "SLI", "TD", "TD", "TD"},
                                          {{1, 2, 3, 4, 5, 6, 7, 8, 9}});
  const Ranker ranker(d, PrecedenceBalance{{"SLI", "ALI"}});
  CHECK(ranker.kind() == BalanceKind::precedence);
  const std::size_t drop_td[] = {3, 3, 2};
  const std::size_t drop_ali[] = {2, 3, 3};
  const std::size_t drop_sli[] = {3, 2, 3};
  const auto td = ranker.rank(drop_td, 1.0), ali = ranker.rank(drop_ali, 1.0), sli = ranker.rank(drop_sli, 1.0);
  CHECK(compare_solutions(td, ali) == Ordering::better);
  CHECK(compare_solutions(ali, sli) == Ordering::better);
  CHECK(compare_balance(td, sli) == Ordering::better);
}

TEST_CASE("proportions ranker defaults to the original proportions") {
  const Dataset d = testing::make_dataset({"A", "A", "A", "B"}, {{1, 2, 3, 4}});
  const Ranker ranker(d, ProportionsBalance{});
  CHECK(ranker.target()[0] == doctest::Approx(0.75));
  const std::size_t full[] = {3, 1};
  CHECK(ranker.rank(full, 1.0).divergence == doctest::Approx(0.0));
  const std::size_t even[] = {1, 1};
  const double obs[] = {0.5, 0.5};
  CHECK(ranker.rank(even, 1.0).divergence == doctest::Approx(kl_divergence(obs, ranker.target())));
  const Ranker custom(d, ProportionsBalance{{{"A", 0.5}, {"B", 0.5}}});
  CHECK(custom.rank(even, 1.0).divergence == doctest::Approx(0.0));
}

TEST_CASE("validation names the offending criterion") {
  const Dataset d = testing::make_dataset({"A", "A", "B", "B", "C", "C"}, {{1, 2, 3, 4, 5, 6}});
  MatchConfig cfg;
  CHECK(validation_error(d, cfg).find("at least one criterion") != std::string::npos);

  cfg.criteria.criteria = {{"anderson_darling", "x1", {}, 0.2}, {"welch_t", "x1", {"A", "B"}, 1.5}};
  const auto alpha = validation_error(d, cfg);
  CHECK(alpha.find("criterion 2 (welch_t on x1 for A/B)") != std::string::npos);
  CHECK(alpha.find("alpha 1.5") != std::string::npos);

  cfg.criteria.criteria = {{"welch_t", "x1", {}, 0.2}};
  CHECK(validation_error(d, cfg).find("two-sample test but 3 groups") != std::string::npos);
  cfg.criteria.criteria = {{"ks", "x1", {"A", "B"}, 0.2}};
  CHECK(validation_error(d, cfg).find("unknown test 'ks'") != std::string::npos);
  cfg.criteria.criteria = {{"welch_t", "age", {"A", "B"}, 0.2}};
  CHECK(validation_error(d, cfg).find("unknown covariate 'age'") != std::string::npos);
  cfg.criteria.criteria = {{"welch_t", "x1", {"A", "Q"}, 0.2}};
  CHECK(validation_error(d, cfg).find("unknown group 'Q'") != std::string::npos);
  cfg.criteria.criteria = {{"welch_t", "x1", {"A", "B"}, 0.2}, {"welch_t", "x1", {"A", "B"}, 0.3}};
  CHECK(validation_error(d, cfg).find("duplicate criterion") != std::string::npos);

  cfg.criteria.criteria = {{"welch_t", "x1", {"A", "B"}, 0.2}};
  CHECK(validation_error(d, cfg).empty());
  cfg.balance = ProportionsBalance{{{"A", 0.5}, {"B", 0.6}, {"C", 0.1}}};
  CHECK(validation_error(d, cfg).find("sums to") != std::string::npos);
  cfg.balance = ProportionsBalance{{{"A", 0.5}, {"B", 0.5}}};
  CHECK(validation_error(d, cfg).find("every group") != std::string::npos);
  cfg.balance = PrecedenceBalance{{"A", "A"}};
  CHECK(validation_error(d, cfg).find("listed twice") != std::string::npos);
  cfg.balance = ProportionsBalance{};
  cfg.params.lookahead = 0;
  CHECK(validation_error(d, cfg).find("lookahead") != std::string::npos);
}
