#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <set>
#include <sstream>

#include "groupmatch/evaluator.hpp"
#include "groupmatch/synthgen.hpp"

using namespace groupmatch;

namespace {

double min_p(const SyntheticData& s, const SubsetState& state) {
  CriteriaSet c;
  const std::vector<std::string> groups(s.data.group_labels().begin(), s.data.group_labels().end());
  for (const auto& name : s.data.covariate_names()) {
    c.criteria.push_back({"welch_t", name, groups, 0.5});
    c.criteria.push_back({"anderson_darling", name, groups, 0.5});
  }
  const auto e = Evaluator(s.data, c).evaluate(state);
  REQUIRE(e);
  return *std::min_element(e->p_values.begin(), e->p_values.end());
}

}  // namespace

TEST_CASE("random positive definite matrices have eigenvalues in range") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t dim = 2 + seed % 5;
    const Eigen::MatrixXd m = random_pd_matrix(dim, {1.0, 10.0}, seed);
    CHECK((m - m.transpose()).norm() < 1e-12);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    CHECK(es.eigenvalues().minCoeff() >= 1.0 - 1e-9);
    CHECK(es.eigenvalues().maxCoeff() <= 10.0 + 1e-9);
  }
}

TEST_CASE("multivariate normal draws reproduce mean and covariance") {
  Eigen::VectorXd mean(3);
  mean << 1.0, -2.0, 0.5;
  const Eigen::MatrixXd cov = random_pd_matrix(3, {1.0, 4.0}, std::uint64_t{9});
  const Eigen::MatrixXd x = sample_mvn(mean, cov, 50000, std::uint64_t{10});
  const Eigen::VectorXd m = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - m.transpose();
  const Eigen::MatrixXd s = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  CHECK((m - mean).cwiseAbs().maxCoeff() < 0.05);
  CHECK((s - cov).cwiseAbs().maxCoeff() < 0.15);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
  bad(0, 1) = bad(1, 0) = 2.0;
  CHECK_THROWS_AS(sample_mvn(Eigen::VectorXd::Zero(2), bad, 10, std::uint64_t{1}), SynthError);
}

TEST_CASE("generated datasets have the requested shape and pass the acceptance checks") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.n_covariates = 2 + seed % 3;
    spec.n_shifted_covariates = 2;
    const SyntheticData s = generate_dataset(spec);
    CHECK(s.data.size() == 100);
    CHECK(s.data.num_covariates() == spec.n_covariates);
    CHECK(std::count(s.intruder.begin(), s.intruder.end(), true) == 10);
    CHECK(s.data.group_size(0) == 50);
    CHECK((s.truth.shift.array() != 0.0).count() == 2);
    for (Eigen::Index j = 0; j < s.truth.shift.size(); ++j) {
      if (s.truth.shift(j) == 0.0) continue;
      const double sd = std::sqrt(s.truth.covariance(j, j));
      CHECK(s.truth.shift(j) >= 0.5 * sd - 1e-12);
      CHECK(s.truth.shift(j) <= 1.0 * sd + 1e-12);
    }
    for (Eigen::Index j = 0; j < s.truth.means.size(); ++j) {
      CHECK(s.truth.means(j) >= 1.0);
      CHECK(s.truth.means(j) <= 2.0);
      const double factor = s.truth.covariance(j, j) / s.truth.means(j);
      CHECK(factor >= 1.0);
      CHECK(factor <= 10.0);
    }
    SubsetState basic(s.data);
    for (std::size_t row = 0; row < s.data.size(); ++row)
      if (s.intruder[row]) basic.remove(s.data, row);
    const double pb = min_p(s, basic);
    CHECK(pb >= 0.2);
    CHECK(pb <= 0.5);
    CHECK(min_p(s, SubsetState(s.data)) < 0.1);
  }
}

TEST_CASE("generation is deterministic under the seed") {
  SyntheticSpec spec;
  spec.seed = 123;
  auto dump = [](const SyntheticData& s) {
    std::ostringstream out;
    write_dataset(out, s.data);
    write_truth(out, s);
    return out.str();
  };
  const std::string a = dump(generate_dataset(spec));
  CHECK(a == dump(generate_dataset(spec)));
  spec.seed = 124;
  CHECK(a != dump(generate_dataset(spec)));
}

TEST_CASE("invalid specs are rejected") {
  SyntheticSpec spec;
  spec.n_intruders = 100;
  CHECK_THROWS_AS(generate_dataset(spec), SynthError);
  spec = {};
  spec.n_shifted_covariates = 5;
  CHECK_THROWS_AS(generate_dataset(spec), SynthError);
  spec = {};
  spec.basic_p = {0.99, 0.999};
  spec.max_attempts = 3;
  CHECK_THROWS_AS(generate_dataset(spec), SynthError);
}

TEST_CASE("parameter grid enumerates every covariate/shift combination") {
  const auto grid = paper_grid(5);
  CHECK(grid.size() == 36);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> combos;
  std::set<std::uint64_t> seeds;
  for (const auto& s : grid) {
    combos.insert({s.n_items, s.n_covariates, s.n_shifted_covariates});
    seeds.insert(s.seed);
    CHECK(s.n_shifted_covariates <= s.n_covariates);
  }
  CHECK(combos.size() == 18);
  CHECK(seeds.size() == 36);
  CHECK(parameter_grid({100}, 2, 5).size() == 12);
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
}
