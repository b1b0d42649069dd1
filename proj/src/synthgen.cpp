#include "groupmatch/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "groupmatch/criteria.hpp"
#include "groupmatch/evaluator.hpp"

namespace groupmatch {
namespace {

double uniform(std::mt19937_64& rng, Interval r) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

// Smallest Welch/AD p across covariates; nullopt if a test is undefined.
std::optional<double> min_p(const Evaluator& ev, const SubsetState& s) {
  auto e = ev.evaluate(s);
  if (!e) return std::nullopt;
  return *std::min_element(e->p_values.begin(), e->p_values.end());
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_items < 4) throw SynthError("n_items must be at least 4");
  if (n_intruders >= n_items) throw SynthError(fmt::format("n_intruders ({}) must be below n_items ({})", n_intruders, n_items));
  if (n_covariates == 0) throw SynthError("n_covariates must be at least 1");
  if (n_shifted_covariates > n_covariates)
    throw SynthError(fmt::format("n_shifted_covariates ({}) exceeds n_covariates ({})", n_shifted_covariates, n_covariates));
  if (group_split.size() < 2) throw SynthError("group_split needs at least 2 groups");
  double total = 0.0;
  for (const auto& [label, w] : group_split) {
    if (!(w > 0.0)) throw SynthError(fmt::format("group '{}' has a non-positive share", label));
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw SynthError(fmt::format("group shares sum to {}, not 1", total));
  auto check = [](Interval r, const char* name, bool positive) {
    if (!(r.lo <= r.hi)) throw SynthError(fmt::format("{}: lower bound exceeds upper bound", name));
    if (positive && !(r.lo > 0.0)) throw SynthError(fmt::format("{}: lower bound must be positive", name));
    if (!positive && r.lo < 0.0) throw SynthError(fmt::format("{}: lower bound must be nonnegative", name));
  };
  check(mean_range, "mean_range", true);
  check(variance_factor_range, "variance_factor_range", true);
  check(eigenvalue_range, "eigenvalue_range", true);
  check(shift_range, "shift_range", false);
  if (max_attempts == 0) throw SynthError("max_attempts must be at least 1");
}

Eigen::MatrixXd random_pd_matrix(std::size_t dim, Interval eigenvalue_range, std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(dim);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) z(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  Eigen::VectorXd lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda(i) = uniform(rng, eigenvalue_range);
  Eigen::MatrixXd m = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd random_pd_matrix(std::size_t dim, Interval eigenvalue_range, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_pd_matrix(dim, eigenvalue_range, rng);
}

Eigen::MatrixXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t n,
                           std::mt19937_64& rng) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size())
    throw SynthError("sample_mvn: mean and covariance dimensions differ");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw SynthError("sample_mvn: covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), mean.size());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = normal(rng);
  Eigen::MatrixXd x = z * l.transpose();
  x.rowwise() += mean.transpose();
  return x;
}

Eigen::MatrixXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t n,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_mvn(mean, cov, n, rng);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)};
  for (std::uint64_t p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

SyntheticData generate_dataset(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_items;
  const std::size_t k = spec.n_covariates;
  const auto kk = static_cast<Eigen::Index>(k);

  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = fmt::format("item{:04}", i + 1);
  std::vector<std::string> names(k);
  for (std::size_t j = 0; j < k; ++j) names[j] = fmt::format("c{}", j + 1);

  // Group sizes by largest remainder.
  std::vector<std::size_t> sizes(spec.group_split.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const double exact = spec.group_split[g].second * static_cast<double>(n);
    sizes[g] = static_cast<std::size_t>(std::floor(exact));
    assigned += sizes[g];
    remainders.emplace_back(-(exact - std::floor(exact)), g);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[remainders[i % remainders.size()].second];

  CriteriaSet checks;
  std::vector<std::string> labels;
  for (const auto& [label, w] : spec.group_split) labels.push_back(label);
  for (const auto& name : names) {
    if (labels.size() == 2) checks.criteria.push_back({"welch_t", name, labels, 0.5});
    checks.criteria.push_back({"anderson_darling", name, labels, 0.5});
  }

  std::mt19937_64 rng(spec.seed);
  for (std::size_t attempt = 1; attempt <= spec.max_attempts; ++attempt) {
    GroundTruth truth;
    truth.means.resize(kk);
    Eigen::VectorXd variances(kk);
    for (Eigen::Index j = 0; j < kk; ++j) {
      truth.means(j) = uniform(rng, spec.mean_range);
      variances(j) = truth.means(j) * uniform(rng, spec.variance_factor_range);
    }
    const Eigen::MatrixXd base = random_pd_matrix(k, spec.eigenvalue_range, rng);
    const Eigen::VectorXd inv_sd = base.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd corr = inv_sd.asDiagonal() * base * inv_sd.asDiagonal();
    const Eigen::VectorXd sd = variances.cwiseSqrt();
    truth.covariance = sd.asDiagonal() * corr * sd.asDiagonal();
    truth.covariance.diagonal() = variances;

    std::vector<std::size_t> cov_order(k);
    std::iota(cov_order.begin(), cov_order.end(), 0);
    std::shuffle(cov_order.begin(), cov_order.end(), rng);
    truth.shift = Eigen::VectorXd::Zero(kk);
    for (std::size_t s = 0; s < spec.n_shifted_covariates; ++s) {
      const auto j = static_cast<Eigen::Index>(cov_order[s]);
      const double scale = spec.shift_scale == ShiftScale::sd ? std::sqrt(variances(j)) : variances(j);
      truth.shift(j) = uniform(rng, spec.shift_range) * scale;
    }

    const Eigen::MatrixXd basic = sample_mvn(truth.means, truth.covariance, n - spec.n_intruders, rng);
    const Eigen::MatrixXd intruders =
        sample_mvn(Eigen::VectorXd(truth.means + truth.shift), truth.covariance, spec.n_intruders, rng);

    // Random row order for items, then random group assignment.
    std::vector<std::size_t> item_of_row(n);
    std::iota(item_of_row.begin(), item_of_row.end(), 0);
    std::shuffle(item_of_row.begin(), item_of_row.end(), rng);
    std::vector<std::size_t> slots;
    for (std::size_t g = 0; g < sizes.size(); ++g) slots.insert(slots.end(), sizes[g], g);
    std::shuffle(slots.begin(), slots.end(), rng);

    std::vector<std::vector<double>> columns(k, std::vector<double>(n));
    std::vector<std::string> groups(n);
    std::vector<bool> is_intruder(n);
    const std::size_t n_basic = n - spec.n_intruders;
    for (std::size_t row = 0; row < n; ++row) {
      const std::size_t item = item_of_row[row];
      is_intruder[row] = item >= n_basic;
      for (std::size_t j = 0; j < k; ++j)
        columns[j][row] = is_intruder[row] ? intruders(static_cast<Eigen::Index>(item - n_basic), static_cast<Eigen::Index>(j))
                                           : basic(static_cast<Eigen::Index>(item), static_cast<Eigen::Index>(j));
      groups[row] = spec.group_split[slots[row]].first;
    }

    Dataset data = Dataset::from_columns(ids, groups, names, std::move(columns));
    if (spec.acceptance_checks) {
      const Evaluator ev(data, checks);
      SubsetState basic_only(data);
      bool viable = true;
      for (std::size_t row = 0; row < n; ++row) {
        if (!is_intruder[row]) continue;
        if (basic_only.kept_in_group(data.group_of(row)) <= 2) viable = false;
        basic_only.remove(data, row);
      }
      if (!viable) continue;
      auto p_all = min_p(ev, SubsetState(data));
      if (!p_all || !(*p_all < spec.all_p_below)) continue;
      auto p_basic = min_p(ev, basic_only);
      if (!p_basic || *p_basic < spec.basic_p.lo || *p_basic > spec.basic_p.hi) continue;
    }
    return SyntheticData{std::move(data), std::move(is_intruder), std::move(truth), attempt};
  }
  throw SynthError(fmt::format("no dataset passed the acceptance checks in {} attempts", spec.max_attempts));
}

std::vector<SyntheticSpec> parameter_grid(const std::vector<std::size_t>& item_counts, std::size_t draws_per_combination,
                                          std::uint64_t master_seed) {
  std::vector<SyntheticSpec> out;
  std::uint64_t index = 0;
  for (std::size_t items : item_counts)
    for (std::size_t k = 2; k <= 4; ++k)
      for (std::size_t shifted = 2; shifted <= k; ++shifted)
        for (std::size_t draw = 0; draw < draws_per_combination; ++draw) {
          SyntheticSpec s;
          s.n_items = items;
          s.n_covariates = k;
          s.n_shifted_covariates = shifted;
          s.seed = derive_seed(master_seed, {index++});
          out.push_back(s);
        }
  return out;
}

std::vector<SyntheticSpec> paper_grid(std::uint64_t master_seed) { return parameter_grid({100, 150, 200}, 2, master_seed); }

void write_truth(std::ostream& out, const SyntheticData& s) {
  out << "id,intruder\n";
  for (std::size_t row = 0; row < s.data.size(); ++row)
    out << s.data.id(row) << ',' << (s.intruder[row] ? 1 : 0) << '\n';
}

}  // namespace groupmatch
