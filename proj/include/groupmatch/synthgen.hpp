#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "groupmatch/dataset.hpp"

namespace groupmatch {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Whether intruder shifts multiply the covariance diagonal's square root
/// (sd) or the diagonal itself (variance).
enum class ShiftScale { sd, variance };

struct SyntheticSpec {
  std::size_t n_items = 100;
  std::size_t n_intruders = 10;
  std::size_t n_covariates = 3;
  std::size_t n_shifted_covariates = 2;
  std::vector<std::pair<std::string, double>> group_split{{"A", 0.5}, {"B", 0.5}};
  Interval mean_range{1.0, 2.0};
  Interval variance_factor_range{1.0, 10.0};
  Interval shift_range{0.5, 1.0};
  Interval eigenvalue_range{1.0, 10.0};
  ShiftScale shift_scale = ShiftScale::sd;
  /// Rejection checks on each generated dataset: the smallest Welch/AD
  /// p-value between groups must lie in `basic_p` over the basic items and
  /// fall below `all_p_below` over all items.
  bool acceptance_checks = true;
  Interval basic_p{0.2, 0.5};
  double all_p_below = 0.1;
  std::size_t max_attempts = 20000;
  std::uint64_t seed = 0;

  /// Throws SynthError on an invalid spec.
  void validate() const;
};

struct GroundTruth {
  Eigen::VectorXd means;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd shift;  // zero on unshifted covariates
};

struct SyntheticData {
  Dataset data;
  std::vector<bool> intruder;  // per row
  GroundTruth truth;
  std::size_t attempts = 1;
};

/// Q diag(lambda) Q^T with lambda ~ U(range) and Q Haar-random orthogonal.
Eigen::MatrixXd random_pd_matrix(std::size_t dim, Interval eigenvalue_range, std::mt19937_64& rng);
Eigen::MatrixXd random_pd_matrix(std::size_t dim, Interval eigenvalue_range, std::uint64_t seed);

/// n draws (rows) from N(mean, cov) via the Cholesky factor. Throws SynthError
/// if cov is not positive definite.
Eigen::MatrixXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t n,
                           std::mt19937_64& rng);
Eigen::MatrixXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t n,
                           std::uint64_t seed);

/// Throws SynthError if the spec is invalid or no draw passes the acceptance
/// checks within max_attempts.
SyntheticData generate_dataset(const SyntheticSpec& spec);

/// Child seed for (master, indices...), stable across platforms.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// Parameter sets: item counts x (covariates, shifted) combinations x
/// `draws_per_combination`, each with its own derived seed.
std::vector<SyntheticSpec> parameter_grid(const std::vector<std::size_t>& item_counts, std::size_t draws_per_combination,
                                          std::uint64_t master_seed);
/// The 36 sets: 100/150/200 items, covariates 2-4 with 2..K shifted, two draws each.
std::vector<SyntheticSpec> paper_grid(std::uint64_t master_seed);

/// `id,intruder` sidecar, one row per item.
void write_truth(std::ostream& out, const SyntheticData& s);

}  // namespace groupmatch
