#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace groupmatch {

using GroupId = std::uint32_t;

/// Malformed or invalid input data. The message names the offending row/column.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A subset violates a structural requirement (e.g. an emptied group).
class InfeasibleState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvSchema {
  std::string id_column = "id";
  std::string group_column = "group";
  /// Empty means "every column other than the id and group columns".
  std::vector<std::string> covariate_columns;
  char delimiter = ',';
};

/// Grouped covariate table. Immutable once built; groups are indexed in
/// lexicographic label order so every per-group vector is reproducible.
class Dataset {
 public:
  /// Validates and builds. `columns[k][i]` is covariate k of row i.
  static Dataset from_columns(std::vector<std::string> ids,
                              const std::vector<std::string>& group_labels,
                              std::vector<std::string> covariate_names,
                              std::vector<std::vector<double>> columns);

  std::size_t size() const { return ids_.size(); }
  std::size_t num_groups() const { return labels_.size(); }
  std::size_t num_covariates() const { return names_.size(); }

  const std::string& id(std::size_t row) const { return ids_[row]; }
  std::span<const std::string> ids() const { return ids_; }

  GroupId group_of(std::size_t row) const { return group_of_[row]; }
  std::span<const GroupId> group_ids() const { return group_of_; }
  const std::string& group_label(GroupId g) const { return labels_[g]; }
  std::span<const std::string> group_labels() const { return labels_; }
  std::optional<GroupId> find_group(std::string_view label) const;
  /// Row indices of group `g`, ascending.
  std::span<const std::size_t> members(GroupId g) const { return members_[g]; }
  std::size_t group_size(GroupId g) const { return members_[g].size(); }

  const std::vector<std::string>& covariate_names() const { return names_; }
  std::optional<std::size_t> find_covariate(std::string_view name) const;
  std::span<const double> covariate(std::size_t k) const { return columns_[k]; }
  double value(std::size_t row, std::size_t k) const { return columns_[k][row]; }

 private:
  std::vector<std::string> ids_;
  std::vector<GroupId> group_of_;
  std::vector<std::string> labels_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
};

/// Keep-indicators over a Dataset plus per-group kept counts.
class SubsetState {
 public:
  SubsetState() = default;
  /// Everything kept.
  explicit SubsetState(const Dataset& d);

  std::size_t size() const { return keep_.size(); }
  bool kept(std::size_t row) const { return keep_[row] != 0; }
  std::size_t kept_count() const { return kept_; }
  std::size_t removed_count() const { return keep_.size() - kept_; }
  std::size_t kept_in_group(GroupId g) const { return counts_[g]; }
  std::span<const std::size_t> group_counts() const { return counts_; }
  /// One byte per row, 1 = kept.
  std::span<const std::uint8_t> mask() const { return keep_; }

  void remove(const Dataset& d, std::size_t row);
  void restore(const Dataset& d, std::size_t row);

  bool operator==(const SubsetState&) const = default;

 private:
  std::vector<std::uint8_t> keep_;
  std::vector<std::size_t> counts_;
  std::size_t kept_ = 0;
};

/// Removal limits, keyed by group label.
struct Constraints {
  std::size_t min_group_size = 2;
  std::set<std::string> locked_groups;
  std::optional<std::size_t> max_total_removals;
  std::map<std::string, std::size_t> max_group_removals;
};

/// Constraints resolved against a Dataset.
///
/// A state is feasible iff every locked group keeps all members, every other
/// group keeps at least `min_group_size` members and stays within its removal
/// bound, and the total removal count stays within the global bound.
class FeasibilityRules {
 public:
  /// Throws DataError on unknown labels or a group that can never satisfy
  /// the minimum size.
  FeasibilityRules(const Dataset& d, const Constraints& c);

  bool locked(GroupId g) const { return locked_[g] != 0; }
  std::size_t min_group_size() const { return min_group_size_; }
  /// Most members group `g` may lose relative to the full dataset.
  std::size_t removal_allowance(GroupId g) const { return allowance_[g]; }
  std::size_t total_allowance() const { return total_allowance_; }

  bool feasible(const SubsetState& s) const;
  /// True if `s` minus `row` is feasible, assuming `s` itself is.
  bool can_remove(const SubsetState& s, std::size_t row) const;
  /// True if removing all of `rows` (distinct, all kept) from `s` is feasible.
  bool can_remove_all(const SubsetState& s, std::span<const std::size_t> rows) const;
  /// Kept rows whose single removal keeps `s` feasible, ascending.
  std::vector<std::size_t> removable(const SubsetState& s) const;

 private:
  const Dataset* data_;
  std::vector<std::uint8_t> locked_;
  std::vector<std::size_t> allowance_;
  std::size_t total_allowance_;
  std::size_t min_group_size_;
};

/// Kept fraction per group in canonical group order. Throws InfeasibleState
/// if any group has been emptied.
std::vector<double> group_proportions(const Dataset& d, const SubsetState& s);

Dataset read_dataset(std::istream& in, const CsvSchema& schema,
                     const std::string& source_name = "<stream>");
Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema);

/// Writes `id,group,<covariates...>` with round-trip precision.
void write_dataset(std::ostream& out, const Dataset& d, char delimiter = ',');
void save_dataset(const std::filesystem::path& path, const Dataset& d, char delimiter = ',');

}  // namespace groupmatch
