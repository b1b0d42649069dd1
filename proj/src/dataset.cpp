#include "groupmatch/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include <fmt/format.h>

#include "csv.hpp"

namespace groupmatch {

Dataset Dataset::from_columns(std::vector<std::string> ids,
                              const std::vector<std::string>& group_labels,
                              std::vector<std::string> covariate_names,
                              std::vector<std::vector<double>> columns) {
  const std::size_t n = ids.size();
  if (n < 2) throw DataError(fmt::format("dataset needs at least 2 rows, got {}", n));
  if (group_labels.size() != n) throw DataError("group label count does not match row count");
  if (covariate_names.empty()) throw DataError("dataset needs at least one covariate");
  if (columns.size() != covariate_names.size())
    throw DataError("covariate column count does not match covariate names");

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen.insert(ids[i]).second)
      throw DataError(fmt::format("duplicate subject id '{}' (row {})", ids[i], i + 1));
  }
  std::unordered_set<std::string> names_seen;
  for (const auto& name : covariate_names) {
    if (!names_seen.insert(name).second) throw DataError(fmt::format("duplicate covariate '{}'", name));
  }
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k].size() != n)
      throw DataError(fmt::format("covariate '{}' has {} values, expected {}", covariate_names[k],
                                  columns[k].size(), n));
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(columns[k][i]))
        throw DataError(fmt::format("non-finite value for covariate '{}' at row {}", covariate_names[k], i + 1));
    }
  }

  Dataset d;
  d.labels_ = group_labels;
  std::sort(d.labels_.begin(), d.labels_.end());
  d.labels_.erase(std::unique(d.labels_.begin(), d.labels_.end()), d.labels_.end());
  if (d.labels_.size() < 2)
    throw DataError(fmt::format("dataset needs at least 2 groups, got {}", d.labels_.size()));

  d.members_.resize(d.labels_.size());
  d.group_of_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = std::lower_bound(d.labels_.begin(), d.labels_.end(), group_labels[i]);
    auto g = static_cast<GroupId>(it - d.labels_.begin());
    d.group_of_[i] = g;
    d.members_[g].push_back(i);
  }
  d.ids_ = std::move(ids);
  d.names_ = std::move(covariate_names);
  d.columns_ = std::move(columns);
  return d;
}

std::optional<GroupId> Dataset::find_group(std::string_view label) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label) return std::nullopt;
  return static_cast<GroupId>(it - labels_.begin());
}

std::optional<std::size_t> Dataset::find_covariate(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

SubsetState::SubsetState(const Dataset& d)
    : keep_(d.size(), 1), counts_(d.num_groups()), kept_(d.size()) {
  for (GroupId g = 0; g < d.num_groups(); ++g) counts_[g] = d.group_size(g);
}

void SubsetState::remove(const Dataset& d, std::size_t row) {
  if (!keep_[row]) return;
  keep_[row] = 0;
  --counts_[d.group_of(row)];
  --kept_;
}

void SubsetState::restore(const Dataset& d, std::size_t row) {
  if (keep_[row]) return;
  keep_[row] = 1;
  ++counts_[d.group_of(row)];
  ++kept_;
}

FeasibilityRules::FeasibilityRules(const Dataset& d, const Constraints& c)
    : data_(&d),
      locked_(d.num_groups(), 0),
      allowance_(d.num_groups()),
      total_allowance_(c.max_total_removals.value_or(d.size())),
      min_group_size_(c.min_group_size) {
  for (const auto& label : c.locked_groups) {
    auto g = d.find_group(label);
    if (!g) throw DataError(fmt::format("locked group '{}' does not exist", label));
    locked_[*g] = 1;
  }
  for (GroupId g = 0; g < d.num_groups(); ++g) {
    if (locked_[g]) {
      allowance_[g] = 0;
      continue;
    }
    if (d.group_size(g) < min_group_size_)
      throw DataError(fmt::format("group '{}' has {} members, fewer than the minimum group size {}",
                                  d.group_label(g), d.group_size(g), min_group_size_));
    allowance_[g] = d.group_size(g) - min_group_size_;
  }
  for (const auto& [label, bound] : c.max_group_removals) {
    auto g = d.find_group(label);
    if (!g) throw DataError(fmt::format("removal bound for unknown group '{}'", label));
    if (locked_[*g] && bound < d.group_size(*g))
      throw DataError(fmt::format("group '{}' is locked and cannot also carry a removal bound", label));
    allowance_[*g] = std::min(allowance_[*g], bound);
  }
}

bool FeasibilityRules::feasible(const SubsetState& s) const {
  if (s.removed_count() > total_allowance_) return false;
  for (GroupId g = 0; g < data_->num_groups(); ++g) {
    if (data_->group_size(g) - s.kept_in_group(g) > allowance_[g]) return false;
  }
  return true;
}

bool FeasibilityRules::can_remove(const SubsetState& s, std::size_t row) const {
  if (!s.kept(row)) return false;
  if (s.removed_count() + 1 > total_allowance_) return false;
  GroupId g = data_->group_of(row);
  return data_->group_size(g) - s.kept_in_group(g) + 1 <= allowance_[g];
}

bool FeasibilityRules::can_remove_all(const SubsetState& s, std::span<const std::size_t> rows) const {
  if (s.removed_count() + rows.size() > total_allowance_) return false;
  // rows is tiny (lookahead depth), so a quadratic tally is fine
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (!s.kept(rows[a])) return false;
    GroupId g = data_->group_of(rows[a]);
    std::size_t extra = 0;
    bool first = true;
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (data_->group_of(rows[b]) != g) continue;
      if (b < a) {
        first = false;
        break;
      }
      ++extra;
    }
    if (first && data_->group_size(g) - s.kept_in_group(g) + extra > allowance_[g]) return false;
  }
  return true;
}

std::vector<std::size_t> FeasibilityRules::removable(const SubsetState& s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (can_remove(s, i)) out.push_back(i);
  }
  return out;
}

std::vector<double> group_proportions(const Dataset& d, const SubsetState& s) {
  std::vector<double> out(d.num_groups());
  for (GroupId g = 0; g < d.num_groups(); ++g) {
    if (s.kept_in_group(g) == 0)
      throw InfeasibleState(fmt::format("group '{}' has no kept members", d.group_label(g)));
  }
  const double total = static_cast<double>(s.kept_count());
  for (GroupId g = 0; g < d.num_groups(); ++g) out[g] = static_cast<double>(s.kept_in_group(g)) / total;
  return out;
}

namespace {

double parse_number(std::string_view raw, std::size_t line, const std::string& column) {
  auto text = csv::trim(raw);
  if (text.empty()) throw DataError(fmt::format("line {}, column '{}': missing value", line, column));
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value))
    throw DataError(fmt::format("line {}, column '{}': '{}' is not a finite number", line, column, raw));
  return value;
}

}  // namespace

Dataset read_dataset(std::istream& in, const CsvSchema& schema, const std::string& source_name) {
  auto records = csv::read_all(in, schema.delimiter);
  if (records.empty()) throw DataError(source_name + ": empty file (a header row is required)");

  std::vector<std::string> header;
  for (const auto& f : records.front().fields) header.emplace_back(csv::trim(f));
  auto column_of = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(fmt::format("{}: no column named '{}'", source_name, name));
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t id_col = column_of(schema.id_column);
  const std::size_t group_col = column_of(schema.group_column);
  std::vector<std::string> cov_names = schema.covariate_columns;
  if (cov_names.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != id_col && c != group_col) cov_names.push_back(header[c]);
    }
  }
  if (cov_names.empty()) throw DataError(source_name + ": no covariate columns");
  std::vector<std::size_t> cov_cols;
  for (const auto& name : cov_names) cov_cols.push_back(column_of(name));

  std::vector<std::string> ids, groups;
  std::vector<std::vector<double>> columns(cov_names.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size())
      throw DataError(fmt::format("{}: line {} has {} fields, header has {}", source_name, rec.line,
                                  rec.fields.size(), header.size()));
    ids.emplace_back(csv::trim(rec.fields[id_col]));
    groups.emplace_back(csv::trim(rec.fields[group_col]));
    if (ids.back().empty()) throw DataError(fmt::format("{}: line {}: empty subject id", source_name, rec.line));
    if (groups.back().empty()) throw DataError(fmt::format("{}: line {}: empty group label", source_name, rec.line));
    for (std::size_t k = 0; k < cov_cols.size(); ++k)
      columns[k].push_back(parse_number(rec.fields[cov_cols[k]], rec.line, cov_names[k]));
  }
  try {
    return Dataset::from_columns(std::move(ids), groups, std::move(cov_names), std::move(columns));
  } catch (const DataError& e) {
    throw DataError(source_name + ": " + e.what());
  }
}

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  return read_dataset(in, schema, path.string());
}

void write_dataset(std::ostream& out, const Dataset& d, char delimiter) {
  out << "id" << delimiter << "group";
  for (const auto& name : d.covariate_names()) out << delimiter << csv::escape(name, delimiter);
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << csv::escape(d.id(i), delimiter) << delimiter << csv::escape(d.group_label(d.group_of(i)), delimiter);
    for (std::size_t k = 0; k < d.num_covariates(); ++k) out << delimiter << fmt::format("{}", d.value(i, k));
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& d, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  write_dataset(out, d, delimiter);
}

}  // namespace groupmatch
