#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "groupmatch/dataset.hpp"
#include "csv.hpp"
#include "support.hpp"

using namespace groupmatch;

namespace {

Dataset parse(const std::string& text, CsvSchema schema = {}) {
  std::istringstream in(text);
  return read_dataset(in, schema, "test.csv");
}

}  // namespace

TEST_CASE("csv reader handles quotes, embedded newlines and a BOM") {
  std::istringstream in("\xEF\xBB\xBF" "a,b\n\"x,1\",\"he said \"\"hi\"\"\"\n\n\"multi\nline\",2\r\n");
  const auto recs = csv::read_all(in, ',');
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].fields == std::vector<std::string>{"a", "b"});
  CHECK(recs[1].fields == std::vector<std::string>{"x,1", "he said \"hi\""});
  CHECK(recs[2].fields == std::vector<std::string>{"multi\nline", "2"});
  CHECK(recs[2].line == 4);
}

TEST_CASE("csv reader rejects an unterminated quote") {
  std::istringstream in("a,b\n\"open,1\n");
  CHECK_THROWS_AS(csv::read_all(in, ','), DataError);
}

TEST_CASE("dataset parses with default schema and orders groups lexicographically") {
  const Dataset d = parse("id,group,age,iq\np1,TD,10,100\np2,ALN,11,90\np3,TD,12,110\np4,ALN,9,95\n");
  CHECK(d.size() == 4);
  CHECK(d.num_groups() == 2);
  CHECK(d.group_label(0) == "ALN");
  CHECK(d.group_label(1) == "TD");
  CHECK(d.covariate_names() == std::vector<std::string>{"age", "iq"});
  CHECK(d.value(2, 1) == 110.0);
  CHECK(d.members(1).size() == 2);
  CHECK(d.find_group("TD") == GroupId{1});
  CHECK_FALSE(d.find_group("SLI"));
}

TEST_CASE("dataset honours explicit schema and delimiter") {
  CsvSchema schema;
  schema.id_column = "subject";
  schema.group_column = "dx";
  schema.covariate_columns = {"viq"};
  schema.delimiter = ';';
  const Dataset d = parse("dx;subject;piq;viq\nA;1;1;5\nB;2;2;6\nA;3;3;7\nB;4;4;8\n", schema);
  CHECK(d.num_covariates() == 1);
  CHECK(d.covariate_names()[0] == "viq");
  CHECK(d.id(3) == "4");
}

TEST_CASE("dataset errors name the offending row or column") {
  auto message = [](const std::string& text) {
    try {
      parse(text);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("").find("empty file") != std::string::npos);
  CHECK(message("id,group,x\na,A,1\nb,B,oops\n").find("line 3") != std::string::npos);
  CHECK(message("id,group,x\na,A,1\nb,B,\n").find("missing value") != std::string::npos);
  CHECK(message("id,group,x\na,A,1\na,B,2\n").find("duplicate subject id 'a'") != std::string::npos);
  CHECK(message("id,group,x\na,A,1\nb,A,2\n").find("at least 2 groups") != std::string::npos);
  CHECK(message("id,grp,x\na,A,1\nb,B,2\n").find("no column named 'group'") != std::string::npos);
  CHECK(message("id,group,x\na,A,1\nb,B\n").find("fields") != std::string::npos);
  CHECK(message("id,group,x\na,A,nan\nb,B,1\n").find("finite") != std::string::npos);
  CHECK(message("id,group\na,A\nb,B\n").find("no covariate") != std::string::npos);
}

TEST_CASE("dataset round-trips through write and read") {
  const Dataset d = testing::random_two_group(7, 5, 3, 0.3, 42);
  std::ostringstream out;
  write_dataset(out, d);
  const Dataset back = parse(out.str());
  REQUIRE(back.size() == d.size());
  for (std::size_t row = 0; row < d.size(); ++row) {
    CHECK(back.id(row) == d.id(row));
    CHECK(back.group_label(back.group_of(row)) == d.group_label(d.group_of(row)));
    for (std::size_t k = 0; k < d.num_covariates(); ++k) CHECK(back.value(row, k) == d.value(row, k));
  }
}

TEST_CASE("dataset file round-trip quotes awkward ids") {
  const Dataset d = Dataset::from_columns({"a,1", "b\"2", "c"}, {"X", "Y", "X"}, {"v"}, {{1.5, -2.25, 3.0}});
  const auto path = std::filesystem::temp_directory_path() / "groupmatch_roundtrip.csv";
  save_dataset(path, d);
  const Dataset back = load_dataset(path, {});
  CHECK(back.id(0) == "a,1");
  CHECK(back.id(1) == "b\"2");
  std::filesystem::remove(path);
}

TEST_CASE("subset state tracks kept counts per group") {
  const Dataset d = testing::make_dataset({"A", "A", "B", "B", "B"}, {{1, 2, 3, 4, 5}});
  SubsetState s(d);
  CHECK(s.kept_count() == 5);
  s.remove(d, 2);
  s.remove(d, 0);
  CHECK(s.removed_count() == 2);
  CHECK(s.kept_in_group(0) == 1);
  CHECK(s.kept_in_group(1) == 2);
  s.restore(d, 2);
  CHECK(s.kept_in_group(1) == 3);
  CHECK_FALSE(s.kept(0));
  const auto props = group_proportions(d, s);
  CHECK(props[0] == doctest::Approx(0.25));
  s.remove(d, 1);
  CHECK_THROWS_AS(group_proportions(d, s), InfeasibleState);
}

TEST_CASE("feasibility rules enforce locks, minimum sizes and removal bounds") {
  const Dataset d = testing::make_dataset({"A", "A", "A", "A", "B", "B", "B", "C", "C"}, {{1, 2, 3, 4, 5, 6, 7, 8, 9}});
  Constraints c;
  c.min_group_size = 2;
  c.locked_groups = {"C"};
  c.max_total_removals = 2;
  c.max_group_removals = {{"A", 1}};
  const FeasibilityRules rules(d, c);
  CHECK(rules.locked(2));
  CHECK(rules.removal_allowance(0) == 1);
  CHECK(rules.removal_allowance(1) == 1);
  CHECK(rules.removal_allowance(2) == 0);
  CHECK(rules.total_allowance() == 2);

  SubsetState s(d);
  CHECK(rules.removable(s) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  s.remove(d, 0);
  CHECK(rules.removable(s) == std::vector<std::size_t>{4, 5, 6});
  CHECK_FALSE(rules.can_remove(s, 7));
  s.remove(d, 4);
  CHECK(rules.feasible(s));
  CHECK(rules.removable(s).empty());
  const std::size_t pair[] = {5, 6};
  CHECK_FALSE(rules.can_remove_all(SubsetState(d), pair));
}

TEST_CASE("constraints referring to unknown or undersized groups are rejected") {
  const Dataset d = testing::make_dataset({"A", "A", "B", "B"}, {{1, 2, 3, 4}});
  Constraints c;
  c.locked_groups = {"Z"};
  CHECK_THROWS_AS(FeasibilityRules(d, c), DataError);
  c = {};
  c.min_group_size = 3;
  CHECK_THROWS_AS(FeasibilityRules(d, c), DataError);
  c = {};
  c.locked_groups = {"A"};
  c.max_group_removals = {{"A", 1}};
  CHECK_THROWS_AS(FeasibilityRules(d, c), DataError);
}
