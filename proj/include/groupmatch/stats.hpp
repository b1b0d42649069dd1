#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace groupmatch {

/// The test is not defined for the given samples (too small, or degenerate).
class UndefinedTest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RegistryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TestOutcome {
  double p = 1.0;
  /// The p-value came from outside the tabulated range and was extrapolated
  /// (and possibly clamped).
  bool extrapolated = false;
};

using SampleList = std::span<const std::span<const double>>;

enum class Arity { two_sample, k_sample };

/// Tests the evaluator knows how to run without materialising samples.
enum class BuiltinTest { none, welch_t, anderson_darling };

/// A statistical test mapping samples to a p-value. `evaluate` must be pure
/// and return nullopt where the test is undefined.
struct TestFunction {
  std::string name;
  Arity arity = Arity::two_sample;
  std::function<std::optional<TestOutcome>(SampleList)> evaluate;
  BuiltinTest builtin = BuiltinTest::none;
};

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Two-sided Welch unequal-variance t-test. Throws UndefinedTest if a sample
/// has fewer than 2 values, or both are constant with different values
/// (constant and equal gives p = 1).
WelchResult welch_t_test(std::span<const double> x, std::span<const double> y);
double welch_t_p(std::span<const double> x, std::span<const double> y);

struct AndersonDarlingResult {
  double statistic = 0.0;     // A2akN, midrank version
  double standardized = 0.0;  // (A2akN - (k-1)) / sigma_N
  TestOutcome outcome;
};

/// k-sample Anderson-Darling test (Scholz & Stephens, midranks for ties).
/// Throws UndefinedTest if fewer than 2 samples, a sample has fewer than 2
/// values, or the pooled data has a single distinct value.
AndersonDarlingResult anderson_darling_test(SampleList samples);
double anderson_darling_p(SampleList samples);
double anderson_darling_p(std::span<const double> x, std::span<const double> y);

namespace detail {

struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations
};

/// Welch from summary moments. A variance <= zero_variance is treated as 0;
/// means within mean_tolerance count as equal when both variances are 0.
std::optional<WelchResult> welch_from_moments(const Moments& x, const Moments& y, double zero_variance,
                                              double mean_tolerance);

/// Reusable buffers for anderson_darling_from_runs.
struct AdScratch {
  std::vector<double> tie_counts;
  std::vector<double> midranks;
  std::vector<double> sample_counts;  // k rows of tie_counts.size() each
};

/// Anderson-Darling from tie-run counts. `scratch.tie_counts` holds l_j for each
/// distinct pooled value in ascending order, `scratch.sample_counts[i*L + j]`
/// the number of sample-i values equal to value j. `sizes` are the sample sizes.
std::optional<AndersonDarlingResult> anderson_darling_from_runs(AdScratch& scratch,
                                                                std::span<const double> sizes);

/// p-value for a standardized statistic with k samples, via a quadratic fit of
/// log significance against the tabulated critical values.
TestOutcome anderson_darling_pvalue(double standardized, std::size_t k);

}  // namespace detail

/// Opaque reference to a registered test.
struct TestHandle {
  std::size_t index = 0;
  bool operator==(const TestHandle&) const = default;
};

/// Name -> test lookup. `with_builtins()` pre-registers "welch_t" and
/// "anderson_darling".
class TestRegistry {
 public:
  TestRegistry() = default;
  static TestRegistry with_builtins();

  /// Throws RegistryError if the name is taken or the function is empty.
  TestHandle register_test(TestFunction fn);
  std::optional<TestHandle> find(std::string_view name) const;
  TestHandle resolve(std::string_view name) const;
  const TestFunction& get(TestHandle h) const { return tests_.at(h.index); }
  std::vector<std::string> names() const;

 private:
  std::vector<TestFunction> tests_;
};

TestFunction welch_test_function();
TestFunction anderson_darling_test_function();

}  // namespace groupmatch
