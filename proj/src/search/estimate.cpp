#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "groupmatch/search.hpp"

namespace groupmatch {

BigCount count_configurations(std::size_t N, std::size_t n) {
  if (n > N) throw std::invalid_argument(fmt::format("count_configurations: n = {} exceeds N = {}", n, N));
  BigCount term = 1;
  BigCount total = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    term = term * (N - i + 1) / i;
    total += term;
  }
  return total;
}

std::string format_duration(double seconds) {
  auto unit = [](double v, const char* one, const char* many) {
    const double r = std::round(v);
    if (r >= 1e6) return fmt::format("≈ {:.2g} {}", v, many);
    return fmt::format("≈ {} {}", static_cast<long long>(r), r == 1.0 ? one : many);
  };
  if (!std::isfinite(seconds)) return "effectively forever";
  if (seconds < 60.0) {
    const auto bound = static_cast<long long>(std::floor(seconds)) + 1;
    return fmt::format("< {} {}", bound, bound == 1 ? "second" : "seconds");
  }
  const double minutes = seconds / 60.0;
  if (minutes < 59.5) return unit(minutes, "minute", "minutes");
  const double hours = minutes / 60.0;
  if (hours < 47.5) return unit(hours, "hour", "hours");
  const double days = hours / 24.0;
  if (days < 364.5) return unit(days, "day", "days");
  return unit(days / 365.25, "year", "years");
}

ExhaustiveEstimate estimate_exhaustive(std::size_t N, std::size_t bound, double rate, std::size_t num_criteria,
                                       std::uint64_t budget) {
  if (!(rate > 0.0)) throw std::invalid_argument("estimate_exhaustive: rate must be positive");
  ExhaustiveEstimate e;
  e.configurations = count_configurations(N, bound);
  e.rate = rate;
  e.seconds = e.configurations.convert_to<double>() / rate;
  e.feasible = e.configurations * std::max<std::size_t>(num_criteria, 1) <= BigCount(budget);
  e.duration = e.configurations == 1 ? "instantaneous" : format_duration(e.seconds);
  return e;
}

ExhaustiveEstimate estimate_exhaustive(const Dataset& d, const MatchConfig& cfg, std::size_t heuristic_removals,
                                       double calibrated_rate) {
  return estimate_exhaustive(d.size(), heuristic_removals, calibrated_rate, cfg.criteria.criteria.size(),
                             cfg.params.budget);
}

double calibrate_rate(const Dataset& d, const MatchConfig& cfg, const TestRegistry& registry, double min_seconds) {
  Evaluator evaluator(d, cfg.criteria, registry);
  FeasibilityRules rules(d, cfg.constraints);
  const SubsetState full(d);
  auto rows = rules.removable(full);
  if (rows.empty()) rows.push_back(0);
  const auto base = evaluator.prepare(full);
  auto ws = evaluator.make_workspace();

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::size_t done = 0;
  double elapsed = 0.0;
  volatile double sink = 0.0;
  while (done < 16 || elapsed < min_seconds) {
    const std::size_t row = rows[done % rows.size()];
    auto r = evaluator.r_without(base, std::span<const std::size_t>(&row, 1), ws);
    sink = sink + r.value_or(0.0);
    ++done;
    if (done % 16 == 0) elapsed = std::chrono::duration<double>(clock::now() - start).count();
  }
  elapsed = std::chrono::duration<double>(clock::now() - start).count();
  return static_cast<double>(done) / std::max(elapsed, std::numeric_limits<double>::min());
}

}  // namespace groupmatch
