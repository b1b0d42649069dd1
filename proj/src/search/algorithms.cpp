#include <array>
#include <utility>

#include <fmt/format.h>

#include "groupmatch/search.hpp"

namespace groupmatch {
namespace {

constexpr std::array<std::pair<std::string_view, Algorithm>, 8> kNames{{
    {"random", Algorithm::random},
    {"greedy", Algorithm::greedy},
    {"h3", Algorithm::h3},
    {"h4", Algorithm::h4},
    {"exhaustive", Algorithm::exhaustive},
    {"heuristic2", Algorithm::greedy},
    {"heuristic3", Algorithm::h3},
    {"heuristic4", Algorithm::h4},
}};

}  // namespace

std::string_view algorithm_name(Algorithm a) {
  for (const auto& [name, alg] : kNames)
    if (alg == a) return name;
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (const auto& [n, alg] : kNames)
    if (n == name) return alg;
  return std::nullopt;
}

std::string AlgorithmSpec::label() const {
  std::string out(algorithm_name(algorithm));
  std::vector<std::string> parts;
  if (iterations) parts.push_back(fmt::format("I={}", *iterations));
  if (lookahead) parts.push_back(fmt::format("L={}", *lookahead));
  if (rho) parts.push_back(fmt::format("rho={}", *rho));
  if (max_removed) parts.push_back(fmt::format("n={}", *max_removed));
  if (!parts.empty()) out += fmt::format("({})", fmt::join(parts, ","));
  return out;
}

MatchResult run_algorithm(const Dataset& d, const MatchConfig& cfg, const AlgorithmSpec& spec,
                          const TestRegistry& registry) {
  MatchConfig local = cfg;
  if (spec.iterations) local.params.iterations = *spec.iterations;
  if (spec.lookahead) local.params.lookahead = *spec.lookahead;
  if (spec.rho) local.params.rho = *spec.rho;
  if (spec.max_removed) local.params.max_removed = *spec.max_removed;
  MatchResult result;
  switch (spec.algorithm) {
    case Algorithm::random:
      result = random_search(d, local, registry);
      break;
    case Algorithm::greedy:
      result = greedy_search(d, local, registry);
      break;
    case Algorithm::h3:
      result = lookahead_search(d, local, LookaheadVariant::h3, registry);
      break;
    case Algorithm::h4:
      result = lookahead_search(d, local, LookaheadVariant::h4, registry);
      break;
    case Algorithm::exhaustive:
      result = exhaustive_search(d, local, registry);
      break;
  }
  result.algorithm = spec.label();
  return result;
}

}  // namespace groupmatch
