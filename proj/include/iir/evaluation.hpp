#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "iir/environment.hpp"
#include "iir/user_sim.hpp"

namespace iir {

/// User seed for the e-th evaluation episode of a query. Policies and the
/// oracle use the same derivation so their episodes are comparable.
std::uint64_t episode_seed(std::uint64_t base, std::string_view qid, int episode);

struct EvalSummary {
  double mean_return = 0.0;
  double mean_ap = 0.0;  // MAP over queries of the final lists
  std::size_t episodes = 0;
  std::vector<double> query_returns;  // per query, averaged over its episodes
  std::vector<double> query_aps;
};

/// Runs `episodes_per_query` episodes per query; the user is reseeded with
/// episode_seed(seed, qid, e) before each.
EvalSummary evaluate_policy(const Environment& env, const FeatureExtractor* features, Policy& policy,
                            const SimUser& user, std::span<const Query> queries,
                            int episodes_per_query, std::uint64_t seed);

}  // namespace iir
