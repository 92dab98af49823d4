#include "iir/evaluation.hpp"

namespace iir {

std::uint64_t episode_seed(std::uint64_t base, std::string_view qid, int episode) {
  // FNV-1a over the query id, then a splitmix64 finalizer.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : qid) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = h ^ (base * 0x9E3779B97F4A7C15ULL) ^ (static_cast<std::uint64_t>(episode) << 32);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

EvalSummary evaluate_policy(const Environment& env, const FeatureExtractor* features, Policy& policy,
                            const SimUser& user, std::span<const Query> queries,
                            int episodes_per_query, std::uint64_t seed) {
  if (episodes_per_query < 1) throw Error("episodes_per_query must be at least 1");
  EvalSummary out;
  if (queries.empty()) return out;
  SimUser u = user;
  for (const auto& q : queries) {
    double ret = 0.0, ap = 0.0;
    for (int e = 0; e < episodes_per_query; ++e) {
      u.reseed(episode_seed(seed, q.qid, e));
      const Episode ep = run_episode(env, features, policy, u, q);
      ret += ep.total_return;
      ap += ep.final_ap;
      ++out.episodes;
    }
    out.query_returns.push_back(ret / episodes_per_query);
    out.query_aps.push_back(ap / episodes_per_query);
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out.mean_return += out.query_returns[i];
    out.mean_ap += out.query_aps[i];
  }
  out.mean_return /= static_cast<double>(queries.size());
  out.mean_ap /= static_cast<double>(queries.size());
  return out;
}

}  // namespace iir
