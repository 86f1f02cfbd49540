#include "cepflow/policies.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace cepflow {

std::string_view policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::RoundRobin:
      return "rr";
    case PolicyKind::ShortestQueue:
      return "jsq";
    case PolicyKind::LeastLoaded:
      return "llsf";
  }
  return "?";
}

std::optional<PolicyKind> policy_from_name(std::string_view name) {
  if (name == "rr") return PolicyKind::RoundRobin;
  if (name == "jsq") return PolicyKind::ShortestQueue;
  if (name == "llsf") return PolicyKind::LeastLoaded;
  return std::nullopt;
}

PolicyRanking rank_hosts(SplittingPolicy& policy,
                         std::span<const HostState> hosts) {
  if (hosts.empty()) {
    throw std::invalid_argument("rank_hosts needs at least one host");
  }
  const int m = static_cast<int>(hosts.size());
  PolicyRanking ranking(hosts.size());
  std::iota(ranking.begin(), ranking.end(), 0);

  switch (policy.kind) {
    case PolicyKind::RoundRobin: {
      const int start = policy.rr_cursor % m;
      std::rotate(ranking.begin(), ranking.begin() + start, ranking.end());
      policy.rr_cursor = (start + 1) % m;
      break;
    }
    case PolicyKind::ShortestQueue:
      std::stable_sort(ranking.begin(), ranking.end(), [&](int a, int b) {
        return hosts[a].queue_len < hosts[b].queue_len;
      });
      break;
    case PolicyKind::LeastLoaded:
      std::stable_sort(ranking.begin(), ranking.end(), [&](int a, int b) {
        return hosts[a].mem_load < hosts[b].mem_load;
      });
      break;
  }
  return ranking;
}

}  // namespace cepflow
