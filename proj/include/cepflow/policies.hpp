#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cepflow/host.hpp"

namespace cepflow {

enum class PolicyKind { RoundRobin, ShortestQueue, LeastLoaded };

// Fixed candidate order; also the tie-break order for policy selection.
inline constexpr PolicyKind kPolicyCandidates[] = {
    PolicyKind::RoundRobin, PolicyKind::ShortestQueue, PolicyKind::LeastLoaded};

std::string_view policy_name(PolicyKind kind);
std::optional<PolicyKind> policy_from_name(std::string_view name);

// Splitting policy with its per-splitter state. The round-robin cursor
// lives here, not in the hosts; the policies are stateless with respect
// to the workers.
struct SplittingPolicy {
  PolicyKind kind = PolicyKind::RoundRobin;
  int rr_cursor = 0;
};

// Host indices ordered best-first; always a permutation of 0..m-1. The
// tail of the ranking serves as the redirect fallback order.
using PolicyRanking = std::vector<int>;

// Ranks hosts for the next partitioned event.
//   RR:   rotation starting at the cursor; the cursor advances by one.
//   JSQ:  ascending queue length, ties by lowest host id.
//   LLSF: ascending memory load, ties by lowest host id.
PolicyRanking rank_hosts(SplittingPolicy& policy,
                         std::span<const HostState> hosts);

}  // namespace cepflow
