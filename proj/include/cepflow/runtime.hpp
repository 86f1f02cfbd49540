#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "cepflow/event.hpp"
#include "cepflow/host.hpp"
#include "cepflow/policies.hpp"
#include "cepflow/query.hpp"

namespace cepflow {

enum class RunMode { VirtualTime, WallClock };

struct RuntimeConfig {
  int worker_count = 2;               // m, fixed per run
  std::size_t queue_capacity = 64;    // per-worker occupancy that triggers redirects
  RunMode mode = RunMode::VirtualTime;
  Duration redirect_latency_us = 500; // constant re-routing cost
};

// Routing decision for one partitioned event.
struct RoutedEvent {
  PrimitiveEvent event;
  int target_host = 0;
  std::optional<int> redirected_from;
  std::optional<Duration> redirect_latency;
};

// Policy-level split decision over a host snapshot. Stamps arrival_ts,
// picks the policy's best host, and falls through the ranking when the
// choice is at capacity. Returns nullopt when every queue is full; the
// caller must hold the event and retry (backpressure, never drop).
std::optional<RoutedEvent> split(PrimitiveEvent event, SplittingPolicy& policy,
                                 std::span<const HostState> hosts,
                                 std::size_t queue_capacity,
                                 Duration redirect_latency_us, Timestamp now);

// Fan-out for the replicated stream: one copy per host, identical
// payloads. Throws std::invalid_argument when m < 1.
std::vector<RoutedEvent> replicate(const PrimitiveEvent& event, int m);

// Service time source for the workers. Implementations decide the cost of
// a window evaluation; the runtime only schedules with the result.
class ServiceModel {
 public:
  virtual ~ServiceModel() = default;

  // Cost of absorbing one replicated event: buffer insert plus probing the
  // open windows it may complete. `matches` is the number it completed.
  virtual Duration replica_service_time(int host, const PrimitiveEvent& event,
                                        std::size_t buffer_events,
                                        std::size_t matches) const = 0;

  // Cost of a partitioned event's window evaluation over `buffer_events`
  // buffered replicas, emitting `matches`.
  virtual Duration trigger_service_time(int host, const PrimitiveEvent& event,
                                        std::size_t buffer_events,
                                        std::size_t matches) const = 0;

  // Nominal service capacity, events/s, used before measurements exist.
  virtual double nominal_service_rate(int host) const = 0;
};

class MatchSink {
 public:
  virtual ~MatchSink() = default;
  virtual void on_match(const CompositeEvent& match, int host,
                        Timestamp emit_ts) = 0;
};

// Collects matches for multiset comparison against the reference matcher.
class CollectingSink final : public MatchSink {
 public:
  void on_match(const CompositeEvent& match, int, Timestamp) override {
    matches.push_back(match);
  }
  std::vector<CompositeEvent> matches;
};

class CountingSink final : public MatchSink {
 public:
  void on_match(const CompositeEvent&, int, Timestamp) override { ++count; }
  std::uint64_t count = 0;
};

// Optional line-based audit log: `ts,host,event_id,action`.
class TraceSink {
 public:
  explicit TraceSink(std::ostream& out) : out_(out) {}
  void log(Timestamp ts, int host, std::uint64_t event_id,
           std::string_view action);

 private:
  std::ostream& out_;
};

// Supplies the active splitting policy and observes routing outcomes.
// The adaptive strategy implements this; static runs use
// StaticPolicyController.
class SplitController {
 public:
  virtual ~SplitController() = default;

  // Policy for the next partitioned event. `hosts` is the live state.
  virtual SplittingPolicy& active_policy(Timestamp now,
                                         std::span<const HostState> hosts) = 0;

  // Outcome of the routing decision just made.
  virtual void on_assignment(const RoutedEvent& routed, Timestamp now) {
    (void)routed;
    (void)now;
  }

  // A worker finished one service; `is_trigger` marks partitioned events.
  virtual void on_service(int host, Duration service_us, bool is_trigger) {
    (void)host;
    (void)service_us;
    (void)is_trigger;
  }

  // A partitioned event's window evaluation is complete.
  virtual void on_trigger_finalized(const PrimitiveEvent& trigger,
                                    Timestamp departure_ts) {
    (void)trigger;
    (void)departure_ts;
  }

  // Called after each partitioned event is routed. May mutate host stats
  // windows (epoch resets) and may return a stall: virtual time the
  // splitter must spend on estimation before routing further events.
  virtual Duration after_route(Timestamp now, std::span<HostState> hosts) {
    (void)now;
    (void)hosts;
    return 0;
  }
};

class StaticPolicyController final : public SplitController {
 public:
  explicit StaticPolicyController(PolicyKind kind) { policy_.kind = kind; }
  SplittingPolicy& active_policy(Timestamp,
                                 std::span<const HostState>) override {
    return policy_;
  }

 private:
  SplittingPolicy policy_;
};

struct RunStats {
  std::uint64_t partitioned_in = 0;  // events entering the split operator
  std::uint64_t delivered = 0;       // partitioned events reaching a worker
  std::uint64_t replica_in = 0;
  std::uint64_t redirects = 0;
  std::uint64_t matches = 0;
  std::vector<Duration> processing_times_us;  // departure - arrival, per trigger
  std::vector<double> host_utilization;       // whole-run busy fraction
  std::vector<std::uint64_t> host_served;
  Timestamp end_ts = 0;
};

// Deterministic single-threaded discrete-event implementation of the
// split-(process*)-merge assembly. Workers evaluate the pattern against
// their replica buffers; every qualifying combination is emitted exactly
// once, by the worker owning the match's partitioned constituent.
class VirtualPipeline {
 public:
  VirtualPipeline(const PatternQuery& query, const RuntimeConfig& config,
                  const ServiceModel& service, SplitController& controller,
                  MatchSink* sink, TraceSink* trace = nullptr);
  ~VirtualPipeline();

  // Runs the full stream (both input streams merged, sorted by
  // (start_ts, seq)) to completion and drains all queues.
  RunStats run(std::span<const PrimitiveEvent> merged_stream);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Wall-clock variant: one splitter (caller thread), m worker threads with
// bounded blocking queues, merge collector. Same match-output contract as
// the virtual engine, without deterministic ordering or timing.
RunStats run_threaded_pipeline(const PatternQuery& query,
                               const RuntimeConfig& config,
                               const ServiceModel& service,
                               SplitController& controller, MatchSink* sink,
                               std::span<const PrimitiveEvent> merged_stream);

// Merge helper: deterministic ordering by (end_ts, constituent
// timestamps) for reproducible comparisons.
void sort_matches_deterministic(std::vector<CompositeEvent>& matches);

}  // namespace cepflow
