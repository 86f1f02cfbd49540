#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cepflow/host.hpp"
#include "cepflow/policies.hpp"
#include "cepflow/runtime.hpp"
#include "cepflow/stats.hpp"

namespace cepflow {

// Sizing inputs: arrival rate, service rate, the utilization threshold
// delta in (0,1], the MSE threshold beta, and the adaptation epoch length
// tau in events.
struct SizingParams {
  double lambda = 0.0;  // events/s
  double mu = 0.0;      // events/s per server
  double delta = 0.9;
  double beta = 1.0;
  int tau = 1000;
};

// Minimal worker count m with lambda/(m*mu) <= delta; never below 1.
// Throws std::invalid_argument on non-positive lambda or mu.
int compute_parallel_degree(const SizingParams& p);

// Batch partition size i = floor(mu*delta), clamped to >= 1.
int batch_size(const SizingParams& p);

// G/G/1 waiting-time approximation (Kingman / Allen-Cunneen form):
//   (1/mu) * (rho/(1-rho)) * ((c2a + c2s)/2)
// mu in events/s, result in seconds. Throws std::domain_error when
// rho >= 1 (the estimate is undefined at saturation).
double kingman_wait(double rho, double mu, double c2a, double c2s);

// G/G/m waiting-time approximation (Sakasegawa form):
//   rho^(sqrt(2(m+1))-1) / (mu*m*(1-rho)) * ((c2a + c2s)/2)
// Reduces exactly to kingman_wait at m=1.
double multiserver_wait(double rho, double mu, int m, double c2a, double c2s);

// Mean squared error of the lag-`lag` wait prediction over the most
// recent tau/q segments of `segment_waits` (chronological order): the
// value lagged by `lag` is compared against the nearest preceding one.
// Returns nullopt when the range is degenerate (tau/q - lag - 1 <= 0, q
// not a divisor of tau, or not enough history).
std::optional<double> estimation_mse(std::span<const double> segment_waits,
                                     int q, int lag, int tau);

// Measured timing inputs of the trade-off solver, microseconds.
struct TimingStats {
  double t_ps_batch_us = 0.0;  // mean processing time per batch of i events
  double t_rd_event_us = 0.0;  // mean redirect time per event
  double t_es_batch_us = 0.0;  // mean estimation time per batch
  double c2_arrival = 1.0;
  double c2_service = 1.0;
};

struct TradeoffResult {
  int q = 1;
  int lag = 1;
  bool fallback = false;  // no feasible pair; (tau/i, 1) returned
  double mse = 0.0;       // MSE of the returned pair (NaN when unavailable)
  double objective = 0.0; // MSE / segment processing time
};

// Grid search over q in divisors(tau), lag in 1..tau for the feasible
// pair minimizing MSE / T_ps_segment subject to MSE < beta and
// lag * T_ps_segment / m > q * t_es (the estimation must finish inside
// the processing budget of the lag). Ties: lower lag, then lower q.
TradeoffResult tradeoff_solve(const TimingStats& stats, const SizingParams& p,
                              int m, std::span<const double> history);

// Per-policy assignment/redirect histogram. Counts are fractional so
// that idle candidates can decay with exponential forgetting. The
// redirect-latency histogram has k fixed-width buckets; bucket r (1-based)
// represents latency r*width.
class AssignHistogram {
 public:
  AssignHistogram() = default;
  explicit AssignHistogram(int m, double bucket_width_us = 500.0,
                           int bucket_count = 32);

  void record(int host, bool redirected,
              std::optional<Duration> redirect_latency_us);
  void decay(double factor);

  double total_assigned() const { return total_assigned_; }
  bool has_observations() const { return total_assigned_ > 0.0; }

  // P^H per host; sums to 1 when observations exist, all-zero otherwise.
  std::vector<double> assignment_probabilities() const;
  // P^R per host: fraction of this policy's events redirected to host i.
  std::vector<double> redirect_probabilities() const;

  // Probability-weighted mean of the latency bucket values, microseconds;
  // 0 when no redirects were recorded.
  double expected_redirect_time_us() const;

  std::span<const double> bucket_counts() const { return buckets_; }
  double bucket_value_us(std::size_t r) const {
    return static_cast<double>(r + 1) * bucket_width_us_;
  }

 private:
  std::vector<double> assigned_;
  std::vector<double> redirected_;
  std::vector<double> buckets_;
  double bucket_width_us_ = 500.0;
  double total_assigned_ = 0.0;
  double total_redirected_ = 0.0;
};

inline void record_assignment(AssignHistogram& hist, int host, bool redirected,
                              std::optional<Duration> redirect_latency_us) {
  hist.record(host, redirected, redirect_latency_us);
}

inline double expected_redirect_time(const AssignHistogram& hist) {
  return hist.expected_redirect_time_us();
}

// Inputs of the per-host wait estimate at one instant.
struct HostWaitInputs {
  double rho = 0.0;  // utilization
  double mu = 0.0;   // events/s
  double c2a = 0.0;
  double c2s = 0.0;
};

HostWaitInputs host_wait_inputs(const HostState& host, Timestamp now);

// Expected wait in seconds for one host; +infinity when saturated
// (rho >= 1).
double host_expected_wait(const HostWaitInputs& in);

// E[W_Pj]: assignment-probability-weighted host waits plus
// redirect-probability-weighted redirect time, seconds. +infinity when
// any host carrying assignment probability is saturated.
double policy_expected_wait(const AssignHistogram& hist,
                            std::span<const HostWaitInputs> hosts);

struct PolicyDecision {
  PolicyKind chosen = PolicyKind::RoundRobin;
  std::array<double, 3> expected_waits{};  // indexed by candidate order
  std::uint64_t epoch = 0;
};

// Argmin of policy_expected_wait over the candidates; ties and the
// no-observations fallback resolve in candidate order (RR first).
PolicyDecision select_policy(std::span<const AssignHistogram> histograms,
                             std::span<const HostWaitInputs> hosts,
                             std::uint64_t epoch);

// One adaptation-trace row per candidate per decision.
struct AdaptationRecord {
  std::uint64_t epoch = 0;
  PolicyKind candidate = PolicyKind::RoundRobin;
  double expected_wait_s = 0.0;
  bool chosen = false;
  int q = 1;
  int lag = 1;
  double mse = -1.0;  // -1 when no solved estimate is available
};

struct AppsConfig {
  SizingParams sizing;
  int worker_count = 2;
  int warmup_epochs_per_candidate = 1;
  double forgetting = 0.8;        // per-epoch decay of idle candidates
  double explore_floor = 0.05;    // re-explore below this fraction of tau
  double est_batch_cost_us = 50;  // deterministic T_es model per batch
  double redirect_bucket_width_us = 500.0;
  int redirect_bucket_count = 32;
};

// The online strategy: sizes segments, collects timing statistics,
// re-solves (q, lag) each epoch and applies the least-expected-wait
// policy to each upcoming segment.
class AppsController final : public SplitController {
 public:
  explicit AppsController(AppsConfig config);

  SplittingPolicy& active_policy(Timestamp now,
                                 std::span<const HostState> hosts) override;
  void on_assignment(const RoutedEvent& routed, Timestamp now) override;
  void on_service(int host, Duration service_us, bool is_trigger) override;
  Duration after_route(Timestamp now, std::span<HostState> hosts) override;

  const std::vector<AdaptationRecord>& decisions() const { return records_; }
  int current_q() const { return q_; }
  int current_lag() const { return lag_; }
  const std::array<AssignHistogram, 3>& histograms() const {
    return histograms_;
  }

 private:
  void end_segment(Timestamp now, std::span<HostState> hosts);
  void end_epoch(Timestamp now, std::span<HostState> hosts);
  TimingStats measured_timing() const;

  AppsConfig config_;
  int batch_events_ = 1;    // i = floor(mu*delta)
  int segment_events_ = 1;  // q * i
  int q_ = 1;
  int lag_ = 1;
  double current_mse_ = -1.0;

  std::array<SplittingPolicy, 3> policies_;
  std::array<AssignHistogram, 3> histograms_;
  std::size_t active_ = 0;
  bool warming_up_ = true;

  std::uint64_t epoch_index_ = 0;
  std::uint64_t decision_index_ = 0;
  std::uint64_t events_in_epoch_ = 0;
  std::uint64_t events_in_segment_ = 0;

  // Segment-scope measurements for the wait history.
  RunningStats seg_arrival_gaps_;
  RunningStats seg_service_;
  std::uint64_t seg_services_ = 0;
  Timestamp seg_start_ts_ = 0;
  Timestamp last_trigger_arrival_ = -1;

  // Epoch-scope measurements for the trade-off solver.
  RunningStats epoch_service_;
  std::uint64_t epoch_services_ = 0;
  std::uint64_t epoch_triggers_ = 0;
  RunningStats epoch_redirect_latency_;

  std::vector<double> wait_history_;  // per-segment f(E[W]) values, seconds
  std::deque<std::vector<HostWaitInputs>> snapshots_;  // per segment end

  Duration pending_stall_ = 0;
  std::vector<AdaptationRecord> records_;
};

}  // namespace cepflow
