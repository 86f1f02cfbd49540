#pragma once

#include <cstdint>

#include "cepflow/event.hpp"
#include "cepflow/stats.hpp"

namespace cepflow {

// Observable state of one back-end worker, read by the splitting policies
// and by the adaptive estimator. The runtime owns and updates it; the
// statistics accumulators cover a sliding window that the estimator
// resets at epoch boundaries.
struct HostState {
  int host_id = 0;
  std::size_t queue_len = 0;  // waiting plus in-service events
  std::size_t mem_load = 0;   // bytes: queue + replica buffer + open windows
  double service_rate = 0.0;  // nominal events/s
  bool busy = false;
  std::uint64_t served_count = 0;

  RunningStats inter_arrival_stats;  // microseconds between queue arrivals
  RunningStats service_stats;        // service durations, microseconds

  Timestamp last_arrival_ts = -1;
  Duration busy_us = 0;          // busy time inside the current stats window
  Timestamp window_start_ts = 0; // start of the current stats window

  void record_arrival(Timestamp now) {
    if (last_arrival_ts >= 0) {
      inter_arrival_stats.add(static_cast<double>(now - last_arrival_ts));
    }
    last_arrival_ts = now;
  }

  void record_service(Duration service_us) {
    service_stats.add(static_cast<double>(service_us));
    busy_us += service_us;
    ++served_count;
  }

  // Measured events/s over the stats window; falls back to the nominal
  // rate until samples exist.
  double measured_service_rate() const {
    const double mean_us = service_stats.mean();
    if (service_stats.count() == 0 || mean_us <= 0.0) return service_rate;
    return static_cast<double>(kMicrosPerSecond) / mean_us;
  }

  // Busy fraction of the stats window.
  double utilization(Timestamp now) const {
    const Duration elapsed = now - window_start_ts;
    if (elapsed <= 0) return 0.0;
    return static_cast<double>(busy_us) / static_cast<double>(elapsed);
  }

  void reset_stats_window(Timestamp now) {
    inter_arrival_stats.reset();
    service_stats.reset();
    busy_us = 0;
    window_start_ts = now;
    last_arrival_ts = -1;
  }
};

}  // namespace cepflow
