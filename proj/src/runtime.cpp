#include "cepflow/runtime.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace cepflow {

void TraceSink::log(Timestamp ts, int host, std::uint64_t event_id,
                    std::string_view action) {
  out_ << ts << ',' << host << ',' << event_id << ',' << action << '\n';
}

std::optional<RoutedEvent> split(PrimitiveEvent event, SplittingPolicy& policy,
                                 std::span<const HostState> hosts,
                                 std::size_t queue_capacity,
                                 Duration redirect_latency_us, Timestamp now) {
  if (hosts.empty()) {
    throw std::invalid_argument("split needs at least one host");
  }
  const PolicyRanking ranking = rank_hosts(policy, hosts);
  // arrival_ts is stamped once, at the split operator.
  if (!event.arrival_ts.has_value()) {
    event.arrival_ts = now;
  }

  const auto full = [&](int host) {
    return hosts[static_cast<std::size_t>(host)].queue_len >= queue_capacity;
  };

  RoutedEvent routed;
  routed.event = std::move(event);
  const int first_choice = ranking.front();
  if (!full(first_choice)) {
    routed.target_host = first_choice;
    return routed;
  }
  for (std::size_t i = 1; i < ranking.size(); ++i) {
    if (!full(ranking[i])) {
      routed.target_host = ranking[i];
      routed.redirected_from = first_choice;
      routed.redirect_latency = redirect_latency_us;
      return routed;
    }
  }
  return std::nullopt;  // every queue full: hold at the splitter
}

std::vector<RoutedEvent> replicate(const PrimitiveEvent& event, int m) {
  if (m < 1) {
    throw std::invalid_argument("replicate needs m >= 1");
  }
  std::vector<RoutedEvent> copies;
  copies.reserve(static_cast<std::size_t>(m));
  for (int host = 0; host < m; ++host) {
    RoutedEvent r;
    r.event = event;
    r.target_host = host;
    copies.push_back(std::move(r));
  }
  return copies;
}

void sort_matches_deterministic(std::vector<CompositeEvent>& matches) {
  std::sort(matches.begin(), matches.end(),
            [](const CompositeEvent& a, const CompositeEvent& b) {
              if (a.end_ts != b.end_ts) return a.end_ts < b.end_ts;
              const std::size_t n =
                  std::min(a.constituents.size(), b.constituents.size());
              for (std::size_t i = 0; i < n; ++i) {
                if (a.constituents[i].start_ts != b.constituents[i].start_ts) {
                  return a.constituents[i].start_ts <
                         b.constituents[i].start_ts;
                }
                if (a.constituents[i].seq != b.constituents[i].seq) {
                  return a.constituents[i].seq < b.constituents[i].seq;
                }
              }
              return a.constituents.size() < b.constituents.size();
            });
}

namespace {

// Canonical grouping key for WHERE-attribute values.
std::string attr_group_key(const AttrValue& value) {
  if (const auto* i = std::get_if<std::int64_t>(&value)) {
    return "i" + std::to_string(*i);
  }
  if (const auto* d = std::get_if<double>(&value)) {
    return "d" + std::to_string(*d);
  }
  return "s" + std::get<std::string>(value);
}

constexpr std::size_t kWindowStateBytes = 48;  // bookkeeping per open window
constexpr std::size_t kMatchStateBytes = 16;   // retained per emitted match

// Replica events of one type, grouped by WHERE-key value, each group in
// start_ts order.
struct ReplicaBuffer {
  std::map<std::string, std::deque<PrimitiveEvent>> groups;
  std::size_t population = 0;
  std::size_t bytes = 0;
};

struct OpenWindow {
  PrimitiveEvent trigger;
  Timestamp expires_at = 0;    // trigger.start_ts + window (event time)
  Timestamp departure_ts = 0;  // last match emission, else eval completion
  std::uint64_t matches = 0;
  std::size_t state_bytes = 0;
  bool closed = false;
};

struct PendingService {
  PrimitiveEvent event;
  bool is_trigger = false;
  std::vector<CompositeEvent> matches;
  // Windows whose departure must advance to the completion time, with the
  // number of matches each one gained from this service.
  std::vector<std::pair<std::uint64_t, std::size_t>> window_gains;
  Duration service_us = 0;
};

struct Worker {
  HostState state;
  std::deque<PrimitiveEvent> queue;  // waiting events; FIFO
  std::deque<bool> queue_is_trigger;
  std::size_t queue_bytes = 0;
  bool busy = false;
  PendingService inflight;

  std::map<std::string, ReplicaBuffer> buffers;  // by event type name
  std::map<std::uint64_t, OpenWindow> windows;   // by window id
  std::map<std::string, std::vector<std::uint64_t>> windows_by_key;
  std::size_t window_bytes = 0;

  Duration total_busy_us = 0;

  void refresh_mem_load() {
    std::size_t buffer_bytes = 0;
    for (const auto& [_, buf] : buffers) buffer_bytes += buf.bytes;
    state.mem_load = queue_bytes + buffer_bytes + window_bytes;
  }
};

enum class SimEventKind { StreamArrival, WorkerDone, DeliverRouted,
                          SplitterResume };

struct SimEvent {
  Timestamp time = 0;
  std::uint64_t tick = 0;  // insertion order; total-orders equal times
  SimEventKind kind = SimEventKind::StreamArrival;
  int host = -1;
  std::size_t stream_index = 0;
  std::optional<RoutedEvent> routed;
};

struct SimEventAfter {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.tick > b.tick;
  }
};

}  // namespace

struct VirtualPipeline::Impl {
  const PatternQuery& query;
  RuntimeConfig config;
  const ServiceModel& service;
  SplitController& controller;
  MatchSink* sink;
  TraceSink* trace;

  std::string partitioned_type;
  std::vector<std::string> leaf_order;  // leaf type names, left to right

  std::vector<Worker> workers;
  std::priority_queue<SimEvent, std::vector<SimEvent>, SimEventAfter> calendar;
  std::uint64_t tick = 0;

  std::deque<PrimitiveEvent> splitter_pending;  // backpressure / stall queue
  Timestamp splitter_ready_ts = 0;

  // Start timestamps of partitioned events not yet in service anywhere;
  // replica eviction must keep everything these may still join.
  std::multiset<Timestamp> unprocessed_trigger_st;

  std::uint64_t next_window_id = 0;
  RunStats stats;

  Impl(const PatternQuery& q, const RuntimeConfig& c, const ServiceModel& s,
       SplitController& ctl, MatchSink* snk, TraceSink* trc)
      : query(q), config(c), service(s), controller(ctl), sink(snk),
        trace(trc) {
    partitioned_type = query.partitioned_type().name;
    for (const auto& t : query.pattern.leaf_types()) {
      leaf_order.push_back(t.name);
    }
    workers.resize(static_cast<std::size_t>(config.worker_count));
    for (int i = 0; i < config.worker_count; ++i) {
      auto& w = workers[static_cast<std::size_t>(i)];
      w.state.host_id = i;
      w.state.service_rate = service.nominal_service_rate(i);
    }
  }

  void schedule(SimEvent ev) {
    ev.tick = tick++;
    calendar.push(std::move(ev));
  }

  std::vector<HostState> host_snapshot() const {
    std::vector<HostState> snap;
    snap.reserve(workers.size());
    for (const auto& w : workers) snap.push_back(w.state);
    return snap;
  }

  std::span<HostState> host_span(std::vector<HostState>& snap) {
    return {snap.data(), snap.size()};
  }

  // --- queueing ---------------------------------------------------------

  void enqueue(int host, PrimitiveEvent event, bool is_trigger, Timestamp now) {
    auto& w = workers[static_cast<std::size_t>(host)];
    w.state.record_arrival(now);
    w.queue_bytes += event.footprint_bytes();
    if (trace != nullptr) trace->log(now, host, event.seq, "enqueue");
    if (is_trigger) ++stats.delivered;
    if (!w.busy && w.queue.empty()) {
      w.state.queue_len = 1;
      w.refresh_mem_load();
      start_service(host, std::move(event), is_trigger, now);
      return;
    }
    w.queue.push_back(std::move(event));
    w.queue_is_trigger.push_back(is_trigger);
    w.state.queue_len = w.queue.size() + (w.busy ? 1 : 0);
    w.refresh_mem_load();
  }

  // --- worker evaluation -------------------------------------------------

  // Enumerates matches completed by the arrival being serviced. The
  // partitioned leaf is bound to `trigger`; when `newest` is non-null the
  // leaf of its type is bound to it (the match must contain the newest
  // replica, everything else already sat in the buffers).
  struct Partial {
    std::vector<const PrimitiveEvent*> events;
    Timestamp min_start = 0;
    Timestamp max_end = 0;
  };

  std::vector<CompositeEvent> enumerate_completed(
      const Worker& w, const PrimitiveEvent& trigger,
      const PrimitiveEvent* newest) {
    const std::string* key_group = nullptr;
    std::string key_storage;
    if (query.has_key()) {
      const AttrValue* kv = trigger.find_attribute(query.where_key);
      if (kv == nullptr) return {};  // can never satisfy the key constraint
      key_storage = attr_group_key(*kv);
      key_group = &key_storage;
      if (newest != nullptr) {
        const AttrValue* nv = newest->find_attribute(query.where_key);
        if (nv == nullptr || attr_group_key(*nv) != key_storage) return {};
      }
    }

    auto partials = evaluate_node(query.pattern, w, trigger, newest, key_group);
    std::vector<CompositeEvent> matches;
    matches.reserve(partials.size());
    for (auto& p : partials) {
      std::vector<PrimitiveEvent> parts;
      parts.reserve(p.events.size());
      for (const auto* e : p.events) parts.push_back(*e);
      matches.push_back(compose(match_output_type(), std::move(parts)));
    }
    return matches;
  }

  std::vector<Partial> evaluate_node(const PatternExpr& node, const Worker& w,
                                     const PrimitiveEvent& trigger,
                                     const PrimitiveEvent* newest,
                                     const std::string* key_group) {
    std::vector<Partial> out;
    if (node.op == PatternOp::Leaf) {
      const std::string& type = node.leaf_type.name;
      if (type == partitioned_type) {
        out.push_back(Partial{{&trigger}, trigger.start_ts, trigger.end_ts});
        return out;
      }
      if (newest != nullptr && type == newest->type.name) {
        if (std::llabs(newest->start_ts - trigger.start_ts) <= query.window) {
          out.push_back(Partial{{newest}, newest->start_ts, newest->end_ts});
        }
        return out;
      }
      const auto buf_it = w.buffers.find(type);
      if (buf_it == w.buffers.end()) return out;
      const Timestamp lo = trigger.start_ts - query.window;
      const Timestamp hi = trigger.start_ts + query.window;
      auto scan = [&](const std::deque<PrimitiveEvent>& group) {
        for (const auto& e : group) {
          if (e.start_ts < lo) continue;
          if (e.start_ts > hi) break;  // groups are in start_ts order
          // The newest replica's leaf is bound; it must not reappear here.
          if (newest != nullptr && e.seq == newest->seq) continue;
          out.push_back(Partial{{&e}, e.start_ts, e.end_ts});
        }
      };
      if (key_group != nullptr) {
        const auto group_it = buf_it->second.groups.find(*key_group);
        if (group_it != buf_it->second.groups.end()) scan(group_it->second);
      } else {
        for (const auto& [_, group] : buf_it->second.groups) scan(group);
      }
      return out;
    }

    const auto lefts =
        evaluate_node(node.children[0], w, trigger, newest, key_group);
    if (lefts.empty()) return out;
    const auto rights =
        evaluate_node(node.children[1], w, trigger, newest, key_group);
    for (const auto& left : lefts) {
      for (const auto& right : rights) {
        if (node.op == PatternOp::Seq && !(left.min_start < right.min_start)) {
          continue;
        }
        const Timestamp min_start = std::min(left.min_start, right.min_start);
        const Timestamp max_end = std::max(left.max_end, right.max_end);
        if (!within_window(min_start, max_end, query.window)) continue;
        Partial combined;
        combined.events = left.events;
        combined.events.insert(combined.events.end(), right.events.begin(),
                               right.events.end());
        combined.min_start = min_start;
        combined.max_end = max_end;
        out.push_back(std::move(combined));
      }
    }
    return out;
  }

  // A match must contain the newest replica; filter partials without it.
  // (Handled by the leaf binding above.)

  void close_window(Worker& w, std::uint64_t window_id, Timestamp now) {
    auto it = w.windows.find(window_id);
    if (it == w.windows.end() || it->second.closed) return;
    OpenWindow& win = it->second;
    win.closed = true;
    w.window_bytes -= win.state_bytes;

    const Timestamp departure =
        win.departure_ts > 0 ? win.departure_ts : now;
    const Timestamp arrival = win.trigger.arrival_ts.value_or(departure);
    stats.processing_times_us.push_back(departure - arrival);
    PrimitiveEvent finalized = win.trigger;
    finalized.departure_ts = departure;
    controller.on_trigger_finalized(finalized, departure);
    w.windows.erase(it);
  }

  void close_expired_windows(Worker& w, Timestamp event_start, Timestamp now) {
    if (w.windows.empty()) return;
    std::vector<std::uint64_t> expired;
    for (const auto& [id, win] : w.windows) {
      if (win.expires_at < event_start) expired.push_back(id);
    }
    for (std::uint64_t id : expired) close_window(w, id, now);
    if (!expired.empty()) prune_window_key_index(w);
  }

  void prune_window_key_index(Worker& w) {
    for (auto it = w.windows_by_key.begin(); it != w.windows_by_key.end();) {
      auto& ids = it->second;
      ids.erase(std::remove_if(ids.begin(), ids.end(),
                               [&](std::uint64_t id) {
                                 return w.windows.find(id) == w.windows.end();
                               }),
                ids.end());
      it = ids.empty() ? w.windows_by_key.erase(it) : std::next(it);
    }
  }

  void evict_replicas(Worker& w, Timestamp trigger_start) {
    // Keep everything a still-unprocessed partitioned event might join.
    Timestamp guard = trigger_start;
    if (!unprocessed_trigger_st.empty()) {
      guard = std::min(guard, *unprocessed_trigger_st.begin());
    }
    const Timestamp cutoff = guard - query.window;
    for (auto& [_, buf] : w.buffers) {
      for (auto group_it = buf.groups.begin();
           group_it != buf.groups.end();) {
        auto& group = group_it->second;
        while (!group.empty() && group.front().start_ts < cutoff) {
          buf.bytes -= group.front().footprint_bytes();
          --buf.population;
          group.pop_front();
        }
        group_it = group.empty() ? buf.groups.erase(group_it)
                                 : std::next(group_it);
      }
    }
  }

  std::size_t total_buffer_population(const Worker& w) const {
    std::size_t n = 0;
    for (const auto& [_, buf] : w.buffers) n += buf.population;
    return n;
  }

  void start_service(int host, PrimitiveEvent event, bool is_trigger,
                     Timestamp now) {
    auto& w = workers[static_cast<std::size_t>(host)];
    assert(!w.busy);
    w.busy = true;
    w.state.busy = true;
    w.queue_bytes -= event.footprint_bytes();
    if (trace != nullptr) trace->log(now, host, event.seq, "dequeue");

    close_expired_windows(w, event.start_ts, now);

    PendingService pending;
    pending.is_trigger = is_trigger;

    if (is_trigger) {
      unprocessed_trigger_st.erase(
          unprocessed_trigger_st.find(event.start_ts));
      evict_replicas(w, event.start_ts);

      pending.matches = enumerate_completed(w, event, nullptr);

      OpenWindow win;
      win.trigger = event;
      win.expires_at = event.start_ts + query.window;
      win.state_bytes = kWindowStateBytes + event.footprint_bytes();
      const std::uint64_t id = next_window_id++;
      w.window_bytes += win.state_bytes;
      w.windows.emplace(id, std::move(win));
      if (query.has_key()) {
        if (const AttrValue* kv = event.find_attribute(query.where_key)) {
          w.windows_by_key[attr_group_key(*kv)].push_back(id);
        }
      }
      pending.window_gains.emplace_back(id, pending.matches.size());
      pending.service_us = service.trigger_service_time(
          host, event, total_buffer_population(w), pending.matches.size());
    } else {
      // Insert into the replica buffer first, then complete any open
      // window the arrival finishes.
      auto& buf = w.buffers[event.type.name];
      std::string group = "";
      if (query.has_key()) {
        if (const AttrValue* kv = event.find_attribute(query.where_key)) {
          group = attr_group_key(*kv);
        }
      }
      buf.bytes += event.footprint_bytes();
      ++buf.population;
      buf.groups[group].push_back(event);
      const PrimitiveEvent& stored = buf.groups[group].back();

      auto probe = [&](const std::vector<std::uint64_t>& ids) {
        for (std::uint64_t id : ids) {
          auto win_it = w.windows.find(id);
          if (win_it == w.windows.end() || win_it->second.closed) continue;
          const OpenWindow& win = win_it->second;
          if (std::llabs(stored.start_ts - win.trigger.start_ts) >
              query.window) {
            continue;
          }
          auto completed = enumerate_completed(w, win.trigger, &stored);
          if (!completed.empty()) {
            pending.window_gains.emplace_back(id, completed.size());
            for (auto& m : completed) pending.matches.push_back(std::move(m));
          }
        }
      };
      if (query.has_key()) {
        const auto it = w.windows_by_key.find(group);
        if (it != w.windows_by_key.end()) probe(it->second);
      } else {
        std::vector<std::uint64_t> all;
        all.reserve(w.windows.size());
        for (const auto& [id, _] : w.windows) all.push_back(id);
        probe(all);
      }
      pending.service_us = service.replica_service_time(
          host, event, total_buffer_population(w), pending.matches.size());
    }

    pending.event = std::move(event);
    w.inflight = std::move(pending);
    w.refresh_mem_load();

    SimEvent done;
    done.time = now + w.inflight.service_us;
    done.kind = SimEventKind::WorkerDone;
    done.host = host;
    schedule(done);
  }

  void on_worker_done(int host, Timestamp now) {
    auto& w = workers[static_cast<std::size_t>(host)];
    PendingService pending = std::move(w.inflight);
    w.busy = false;
    w.state.busy = false;
    w.state.record_service(pending.service_us);
    w.total_busy_us += pending.service_us;
    controller.on_service(host, pending.service_us, pending.is_trigger);

    // Matches are emitted at service completion.
    for (const auto& match : pending.matches) {
      ++stats.matches;
      if (trace != nullptr) trace->log(now, host, pending.event.seq, "match");
      if (sink != nullptr) sink->on_match(match, host, now);
    }
    for (const auto& [id, gained] : pending.window_gains) {
      auto it = w.windows.find(id);
      if (it == w.windows.end()) continue;
      OpenWindow& win = it->second;
      win.departure_ts = now;
      win.matches += gained;
      const std::size_t extra = kMatchStateBytes * gained;
      win.state_bytes += extra;
      w.window_bytes += extra;
    }

    if (!w.queue.empty()) {
      PrimitiveEvent next = std::move(w.queue.front());
      w.queue.pop_front();
      const bool is_trigger = w.queue_is_trigger.front();
      w.queue_is_trigger.pop_front();
      w.state.queue_len = w.queue.size() + 1;
      start_service(host, std::move(next), is_trigger, now);
    } else {
      w.state.queue_len = 0;
    }
    w.refresh_mem_load();

    drain_splitter(now);
  }

  // --- splitter ----------------------------------------------------------

  void on_partitioned_arrival(PrimitiveEvent event, Timestamp now) {
    ++stats.partitioned_in;
    event.arrival_ts = now;
    unprocessed_trigger_st.insert(event.start_ts);
    splitter_pending.push_back(std::move(event));
    drain_splitter(now);
  }

  void drain_splitter(Timestamp now) {
    while (!splitter_pending.empty() && now >= splitter_ready_ts) {
      auto snapshot = host_snapshot();
      SplittingPolicy& policy =
          controller.active_policy(now, {snapshot.data(), snapshot.size()});
      auto routed = split(splitter_pending.front(), policy,
                          {snapshot.data(), snapshot.size()},
                          config.queue_capacity, config.redirect_latency_us,
                          now);
      if (!routed.has_value()) return;  // backpressure: retry on next dequeue
      splitter_pending.pop_front();

      controller.on_assignment(*routed, now);
      if (routed->redirected_from.has_value()) {
        ++stats.redirects;
        if (trace != nullptr) {
          trace->log(now, *routed->redirected_from, routed->event.seq,
                     "redirect");
        }
        SimEvent deliver;
        deliver.time = now + routed->redirect_latency.value_or(0);
        deliver.kind = SimEventKind::DeliverRouted;
        deliver.host = routed->target_host;
        deliver.routed = std::move(routed);
        schedule(deliver);
      } else {
        enqueue(routed->target_host, std::move(routed->event), true, now);
      }

      std::vector<HostState> live;
      live.reserve(workers.size());
      for (auto& w : workers) live.push_back(w.state);
      const Duration stall = controller.after_route(now, host_span(live));
      for (std::size_t i = 0; i < workers.size(); ++i) {
        workers[i].state = live[i];  // controller may reset stat windows
      }
      if (stall > 0) {
        splitter_ready_ts = now + stall;
        SimEvent resume;
        resume.time = splitter_ready_ts;
        resume.kind = SimEventKind::SplitterResume;
        schedule(resume);
        return;
      }
    }
  }

  // --- main loop ----------------------------------------------------------

  RunStats run(std::span<const PrimitiveEvent> merged) {
    for (std::size_t i = 0; i < merged.size(); ++i) {
      SimEvent ev;
      ev.time = merged[i].start_ts;
      ev.kind = SimEventKind::StreamArrival;
      ev.stream_index = i;
      schedule(ev);
    }

    Timestamp now = 0;
    while (!calendar.empty()) {
      SimEvent ev = calendar.top();
      calendar.pop();
      now = std::max(now, ev.time);
      switch (ev.kind) {
        case SimEventKind::StreamArrival: {
          const PrimitiveEvent& e = merged[ev.stream_index];
          if (e.type.name == partitioned_type) {
            on_partitioned_arrival(e, now);
          } else {
            ++stats.replica_in;
            for (auto& copy : replicate(e, config.worker_count)) {
              enqueue(copy.target_host, std::move(copy.event), false, now);
            }
          }
          break;
        }
        case SimEventKind::WorkerDone:
          on_worker_done(ev.host, now);
          break;
        case SimEventKind::DeliverRouted:
          enqueue(ev.routed->target_host, std::move(ev.routed->event), true,
                  now);
          break;
        case SimEventKind::SplitterResume:
          drain_splitter(now);
          break;
      }
    }

    // Everything processed: finalize the windows still open.
    for (auto& w : workers) {
      std::vector<std::uint64_t> ids;
      ids.reserve(w.windows.size());
      for (const auto& [id, _] : w.windows) ids.push_back(id);
      for (std::uint64_t id : ids) close_window(w, id, now);
      w.refresh_mem_load();
    }

    stats.end_ts = now;
    for (const auto& w : workers) {
      stats.host_utilization.push_back(
          now > 0 ? static_cast<double>(w.total_busy_us) /
                        static_cast<double>(now)
                  : 0.0);
      stats.host_served.push_back(w.state.served_count);
    }
    return std::move(stats);
  }
};

VirtualPipeline::VirtualPipeline(const PatternQuery& query,
                                 const RuntimeConfig& config,
                                 const ServiceModel& service,
                                 SplitController& controller, MatchSink* sink,
                                 TraceSink* trace)
    : impl_(std::make_unique<Impl>(query, config, service, controller, sink,
                                   trace)) {}

VirtualPipeline::~VirtualPipeline() = default;

RunStats VirtualPipeline::run(std::span<const PrimitiveEvent> merged_stream) {
  return impl_->run(merged_stream);
}

}  // namespace cepflow
