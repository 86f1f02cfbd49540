#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cepflow {

// All timestamps and durations are integer microseconds on one logical
// clock. Integer arithmetic keeps window comparisons exact.
using Timestamp = std::int64_t;
using Duration = std::int64_t;

constexpr Duration kMicrosPerSecond = 1'000'000;

// Symbolic event type ("E1", "E2", ...). Equality is exact name match.
struct EventType {
  std::string name;

  friend bool operator==(const EventType& a, const EventType& b) {
    return a.name == b.name;
  }
  friend bool operator!=(const EventType& a, const EventType& b) {
    return !(a == b);
  }
  friend bool operator<(const EventType& a, const EventType& b) {
    return a.name < b.name;
  }
};

// Attribute values are 64-bit ints, 64-bit floats or short strings.
using AttrValue = std::variant<std::int64_t, double, std::string>;

struct Attribute {
  std::string name;
  AttrValue value;

  friend bool operator==(const Attribute& a, const Attribute& b) {
    return a.name == b.name && a.value == b.value;
  }
};

// A point event: start and end timestamp coincide. arrival_ts is stamped
// once by the split operator and never rewritten; departure_ts is set by
// the worker that finishes the event's window evaluation.
struct PrimitiveEvent {
  EventType type;
  Timestamp start_ts = 0;
  Timestamp end_ts = 0;
  std::vector<Attribute> attributes;
  std::uint64_t seq = 0;  // generation order, used for tracing and tie-breaks
  std::optional<Timestamp> arrival_ts;
  std::optional<Timestamp> departure_ts;

  const AttrValue* find_attribute(std::string_view name) const;

  // Approximate in-memory size, used by the least-loaded policy's
  // memory accounting.
  std::size_t footprint_bytes() const;
};

// Interval event produced by a pattern match. Constituents are immutable
// snapshots in combination order; the span covers all of them.
struct CompositeEvent {
  EventType type;
  std::vector<PrimitiveEvent> constituents;
  Timestamp start_ts = 0;
  Timestamp end_ts = 0;
  std::vector<Attribute> attributes;
};

// A named input stream and its nominal rate in events per second.
struct StreamDescriptor {
  std::string source_id;
  double rate = 0.0;  // events/s, > 0
  EventType event_type;
};

// Builds a point event. Throws std::invalid_argument on a negative
// timestamp.
PrimitiveEvent make_primitive(EventType type, Timestamp ts,
                              std::vector<Attribute> attributes = {});

// Combines primitive events into a composite whose span is
// [min start_ts, max end_ts]. Throws std::invalid_argument when parts is
// empty.
CompositeEvent compose(EventType type, std::vector<PrimitiveEvent> parts);

// Wire format, one event per line: `type,ts,key=value,...`. Used by the
// record/replay facility.
std::string format_event_line(const PrimitiveEvent& event);
PrimitiveEvent parse_event_line(std::string_view line);

void write_stream(std::ostream& out, std::span<const PrimitiveEvent> events);
std::vector<PrimitiveEvent> read_stream(std::istream& in);

}  // namespace cepflow
