#include "cepflow/event.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cepflow {

const AttrValue* PrimitiveEvent::find_attribute(std::string_view name) const {
  for (const auto& attr : attributes) {
    if (attr.name == name) return &attr.value;
  }
  return nullptr;
}

std::size_t PrimitiveEvent::footprint_bytes() const {
  std::size_t bytes = 56;  // header: type tag, timestamps, seq
  bytes += type.name.size();
  for (const auto& attr : attributes) {
    bytes += 24 + attr.name.size();
    if (const auto* s = std::get_if<std::string>(&attr.value)) {
      bytes += s->size();
    } else {
      bytes += 8;
    }
  }
  return bytes;
}

PrimitiveEvent make_primitive(EventType type, Timestamp ts,
                              std::vector<Attribute> attributes) {
  if (type.name.empty()) {
    throw std::invalid_argument("event type must be non-empty");
  }
  if (ts < 0) {
    throw std::invalid_argument("event timestamp must be non-negative");
  }
  PrimitiveEvent event;
  event.type = std::move(type);
  event.start_ts = ts;
  event.end_ts = ts;
  event.attributes = std::move(attributes);
  return event;
}

CompositeEvent compose(EventType type, std::vector<PrimitiveEvent> parts) {
  if (parts.empty()) {
    throw std::invalid_argument("composite event needs at least one part");
  }
  CompositeEvent out;
  out.type = std::move(type);
  out.start_ts = parts.front().start_ts;
  out.end_ts = parts.front().end_ts;
  for (const auto& p : parts) {
    out.start_ts = std::min(out.start_ts, p.start_ts);
    out.end_ts = std::max(out.end_ts, p.end_ts);
  }
  out.constituents = std::move(parts);
  return out;
}

namespace {

void append_value(std::string& out, const AttrValue& value) {
  if (const auto* i = std::get_if<std::int64_t>(&value)) {
    out += std::to_string(*i);
  } else if (const auto* d = std::get_if<double>(&value)) {
    std::ostringstream os;
    os.precision(17);
    os << *d;
    out += os.str();
  } else {
    out += std::get<std::string>(value);
  }
}

// Values round-trip as int when they scan fully as one, as double when
// they scan as a number, and as string otherwise.
AttrValue parse_value(std::string_view text) {
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), i);
  if (ec == std::errc{} && p == text.data() + text.size()) return i;
  double d = 0.0;
  auto [pd, ecd] = std::from_chars(text.data(), text.data() + text.size(), d);
  if (ecd == std::errc{} && pd == text.data() + text.size()) return d;
  return std::string(text);
}

}  // namespace

std::string format_event_line(const PrimitiveEvent& event) {
  std::string line = event.type.name;
  line += ',';
  line += std::to_string(event.start_ts);
  for (const auto& attr : event.attributes) {
    line += ',';
    line += attr.name;
    line += '=';
    append_value(line, attr.value);
  }
  return line;
}

PrimitiveEvent parse_event_line(std::string_view line) {
  const auto first_comma = line.find(',');
  if (first_comma == std::string_view::npos) {
    throw std::invalid_argument("event line needs `type,ts`");
  }
  std::string_view type_name = line.substr(0, first_comma);
  std::string_view rest = line.substr(first_comma + 1);

  const auto ts_end = rest.find(',');
  std::string_view ts_text =
      ts_end == std::string_view::npos ? rest : rest.substr(0, ts_end);
  Timestamp ts = 0;
  auto [p, ec] =
      std::from_chars(ts_text.data(), ts_text.data() + ts_text.size(), ts);
  if (ec != std::errc{} || p != ts_text.data() + ts_text.size()) {
    throw std::invalid_argument("bad timestamp in event line");
  }

  std::vector<Attribute> attrs;
  if (ts_end != std::string_view::npos) {
    std::string_view tail = rest.substr(ts_end + 1);
    while (!tail.empty()) {
      const auto comma = tail.find(',');
      std::string_view field =
          comma == std::string_view::npos ? tail : tail.substr(0, comma);
      const auto eq = field.find('=');
      if (eq == std::string_view::npos) {
        throw std::invalid_argument("attribute needs key=value");
      }
      attrs.push_back(Attribute{std::string(field.substr(0, eq)),
                                parse_value(field.substr(eq + 1))});
      if (comma == std::string_view::npos) break;
      tail = tail.substr(comma + 1);
    }
  }
  return make_primitive(EventType{std::string(type_name)}, ts,
                        std::move(attrs));
}

void write_stream(std::ostream& out, std::span<const PrimitiveEvent> events) {
  for (const auto& e : events) {
    out << format_event_line(e) << '\n';
  }
}

std::vector<PrimitiveEvent> read_stream(std::istream& in) {
  std::vector<PrimitiveEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(parse_event_line(line));
    events.back().seq = events.size() - 1;
  }
  return events;
}

}  // namespace cepflow
