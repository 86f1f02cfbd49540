#include <algorithm>

#include "cepflow/query.hpp"

namespace cepflow {

namespace {

// Partial match for one subtree: constituents in leaf order plus the
// combined span and the shared WHERE-key value.
struct Partial {
  std::vector<std::size_t> events;  // indices into the stream
  Timestamp min_start = 0;
  Timestamp max_end = 0;
  const AttrValue* key = nullptr;
};

class Enumerator {
 public:
  Enumerator(const PatternQuery& query,
             std::span<const PrimitiveEvent> stream)
      : query_(query), stream_(stream) {}

  std::vector<Partial> evaluate(const PatternExpr& node) const {
    if (node.op == PatternOp::Leaf) {
      return leaf_candidates(node.leaf_type);
    }
    const auto lefts = evaluate(node.children[0]);
    const auto rights = evaluate(node.children[1]);
    std::vector<Partial> out;
    for (const auto& left : lefts) {
      for (const auto& right : rights) {
        // SEQ orders the children by their composite start timestamps;
        // AND imposes no order.
        if (node.op == PatternOp::Seq &&
            !(left.min_start < right.min_start)) {
          continue;
        }
        const Timestamp min_start = std::min(left.min_start, right.min_start);
        const Timestamp max_end = std::max(left.max_end, right.max_end);
        if (!within_window(min_start, max_end, query_.window)) continue;
        if (query_.has_key() && !(*left.key == *right.key)) continue;

        Partial combined;
        combined.events = left.events;
        combined.events.insert(combined.events.end(), right.events.begin(),
                               right.events.end());
        combined.min_start = min_start;
        combined.max_end = max_end;
        combined.key = left.key;
        out.push_back(std::move(combined));
      }
    }
    return out;
  }

 private:
  std::vector<Partial> leaf_candidates(const EventType& type) const {
    std::vector<Partial> out;
    for (std::size_t i = 0; i < stream_.size(); ++i) {
      const auto& e = stream_[i];
      if (e.type != type) continue;
      Partial p;
      p.events = {i};
      p.min_start = e.start_ts;
      p.max_end = e.end_ts;
      if (query_.has_key()) {
        p.key = e.find_attribute(query_.where_key);
        // An event without the key attribute can never satisfy the
        // equality constraint.
        if (p.key == nullptr) continue;
      }
      out.push_back(std::move(p));
    }
    return out;
  }

  const PatternQuery& query_;
  std::span<const PrimitiveEvent> stream_;
};

}  // namespace

std::vector<CompositeEvent> reference_evaluate(
    const PatternQuery& query, std::span<const PrimitiveEvent> stream) {
  Enumerator enumerator(query, stream);
  auto partials = enumerator.evaluate(query.pattern);

  // Single-leaf patterns still face the (trivially satisfied) window
  // constraint; combinations were filtered during enumeration.
  std::sort(partials.begin(), partials.end(),
            [](const Partial& a, const Partial& b) {
              return a.events < b.events;
            });

  std::vector<CompositeEvent> matches;
  matches.reserve(partials.size());
  for (const auto& p : partials) {
    std::vector<PrimitiveEvent> parts;
    parts.reserve(p.events.size());
    for (std::size_t idx : p.events) parts.push_back(stream[idx]);
    matches.push_back(compose(match_output_type(), std::move(parts)));
  }
  return matches;
}

}  // namespace cepflow
