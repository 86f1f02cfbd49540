#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cepflow/event.hpp"

namespace cepflow {

enum class PatternOp { Seq, And, Leaf };

// Binary pattern tree. Seq and And nodes have exactly two children,
// leaves name an event type. Leaf types are distinct within one query.
struct PatternExpr {
  PatternOp op = PatternOp::Leaf;
  EventType leaf_type;  // Leaf nodes only
  std::vector<PatternExpr> children;

  static PatternExpr leaf(EventType type) {
    PatternExpr e;
    e.op = PatternOp::Leaf;
    e.leaf_type = std::move(type);
    return e;
  }
  static PatternExpr node(PatternOp op, PatternExpr left, PatternExpr right) {
    PatternExpr e;
    e.op = op;
    e.children.push_back(std::move(left));
    e.children.push_back(std::move(right));
    return e;
  }

  // Leaf event types in left-to-right order.
  std::vector<EventType> leaf_types() const;

  friend bool operator==(const PatternExpr& a, const PatternExpr& b);
};

struct PatternQuery {
  PatternExpr pattern;
  // WHERE [key]: the named attribute must be equal across all matched
  // constituents. Empty means unconstrained.
  std::string where_key;
  Duration window = 0;  // WITHIN, microseconds, > 0

  bool has_key() const { return !where_key.empty(); }

  // The stream that triggers window evaluation and is split across
  // workers: the rightmost leaf. All other leaf streams are replicated.
  EventType partitioned_type() const;
  std::vector<EventType> replicated_types() const;

  friend bool operator==(const PatternQuery& a, const PatternQuery& b);
};

struct MatchSet {
  std::vector<CompositeEvent> matches;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, int line, int column)
      : std::runtime_error(std::move(message)), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Parses `PATTERN <expr> [WHERE [key]] WITHIN <duration>`. Throws
// ParseError with line/column on malformed input.
PatternQuery parse_query(std::string_view text);

// Canonical text form; parse_query(to_query_text(q)) == q.
std::string to_query_text(const PatternQuery& query);

// Window helper shared by the matchers: the span from the earliest start
// to the latest end must not exceed the window.
inline bool within_window(Timestamp min_start, Timestamp max_end,
                          Duration window) {
  return max_end - min_start <= window;
}

// WHERE-key equality between two events. Events lacking the attribute
// never satisfy the constraint.
bool key_values_equal(const PrimitiveEvent& a, const PrimitiveEvent& b,
                      std::string_view key);

// Binary SEQ semantics: strict start-timestamp order plus window and key
// constraints. The query's root must be a SEQ node over the two types.
bool seq_match(const PrimitiveEvent& first, const PrimitiveEvent& second,
               const PatternQuery& query);

// Binary AND semantics: window and key constraints only, order-free.
bool and_match(const PrimitiveEvent& a, const PrimitiveEvent& b,
               const PatternQuery& query);

// Single-operator reference matcher: emits every constituent combination
// that satisfies the pattern, in deterministic order. This is the
// correctness oracle for the parallel runtime. The stream must be sorted
// by start_ts (ties by arrival order).
std::vector<CompositeEvent> reference_evaluate(
    const PatternQuery& query, std::span<const PrimitiveEvent> stream);

// Event type given to pattern matches.
inline const EventType& match_output_type() {
  static const EventType type{"OUT"};
  return type;
}

// Canonical text key identifying a match by its constituents; two matches
// over the same constituent events compare equal. Used for multiset
// comparisons between the runtime and the reference matcher.
std::string match_fingerprint(const CompositeEvent& match);

}  // namespace cepflow
