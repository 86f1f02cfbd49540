#include "cepflow/query.hpp"

#include <cctype>
#include <cmath>
#include <set>

namespace cepflow {

std::vector<EventType> PatternExpr::leaf_types() const {
  std::vector<EventType> out;
  if (op == PatternOp::Leaf) {
    out.push_back(leaf_type);
    return out;
  }
  for (const auto& child : children) {
    auto sub = child.leaf_types();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

bool operator==(const PatternExpr& a, const PatternExpr& b) {
  return a.op == b.op && a.leaf_type == b.leaf_type &&
         a.children == b.children;
}

bool operator==(const PatternQuery& a, const PatternQuery& b) {
  return a.pattern == b.pattern && a.where_key == b.where_key &&
         a.window == b.window;
}

EventType PatternQuery::partitioned_type() const {
  return pattern.leaf_types().back();
}

std::vector<EventType> PatternQuery::replicated_types() const {
  auto types = pattern.leaf_types();
  types.pop_back();
  return types;
}

bool key_values_equal(const PrimitiveEvent& a, const PrimitiveEvent& b,
                      std::string_view key) {
  const AttrValue* va = a.find_attribute(key);
  const AttrValue* vb = b.find_attribute(key);
  return va != nullptr && vb != nullptr && *va == *vb;
}

// ---------------------------------------------------------------------------
// Parser
//
// query    := "PATTERN" expr [ "WHERE" "[" ident "]" ] "WITHIN" duration
// expr     := ("SEQ" | "AND") "(" expr "," expr ")" | ident
// duration := number [ "us" | "ms" | "s" ]        (default seconds)
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum Kind { Ident, Number, LParen, RParen, LBracket, RBracket, Comma, End };
  Kind kind = End;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_space();
    Token tok;
    tok.line = line_;
    tok.column = column_;
    if (pos_ >= text_.size()) {
      tok.kind = Token::End;
      return tok;
    }
    const char c = text_[pos_];
    if (c == '(' || c == ')' || c == '[' || c == ']' || c == ',') {
      advance();
      tok.kind = c == '('   ? Token::LParen
                 : c == ')' ? Token::RParen
                 : c == '[' ? Token::LBracket
                 : c == ']' ? Token::RBracket
                            : Token::Comma;
      tok.text = c;
      return tok;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.') {
      tok.kind = Token::Number;
      while (pos_ < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '.' || text_[pos_] == '-')) {
        tok.text += text_[pos_];
        advance();
      }
      return tok;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      tok.kind = Token::Ident;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_')) {
        tok.text += text_[pos_];
        advance();
      }
      return tok;
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'",
                     line_, column_);
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      advance();
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lexer_(text) { shift(); }

  PatternQuery parse() {
    expect_keyword("PATTERN");
    PatternQuery query;
    query.pattern = parse_expr();

    if (current_.kind == Token::Ident && current_.text == "WHERE") {
      shift();
      expect(Token::LBracket, "'['");
      if (current_.kind != Token::Ident) {
        fail("attribute name inside WHERE [..]");
      }
      query.where_key = current_.text;
      shift();
      expect(Token::RBracket, "']'");
    }

    expect_keyword("WITHIN");
    query.window = parse_duration();
    if (current_.kind != Token::End) {
      fail("end of query");
    }

    check_leaves_distinct(query.pattern);
    return query;
  }

 private:
  PatternExpr parse_expr() {
    if (current_.kind != Token::Ident) {
      fail("event type or operator");
    }
    const Token head = current_;
    shift();
    if (head.text == "SEQ" || head.text == "AND") {
      const PatternOp op =
          head.text == "SEQ" ? PatternOp::Seq : PatternOp::And;
      expect(Token::LParen, "'('");
      PatternExpr left = parse_expr();
      if (current_.kind == Token::RParen) {
        throw ParseError(head.text + " takes exactly two operands", head.line,
                         head.column);
      }
      expect(Token::Comma, "','");
      PatternExpr right = parse_expr();
      if (current_.kind == Token::Comma) {
        throw ParseError(head.text + " takes exactly two operands", head.line,
                         head.column);
      }
      expect(Token::RParen, "')'");
      return PatternExpr::node(op, std::move(left), std::move(right));
    }
    if (current_.kind == Token::LParen) {
      // Ident followed by '(' is an operator call with an unknown name.
      throw ParseError("unknown operator '" + head.text + "'", head.line,
                       head.column);
    }
    return PatternExpr::leaf(EventType{head.text});
  }

  Duration parse_duration() {
    if (current_.kind != Token::Number) {
      fail("window duration");
    }
    const Token num = current_;
    double value = 0.0;
    try {
      value = std::stod(num.text);
    } catch (const std::exception&) {
      throw ParseError("bad number '" + num.text + "'", num.line, num.column);
    }
    shift();
    double scale = static_cast<double>(kMicrosPerSecond);
    if (current_.kind == Token::Ident) {
      if (current_.text == "us") {
        scale = 1.0;
      } else if (current_.text == "ms") {
        scale = 1'000.0;
      } else if (current_.text == "s") {
        scale = static_cast<double>(kMicrosPerSecond);
      } else {
        throw ParseError("unknown time unit '" + current_.text + "'",
                         current_.line, current_.column);
      }
      shift();
    }
    const auto window = static_cast<Duration>(std::llround(value * scale));
    if (window <= 0) {
      throw ParseError("window must be positive", num.line, num.column);
    }
    return window;
  }

  void check_leaves_distinct(const PatternExpr& expr) {
    auto types = expr.leaf_types();
    std::set<std::string> seen;
    for (const auto& t : types) {
      if (!seen.insert(t.name).second) {
        throw ParseError("event type '" + t.name +
                             "' appears more than once in the pattern",
                         1, 1);
      }
    }
  }

  void expect(Token::Kind kind, const char* what) {
    if (current_.kind != kind) fail(what);
    shift();
  }

  void expect_keyword(const char* word) {
    if (current_.kind != Token::Ident || current_.text != word) {
      fail(("keyword " + std::string(word)).c_str());
    }
    shift();
  }

  [[noreturn]] void fail(const char* expected) {
    throw ParseError("expected " + std::string(expected) + ", got '" +
                         (current_.kind == Token::End ? "<end>"
                                                      : current_.text) +
                         "'",
                     current_.line, current_.column);
  }

  void shift() { current_ = lexer_.next(); }

  Lexer lexer_;
  Token current_;
};

void print_expr(std::string& out, const PatternExpr& expr) {
  if (expr.op == PatternOp::Leaf) {
    out += expr.leaf_type.name;
    return;
  }
  out += expr.op == PatternOp::Seq ? "SEQ(" : "AND(";
  print_expr(out, expr.children[0]);
  out += ", ";
  print_expr(out, expr.children[1]);
  out += ')';
}

}  // namespace

PatternQuery parse_query(std::string_view text) {
  return Parser(text).parse();
}

std::string to_query_text(const PatternQuery& query) {
  std::string out = "PATTERN ";
  print_expr(out, query.pattern);
  if (query.has_key()) {
    out += " WHERE [";
    out += query.where_key;
    out += ']';
  }
  out += " WITHIN ";
  // Largest unit that divides the window exactly.
  if (query.window % kMicrosPerSecond == 0) {
    out += std::to_string(query.window / kMicrosPerSecond);
    out += " s";
  } else if (query.window % 1'000 == 0) {
    out += std::to_string(query.window / 1'000);
    out += " ms";
  } else {
    out += std::to_string(query.window);
    out += " us";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary matchers
// ---------------------------------------------------------------------------

namespace {

bool pair_constraints_hold(const PrimitiveEvent& a, const PrimitiveEvent& b,
                           const PatternQuery& query) {
  const Timestamp min_start = std::min(a.start_ts, b.start_ts);
  const Timestamp max_end = std::max(a.end_ts, b.end_ts);
  if (!within_window(min_start, max_end, query.window)) return false;
  if (query.has_key() && !key_values_equal(a, b, query.where_key)) {
    return false;
  }
  return true;
}

}  // namespace

bool seq_match(const PrimitiveEvent& first, const PrimitiveEvent& second,
               const PatternQuery& query) {
  if (first.start_ts >= second.start_ts) return false;
  return pair_constraints_hold(first, second, query);
}

bool and_match(const PrimitiveEvent& a, const PrimitiveEvent& b,
               const PatternQuery& query) {
  return pair_constraints_hold(a, b, query);
}

std::string match_fingerprint(const CompositeEvent& match) {
  std::string key = match.type.name;
  for (const auto& c : match.constituents) {
    key += '|';
    key += c.type.name;
    key += '@';
    key += std::to_string(c.start_ts);
    key += '#';
    key += std::to_string(c.seq);
  }
  return key;
}

}  // namespace cepflow
