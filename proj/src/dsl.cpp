#include "ccdt/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "ccdt/dates.hpp"
#include "ccdt/error.hpp"

namespace ccdt::dsl {

enum class Op { eq, ne, lt, le, gt, ge, add, sub, mul, div, and_, or_, not_, neg };

struct Node {
  enum class Kind { literal, field, unary, binary, in, call } kind;
  Value value;                   // literal
  std::string name;              // field / call
  Op op = Op::eq;                // unary / binary
  bool negated = false;          // in
  std::vector<std::shared_ptr<const Node>> children;
  std::vector<Value> members;    // in
};

namespace {

using NodePtr = std::shared_ptr<const Node>;

// ---- lexer ------------------------------------------------------------------

enum class Tok { end, number, string, ident, lparen, rparen, lbracket, rbracket, comma, op };

struct Token {
  Tok type;
  std::string text;
  double number = 0;
  std::size_t column = 0;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw FormatError("column " + std::to_string(i + 1) + ": " + msg + " in '" + std::string(src) + "'");
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      while (i < src.size() && (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '.')) ++i;
      Token t{Tok::number, std::string(src.substr(start, i - start)), 0, start};
      auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (ec != std::errc{} || ptr != t.text.data() + t.text.size()) {
        i = start;
        fail("bad number '" + t.text + "'");
      }
      out.push_back(std::move(t));
    } else if (c == '"') {
      ++i;
      std::string s;
      while (i < src.size() && src[i] != '"') s += src[i++];
      if (i >= src.size()) {
        i = start;
        fail("unterminated string");
      }
      ++i;
      out.push_back({Tok::string, std::move(s), 0, start});
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < src.size() && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_')) ++i;
      out.push_back({Tok::ident, std::string(src.substr(start, i - start)), 0, start});
    } else if (c == '(' || c == ')' || c == '[' || c == ']' || c == ',') {
      Tok t = c == '(' ? Tok::lparen : c == ')' ? Tok::rparen : c == '[' ? Tok::lbracket : c == ']' ? Tok::rbracket : Tok::comma;
      out.push_back({t, std::string(1, c), 0, start});
      ++i;
    } else {
      static const char* two[] = {"<=", ">=", "!=", "=="};
      bool matched = false;
      for (const char* t : two) {
        if (src.substr(i, 2) == t) {
          out.push_back({Tok::op, t, 0, start});
          i += 2;
          matched = true;
          break;
        }
      }
      if (!matched) {
        if (std::string_view("=<>+-*/").find(c) == std::string_view::npos) fail(std::string("unexpected character '") + c + "'");
        out.push_back({Tok::op, std::string(1, c), 0, start});
        ++i;
      }
    }
  }
  out.push_back({Tok::end, "", 0, src.size()});
  return out;
}

// ---- parser -----------------------------------------------------------------

class Parser {
 public:
  Parser(std::string_view src) : src_(src), toks_(lex(src)) {}

  NodePtr parse() {
    auto n = parse_or();
    if (peek().type != Tok::end) fail("unexpected '" + peek().text + "'");
    return n;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  bool is_keyword(std::string_view kw) const { return peek().type == Tok::ident && peek().text == kw; }
  bool is_op(std::string_view op) const { return peek().type == Tok::op && peek().text == op; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError("column " + std::to_string(peek().column + 1) + ": " + msg + " in '" + std::string(src_) + "'");
  }

  void expect(Tok t, const char* what) {
    if (peek().type != t) fail(std::string("expected ") + what);
    ++pos_;
  }

  static NodePtr binary(Op op, NodePtr l, NodePtr r) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::binary;
    n->op = op;
    n->children = {std::move(l), std::move(r)};
    return n;
  }

  static NodePtr unary(Op op, NodePtr c) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::unary;
    n->op = op;
    n->children = {std::move(c)};
    return n;
  }

  NodePtr parse_or() {
    auto l = parse_and();
    while (is_keyword("or")) {
      ++pos_;
      l = binary(Op::or_, l, parse_and());
    }
    return l;
  }

  NodePtr parse_and() {
    auto l = parse_not();
    while (is_keyword("and")) {
      ++pos_;
      l = binary(Op::and_, l, parse_not());
    }
    return l;
  }

  NodePtr parse_not() {
    if (is_keyword("not")) {
      ++pos_;
      return unary(Op::not_, parse_not());
    }
    return parse_comparison();
  }

  NodePtr parse_comparison() {
    auto l = parse_additive();
    if (peek().type == Tok::op) {
      static const std::pair<const char*, Op> ops[] = {{"=", Op::eq},  {"==", Op::eq}, {"!=", Op::ne},
                                                       {"<", Op::lt},  {"<=", Op::le}, {">", Op::gt},
                                                       {">=", Op::ge}};
      for (auto [text, op] : ops) {
        if (peek().text == text) {
          ++pos_;
          return binary(op, l, parse_additive());
        }
      }
    }
    bool negated = false;
    if (is_keyword("not") && pos_ + 1 < toks_.size() && toks_[pos_ + 1].type == Tok::ident && toks_[pos_ + 1].text == "in") {
      negated = true;
      ++pos_;
    }
    if (is_keyword("in")) {
      ++pos_;
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::in;
      n->negated = negated;
      n->children = {l};
      expect(Tok::lbracket, "'['");
      if (peek().type != Tok::rbracket) {
        for (;;) {
          n->members.push_back(parse_literal());
          if (peek().type == Tok::comma) {
            ++pos_;
            continue;
          }
          break;
        }
      }
      expect(Tok::rbracket, "']'");
      return n;
    }
    if (negated) fail("expected 'in'");
    return l;
  }

  Value parse_literal() {
    bool minus = false;
    if (is_op("-")) {
      minus = true;
      ++pos_;
    }
    const auto& t = next();
    if (t.type == Tok::number) return minus ? -t.number : t.number;
    if (minus) fail("expected a number after '-'");
    if (t.type == Tok::string) return t.text;
    if (t.type == Tok::ident && (t.text == "true" || t.text == "false")) return t.text == "true";
    --pos_;
    fail("expected a literal");
  }

  NodePtr parse_additive() {
    auto l = parse_term();
    while (is_op("+") || is_op("-")) {
      Op op = next().text == "+" ? Op::add : Op::sub;
      l = binary(op, l, parse_term());
    }
    return l;
  }

  NodePtr parse_term() {
    auto l = parse_unary();
    while (is_op("*") || is_op("/")) {
      Op op = next().text == "*" ? Op::mul : Op::div;
      l = binary(op, l, parse_unary());
    }
    return l;
  }

  NodePtr parse_unary() {
    if (is_op("-")) {
      ++pos_;
      return unary(Op::neg, parse_unary());
    }
    return parse_primary();
  }

  NodePtr parse_primary() {
    const auto& t = peek();
    auto n = std::make_shared<Node>();
    switch (t.type) {
      case Tok::number:
        n->kind = Node::Kind::literal;
        n->value = next().number;
        return n;
      case Tok::string:
        n->kind = Node::Kind::literal;
        n->value = next().text;
        return n;
      case Tok::lparen: {
        ++pos_;
        auto inner = parse_or();
        expect(Tok::rparen, "')'");
        return inner;
      }
      case Tok::ident: {
        std::string name = next().text;
        if (name == "true" || name == "false") {
          n->kind = Node::Kind::literal;
          n->value = (name == "true");
          return n;
        }
        if (name == "and" || name == "or" || name == "not" || name == "in") {
          --pos_;
          fail("unexpected keyword '" + name + "'");
        }
        if (peek().type == Tok::lparen) {
          ++pos_;
          n->kind = Node::Kind::call;
          n->name = name;
          if (peek().type != Tok::rparen) {
            for (;;) {
              n->children.push_back(parse_or());
              if (peek().type == Tok::comma) {
                ++pos_;
                continue;
              }
              break;
            }
          }
          expect(Tok::rparen, "')'");
          std::size_t want = (name == "age") ? 2 : (name == "year") ? 1 : 0;
          if (want == 0) fail("unknown function '" + name + "'");
          if (n->children.size() != want) fail("'" + name + "' takes " + std::to_string(want) + " argument(s)");
          return n;
        }
        n->kind = Node::Kind::field;
        n->name = std::move(name);
        return n;
      }
      default: fail(t.type == Tok::end ? "unexpected end of expression" : "unexpected '" + t.text + "'");
    }
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

void collect_fields(const Node& n, std::set<std::string>& out) {
  if (n.kind == Node::Kind::field) out.insert(n.name);
  for (const auto& c : n.children) collect_fields(*c, out);
}

// ---- evaluation -------------------------------------------------------------

struct Evaluator {
  const MessageSchema& schema;
  const CancerMessage& message;

  // The field most recently involved in a failing operand, for diagnostics.
  static std::string blame(const Node& n) {
    std::set<std::string> f;
    collect_fields(n, f);
    return f.empty() ? std::string{} : *f.begin();
  }

  [[noreturn]] static void fail(const Node& n, const std::string& msg) { throw EvaluationError({}, blame(n), msg); }

  Value eval(const Node& n) const {
    switch (n.kind) {
      case Node::Kind::literal: return n.value;
      case Node::Kind::field: {
        auto idx = schema.index_of(n.name);
        if (!idx || *idx >= message.values.size()) fail(n, "unknown field '" + n.name + "'");
        const auto& v = message.values[*idx];
        if (const auto* d = std::get_if<double>(&v)) return *d;
        return std::get<std::string>(v);
      }
      case Node::Kind::unary: {
        Value v = eval(*n.children[0]);
        if (n.op == Op::not_) return !as_bool(*n.children[0], v);
        return -as_number(*n.children[0], v);
      }
      case Node::Kind::binary: return eval_binary(n);
      case Node::Kind::in: {
        Value v = eval(*n.children[0]);
        bool found = std::any_of(n.members.begin(), n.members.end(), [&](const Value& m) { return equal(*n.children[0], v, m); });
        return n.negated ? !found : found;
      }
      case Node::Kind::call: {
        if (n.name == "age") {
          int from = as_date(*n.children[0], eval(*n.children[0]));
          int to = as_date(*n.children[1], eval(*n.children[1]));
          return static_cast<double>(whole_years_between(from, to));
        }
        return static_cast<double>(year_of(as_date(*n.children[0], eval(*n.children[0]))));
      }
    }
    fail(n, "corrupt expression");
  }

  static bool as_bool(const Node& n, const Value& v) {
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    fail(n, "expected a boolean operand");
  }

  static double as_number(const Node& n, const Value& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    fail(n, "expected a numeric operand");
  }

  static int as_date(const Node& n, const Value& v) {
    if (const auto* s = std::get_if<std::string>(&v))
      if (auto d = parse_iso_date(*s)) return *d;
    fail(n, "expected an ISO-8601 date operand");
  }

  static bool equal(const Node& n, const Value& a, const Value& b) {
    if (a.index() != b.index()) fail(n, "cannot compare values of different types");
    if (const auto* s = std::get_if<std::string>(&a)) {
      auto da = parse_iso_date(*s);
      auto db = parse_iso_date(std::get<std::string>(b));
      if (da && db) return *da == *db;
      return *s == std::get<std::string>(b);
    }
    return a == b;
  }

  // -1, 0, 1
  static int order(const Node& n, const Value& a, const Value& b) {
    if (const auto* da = std::get_if<double>(&a)) {
      const auto* db = std::get_if<double>(&b);
      if (!db) fail(n, "cannot order a number against a non-number");
      return (*da < *db) ? -1 : (*da > *db) ? 1 : 0;
    }
    if (std::holds_alternative<std::string>(a) && std::holds_alternative<std::string>(b)) {
      int x = as_date(n, a), y = as_date(n, b);
      return (x < y) ? -1 : (x > y) ? 1 : 0;
    }
    fail(n, "ordering requires numbers or ISO-8601 dates");
  }

  Value eval_binary(const Node& n) const {
    const Node& ln = *n.children[0];
    const Node& rn = *n.children[1];
    if (n.op == Op::and_) return as_bool(ln, eval(ln)) && as_bool(rn, eval(rn));
    if (n.op == Op::or_) return as_bool(ln, eval(ln)) || as_bool(rn, eval(rn));
    Value a = eval(ln);
    Value b = eval(rn);
    switch (n.op) {
      case Op::eq: return equal(n, a, b);
      case Op::ne: return !equal(n, a, b);
      case Op::lt: return order(n, a, b) < 0;
      case Op::le: return order(n, a, b) <= 0;
      case Op::gt: return order(n, a, b) > 0;
      case Op::ge: return order(n, a, b) >= 0;
      case Op::add: return as_number(ln, a) + as_number(rn, b);
      case Op::sub: return as_number(ln, a) - as_number(rn, b);
      case Op::mul: return as_number(ln, a) * as_number(rn, b);
      case Op::div: {
        double d = as_number(rn, b);
        if (d == 0.0) fail(rn, "division by zero");
        return as_number(ln, a) / d;
      }
      default: break;
    }
    fail(n, "corrupt expression");
  }
};

}  // namespace

Expression Expression::parse(std::string_view source) {
  Expression e;
  e.source_ = std::string(source);
  e.root_ = Parser(source).parse();
  return e;
}

std::vector<std::string> Expression::fields() const {
  std::set<std::string> out;
  if (root_) collect_fields(*root_, out);
  return {out.begin(), out.end()};
}

Value Expression::evaluate(const MessageSchema& schema, const CancerMessage& message) const {
  if (!root_) throw EvaluationError({}, {}, "empty expression");
  return Evaluator{schema, message}.eval(*root_);
}

bool Expression::test(const MessageSchema& schema, const CancerMessage& message) const {
  Value v = evaluate(schema, message);
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw EvaluationError({}, {}, "expression '" + source_ + "' is not a predicate");
}

}  // namespace ccdt::dsl
