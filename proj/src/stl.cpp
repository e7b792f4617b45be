#include "pbmt/stl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "pbmt/errors.hpp"

namespace pbmt {

bool operator==(const StlFormula& a, const StlFormula& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case StlFormula::Kind::Predicate:
    case StlFormula::Kind::Rise: return a.pred == b.pred;
    case StlFormula::Kind::Not: return *a.left == *b.left;
    case StlFormula::Kind::And:
    case StlFormula::Kind::Or: return *a.left == *b.left && *a.right == *b.right;
    case StlFormula::Kind::Always:
    case StlFormula::Kind::Eventually:
      return a.interval == b.interval && *a.left == *b.left;
    case StlFormula::Kind::Until:
      return a.interval == b.interval && *a.left == *b.left && *a.right == *b.right;
  }
  return false;
}

namespace {

StlPtr node(StlFormula f) { return std::make_shared<const StlFormula>(std::move(f)); }

}  // namespace

StlPtr stl_predicate(StlPredicate pred) {
  StlFormula f;
  f.kind = StlFormula::Kind::Predicate;
  f.pred = std::move(pred);
  return node(std::move(f));
}

StlPtr stl_not(StlPtr phi) {
  StlFormula f;
  f.kind = StlFormula::Kind::Not;
  f.left = std::move(phi);
  return node(std::move(f));
}

StlPtr stl_and(StlPtr a, StlPtr b) {
  StlFormula f;
  f.kind = StlFormula::Kind::And;
  f.left = std::move(a);
  f.right = std::move(b);
  return node(std::move(f));
}

StlPtr stl_or(StlPtr a, StlPtr b) {
  StlFormula f;
  f.kind = StlFormula::Kind::Or;
  f.left = std::move(a);
  f.right = std::move(b);
  return node(std::move(f));
}

StlPtr stl_always(StlInterval i, StlPtr phi) {
  StlFormula f;
  f.kind = StlFormula::Kind::Always;
  f.interval = i;
  f.left = std::move(phi);
  return node(std::move(f));
}

StlPtr stl_eventually(StlInterval i, StlPtr phi) {
  StlFormula f;
  f.kind = StlFormula::Kind::Eventually;
  f.interval = i;
  f.left = std::move(phi);
  return node(std::move(f));
}

StlPtr stl_until(StlInterval i, StlPtr a, StlPtr b) {
  StlFormula f;
  f.kind = StlFormula::Kind::Until;
  f.interval = i;
  f.left = std::move(a);
  f.right = std::move(b);
  return node(std::move(f));
}

StlPtr stl_rise(StlPredicate pred) {
  StlFormula f;
  f.kind = StlFormula::Kind::Rise;
  f.pred = std::move(pred);
  return node(std::move(f));
}

std::vector<const StlPredicate*> collect_predicates(const StlFormula& phi) {
  std::vector<const StlPredicate*> out;
  const std::function<void(const StlFormula&)> walk = [&](const StlFormula& f) {
    switch (f.kind) {
      case StlFormula::Kind::Predicate:
      case StlFormula::Kind::Rise: out.push_back(&f.pred); break;
      default:
        if (f.left) walk(*f.left);
        if (f.right) walk(*f.right);
    }
  };
  walk(phi);
  return out;
}

namespace {

enum class Tok {
  End,
  Ident,    // also keywords
  Number,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Comma,
  Minus,
  RelOp,
  Arrow,
};

struct Lexeme {
  Tok tok;
  std::string text;
  double number = 0.0;
  RelOp rel = RelOp::Lt;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Lexeme& cur() const { return cur_; }

  void advance() {
    skip_ws();
    cur_.line = line_;
    cur_.col = col_;
    if (pos_ >= src_.size()) {
      cur_.tok = Tok::End;
      cur_.text.clear();
      return;
    }
    const char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '_' || src_[pos_] == '/'))
        take();
      cur_.tok = Tok::Ident;
      cur_.text = src_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      lex_number();
      return;
    }
    switch (c) {
      case '(': single(Tok::LParen); return;
      case ')': single(Tok::RParen); return;
      case '[': single(Tok::LBracket); return;
      case ']': single(Tok::RBracket); return;
      case ',': single(Tok::Comma); return;
      case '-':
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
          take();
          take();
          cur_.tok = Tok::Arrow;
          cur_.text = "->";
          return;
        }
        single(Tok::Minus);
        return;
      case '<':
      case '>': {
        take();
        bool eq = pos_ < src_.size() && src_[pos_] == '=';
        if (eq) take();
        cur_.tok = Tok::RelOp;
        cur_.rel = c == '<' ? (eq ? RelOp::Le : RelOp::Lt) : (eq ? RelOp::Ge : RelOp::Gt);
        cur_.text = std::string(1, c) + (eq ? "=" : "");
        return;
      }
      case '=':
      case '!': {
        take();
        if (pos_ >= src_.size() || src_[pos_] != '=')
          throw ParseError("SyntaxError", std::string("stray '") + c + "'", line_, col_ - 1);
        take();
        cur_.tok = Tok::RelOp;
        cur_.rel = c == '=' ? RelOp::Eq : RelOp::Ne;
        cur_.text = std::string(1, c) + "=";
        return;
      }
      default:
        throw ParseError("SyntaxError", std::string("unexpected character '") + c + "'", line_, col_);
    }
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') take();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        take();
      } else {
        break;
      }
    }
  }

  void take() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void single(Tok t) {
    cur_.tok = t;
    cur_.text = std::string(1, src_[pos_]);
    take();
  }

  void lex_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
            src_[pos_] == 'e' || src_[pos_] == 'E' ||
            ((src_[pos_] == '+' || src_[pos_] == '-') &&
             (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E'))))
      take();
    const std::string text = src_.substr(start, pos_ - start);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
      throw ParseError("SyntaxError", "bad number '" + text + "'", cur_.line, cur_.col);
    cur_.tok = Tok::Number;
    cur_.number = v;
    cur_.text = text;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Lexeme cur_;
};

// Precedence, loosest to tightest: -> | or | and | until | unary.
class StlParser {
 public:
  StlParser(const std::string& src, const std::vector<std::string>& signals)
      : lex_(src), signals_(signals) {}

  StlPtr parse() {
    StlPtr phi = implication();
    expect(Tok::End, "end of property");
    return phi;
  }

 private:
  [[noreturn]] void fail(const std::string& code, const std::string& msg) {
    throw ParseError(code, msg, lex_.cur().line, lex_.cur().col);
  }

  void expect(Tok t, const std::string& what) {
    if (lex_.cur().tok != t)
      fail("SyntaxError", "expected " + what + ", got '" + lex_.cur().text + "'");
  }

  bool accept_ident(const std::string& kw) {
    if (lex_.cur().tok == Tok::Ident && lex_.cur().text == kw) {
      lex_.advance();
      return true;
    }
    return false;
  }

  StlPtr implication() {
    StlPtr lhs = disjunction();
    if (lex_.cur().tok == Tok::Arrow) {
      lex_.advance();
      return stl_or(stl_not(std::move(lhs)), implication());  // p -> q  ==  not p or q
    }
    return lhs;
  }

  StlPtr disjunction() {
    StlPtr lhs = conjunction();
    while (accept_ident("or")) lhs = stl_or(std::move(lhs), conjunction());
    return lhs;
  }

  StlPtr conjunction() {
    StlPtr lhs = until_level();
    while (accept_ident("and")) lhs = stl_and(std::move(lhs), until_level());
    return lhs;
  }

  StlPtr until_level() {
    StlPtr lhs = unary();
    if (lex_.cur().tok == Tok::Ident && lex_.cur().text == "until") {
      lex_.advance();
      const StlInterval i = interval();
      return stl_until(i, std::move(lhs), until_level());  // right associative
    }
    return lhs;
  }

  StlPtr unary() {
    if (accept_ident("not")) return stl_not(unary());
    if (lex_.cur().tok == Tok::Ident && lex_.cur().text == "always") {
      lex_.advance();
      const StlInterval i = interval();
      return stl_always(i, unary());
    }
    if (lex_.cur().tok == Tok::Ident && lex_.cur().text == "eventually") {
      lex_.advance();
      const StlInterval i = interval();
      return stl_eventually(i, unary());
    }
    if (lex_.cur().tok == Tok::Ident && lex_.cur().text == "rise") {
      lex_.advance();
      expect(Tok::LParen, "'(' after rise");
      lex_.advance();
      StlPredicate p = predicate();
      expect(Tok::RParen, "')'");
      lex_.advance();
      return stl_rise(std::move(p));
    }
    if (lex_.cur().tok == Tok::LParen) {
      lex_.advance();
      StlPtr phi = implication();
      expect(Tok::RParen, "')'");
      lex_.advance();
      return phi;
    }
    return stl_predicate(predicate());
  }

  StlInterval interval() {
    if (lex_.cur().tok != Tok::LBracket) return {};  // omitted: [0, end of trace)
    lex_.advance();
    const double lo = number("interval bound");
    expect(Tok::Comma, "','");
    lex_.advance();
    std::optional<double> hi;
    if (lex_.cur().tok == Tok::Ident && lex_.cur().text == "inf") {
      lex_.advance();
    } else {
      hi = number("interval bound");
    }
    expect(Tok::RBracket, "']'");
    if (lo < 0 || (hi && *hi < lo))
      throw ParseError("BadInterval",
                       "need 0 <= a <= b, got [" + std::to_string(lo) + "," +
                           (hi ? std::to_string(*hi) : "inf") + "]",
                       lex_.cur().line, lex_.cur().col);
    lex_.advance();
    return {lo, hi};
  }

  double number(const std::string& what) {
    double sign = 1.0;
    if (lex_.cur().tok == Tok::Minus) {
      sign = -1.0;
      lex_.advance();
    }
    expect(Tok::Number, what);
    const double v = sign * lex_.cur().number;
    lex_.advance();
    return v;
  }

  StlPredicate predicate() {
    StlPredicate p;
    if (lex_.cur().tok == Tok::Ident && lex_.cur().text == "abs") {
      lex_.advance();
      expect(Tok::LParen, "'(' after abs");
      lex_.advance();
      p.signal = signal_name();
      expect(Tok::Minus, "'-' inside abs(s1 - s2)");
      lex_.advance();
      p.signal2 = signal_name();
      expect(Tok::RParen, "')'");
      lex_.advance();
    } else {
      p.signal = signal_name();
    }
    expect(Tok::RelOp, "comparison operator");
    p.op = lex_.cur().rel;
    lex_.advance();
    p.threshold = number("threshold");
    return p;
  }

  std::string signal_name() {
    expect(Tok::Ident, "signal name");
    const std::string name = lex_.cur().text;
    if (std::find(signals_.begin(), signals_.end(), name) == signals_.end())
      throw ParseError("UnknownSignal", "'" + name + "' is not a model signal", lex_.cur().line,
                       lex_.cur().col);
    lex_.advance();
    return name;
  }

  Lexer lex_;
  const std::vector<std::string>& signals_;
};

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string serialize_interval(const StlInterval& i) {
  if (!i.hi) return i.lo == 0.0 ? "" : "[" + format_number(i.lo) + ",inf]";
  return "[" + format_number(i.lo) + "," + format_number(*i.hi) + "]";
}

std::string serialize_predicate(const StlPredicate& p) {
  std::string lhs = p.signal2 ? "abs(" + p.signal + " - " + *p.signal2 + ")" : p.signal;
  return lhs + " " + to_string(p.op) + " " + format_number(p.threshold);
}

}  // namespace

StlPtr parse_stl(const std::string& source, const std::vector<std::string>& signals) {
  return StlParser(source, signals).parse();
}

StlPtr parse_stl(const std::string& source, const Model& model) {
  std::vector<std::string> signals;
  for (const auto* b : model.input_blocks()) signals.push_back(b->id);
  for (const auto* b : model.output_blocks()) signals.push_back(b->id);
  return parse_stl(source, signals);
}

StlPtr parse_stl_file(const std::string& path, const Model& model) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open property file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_stl(buf.str(), model);
}

std::string serialize_stl(const StlFormula& phi) {
  switch (phi.kind) {
    case StlFormula::Kind::Predicate: return serialize_predicate(phi.pred);
    case StlFormula::Kind::Rise: return "rise(" + serialize_predicate(phi.pred) + ")";
    case StlFormula::Kind::Not: return "not (" + serialize_stl(*phi.left) + ")";
    case StlFormula::Kind::And:
      return "(" + serialize_stl(*phi.left) + " and " + serialize_stl(*phi.right) + ")";
    case StlFormula::Kind::Or:
      return "(" + serialize_stl(*phi.left) + " or " + serialize_stl(*phi.right) + ")";
    case StlFormula::Kind::Always:
      return "always" + serialize_interval(phi.interval) + " (" + serialize_stl(*phi.left) + ")";
    case StlFormula::Kind::Eventually:
      return "eventually" + serialize_interval(phi.interval) + " (" + serialize_stl(*phi.left) + ")";
    case StlFormula::Kind::Until:
      return "(" + serialize_stl(*phi.left) + ") until" + serialize_interval(phi.interval) + " (" +
             serialize_stl(*phi.right) + ")";
  }
  return "";
}

}  // namespace pbmt
