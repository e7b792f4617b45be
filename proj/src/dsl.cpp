#include "pbmt/dsl.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "pbmt/errors.hpp"

namespace pbmt {

namespace {

struct Token {
  std::string text;
  int col;  // 1-based
};

struct SourceLine {
  int number = 0;
  std::vector<Token> tokens;
};

std::vector<SourceLine> tokenize(const std::string& source) {
  std::vector<SourceLine> out;
  std::istringstream in(source);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    SourceLine line;
    line.number = number;
    std::size_t i = 0;
    while (i < raw.size()) {
      if (raw[i] == '#') break;  // comment to end of line
      if (raw[i] == ' ' || raw[i] == '\t' || raw[i] == '\r') {
        ++i;
        continue;
      }
      const std::size_t start = i;
      while (i < raw.size() && raw[i] != ' ' && raw[i] != '\t' && raw[i] != '\r' && raw[i] != '#')
        ++i;
      line.tokens.push_back({raw.substr(start, i - start), static_cast<int>(start) + 1});
    }
    if (!line.tokens.empty()) out.push_back(std::move(line));
  }
  return out;
}

[[noreturn]] void fail(const std::string& code, const std::string& msg, const SourceLine& line,
                       int col = 1) {
  throw ParseError(code, msg, line.number, col);
}

bool is_ident(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '/')) return false;
  return true;
}

double parse_number(const std::string& s, const SourceLine& line, int col) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  double value = 0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    fail("SyntaxError", "expected a number, got '" + s + "'", line, col);
  return value;
}

std::vector<double> parse_number_list(const std::string& s, const SourceLine& line, int col) {
  if (s.size() < 2 || s.front() != '[' || s.back() != ']')
    fail("SyntaxError", "expected [v1,v2,...], got '" + s + "'", line, col);
  std::vector<double> out;
  std::string body = s.substr(1, s.size() - 2);
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const std::size_t comma = body.find(',', pos);
    const std::string item = body.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (item.empty()) fail("SyntaxError", "empty element in list", line, col);
    out.push_back(parse_number(item, line, col));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// key=value tokens; value may be empty for flag-like keys.
std::pair<std::string, std::string> split_kv(const Token& tok, const SourceLine& line) {
  const auto eq = tok.text.find('=');
  if (eq == std::string::npos)
    fail("SyntaxError", "expected key=value, got '" + tok.text + "'", line, tok.col);
  return {tok.text.substr(0, eq), tok.text.substr(eq + 1)};
}

PortRef parse_portref(const Token& tok, const SourceLine& line) {
  const auto dot = tok.text.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 >= tok.text.size())
    fail("SyntaxError", "expected block.port, got '" + tok.text + "'", line, tok.col);
  PortRef ref{tok.text.substr(0, dot), tok.text.substr(dot + 1)};
  if (!is_ident(ref.block)) fail("SyntaxError", "bad block id '" + ref.block + "'", line, tok.col);
  if (!parse_port_name(ref.port))
    fail("SyntaxError", "bad port name '" + ref.port + "'", line, tok.col);
  return ref;
}

RelOp parse_relop(const std::string& s, const SourceLine& line, int col) {
  if (s == "<") return RelOp::Lt;
  if (s == "<=") return RelOp::Le;
  if (s == ">") return RelOp::Gt;
  if (s == ">=") return RelOp::Ge;
  if (s == "==") return RelOp::Eq;
  if (s == "!=") return RelOp::Ne;
  fail("SyntaxError", "unknown relational operator '" + s + "'", line, col);
}

LogicOp parse_logicop(const std::string& s, const SourceLine& line, int col) {
  if (s == "AND") return LogicOp::And;
  if (s == "OR") return LogicOp::Or;
  if (s == "NOT") return LogicOp::Not;
  fail("SyntaxError", "unknown logical operator '" + s + "'", line, col);
}

LineFaultKind parse_fault_kind(const std::string& s, const SourceLine& line, int col) {
  if (s == "noise") return LineFaultKind::Noise;
  if (s == "bias") return LineFaultKind::Bias;
  if (s == "negate") return LineFaultKind::Negate;
  if (s == "absolute") return LineFaultKind::Absolute;
  if (s == "stuckat") return LineFaultKind::StuckAt;
  if (s == "timedelay") return LineFaultKind::TimeDelay;
  if (s == "packagedrop") return LineFaultKind::PackageDrop;
  fail("SyntaxError", "unknown fault kind '" + s + "'", line, col);
}

struct Parser {
  const std::vector<SourceLine>& lines;
  std::size_t pos = 0;

  explicit Parser(const std::vector<SourceLine>& l) : lines(l) {}

  bool done() const { return pos >= lines.size(); }
  const SourceLine& peek() const { return lines[pos]; }

  Model parse_scope(const std::string& scope_name, bool top_level) {
    Model model;
    std::set<std::string> ids;
    bool saw_statement = false;

    auto declare = [&](const std::string& id, const SourceLine& line, int col) {
      if (!is_ident(id)) fail("SyntaxError", "bad identifier '" + id + "'", line, col);
      if (!ids.insert(id).second) fail("DuplicateId", "'" + id + "' declared twice", line, col);
    };

    while (!done()) {
      const SourceLine& line = lines[pos];
      const std::string& head = line.tokens[0].text;

      if (head == "}") {
        if (top_level) fail("SyntaxError", "unmatched '}'", line, line.tokens[0].col);
        if (line.tokens.size() != 1) fail("SyntaxError", "'}' must stand alone", line, line.tokens[0].col);
        ++pos;
        return model;
      }

      if (head == "model") {
        if (!top_level || saw_statement)
          fail("SyntaxError", "'model' must be the first statement", line, line.tokens[0].col);
        need(line, 2, "model <name>");
        if (!is_ident(line.tokens[1].text))
          fail("SyntaxError", "bad model name", line, line.tokens[1].col);
        model.name = line.tokens[1].text;
      } else if (head == "input") {
        need(line, 2, "input <id> [range=[lo,hi]]");
        declare(line.tokens[1].text, line, line.tokens[1].col);
        InputParams p;
        for (std::size_t i = 2; i < line.tokens.size(); ++i) {
          const auto [key, value] = split_kv(line.tokens[i], line);
          if (key == "range") {
            const auto list = parse_number_list(value, line, line.tokens[i].col);
            if (list.size() != 2)
              fail("SyntaxError", "range needs exactly [lo,hi]", line, line.tokens[i].col);
            p.has_range = true;
            p.lo = list[0];
            p.hi = list[1];
          } else {
            fail("SyntaxError", "unknown input attribute '" + key + "'", line, line.tokens[i].col);
          }
        }
        model.blocks.push_back({line.tokens[1].text, p});
      } else if (head == "output") {
        need(line, 2, "output <id>");
        if (line.tokens.size() != 2)
          fail("SyntaxError", "output takes no attributes", line, line.tokens[2].col);
        declare(line.tokens[1].text, line, line.tokens[1].col);
        model.blocks.push_back({line.tokens[1].text, OutputParams{}});
      } else if (head == "block") {
        need(line, 3, "block <id> <Kind> [params]");
        declare(line.tokens[1].text, line, line.tokens[1].col);
        model.blocks.push_back(parse_block(line));
      } else if (head == "subsystem") {
        need(line, 3, "subsystem <id> {");
        if (line.tokens[2].text != "{" || line.tokens.size() != 3)
          fail("SyntaxError", "expected 'subsystem <id> {'", line, line.tokens[2].col);
        declare(line.tokens[1].text, line, line.tokens[1].col);
        ++pos;
        Model inner = parse_scope(line.tokens[1].text, false);
        inner.name = line.tokens[1].text;
        model.blocks.push_back(
            {line.tokens[1].text, SubsystemParams{std::make_shared<const Model>(std::move(inner))}});
        saw_statement = true;
        continue;  // parse_scope consumed the closing brace
      } else if (head == "line") {
        need(line, 4, "line <src.port> -> <dst.port>");
        if (line.tokens[2].text != "->")
          fail("SyntaxError", "expected '->'", line, line.tokens[2].col);
        Line l;
        l.src = parse_portref(line.tokens[1], line);
        l.dst = parse_portref(line.tokens[3], line);
        for (const auto& end : {l.src.block, l.dst.block}) {
          if (!ids.count(end))
            fail("SyntaxError", "line references undeclared block '" + end + "'", line,
                 line.tokens[1].col);
        }
        if (line.tokens.size() > 4) l.fault = parse_fault(line, 4);
        model.lines.push_back(std::move(l));
      } else {
        fail("SyntaxError", "unknown statement '" + head + "'", line, line.tokens[0].col);
      }
      saw_statement = true;
      ++pos;
    }
    if (!top_level)
      throw ParseError("SyntaxError", "missing '}' for subsystem " + scope_name,
                       lines.empty() ? 0 : lines.back().number, 1);
    return model;
  }

  void need(const SourceLine& line, std::size_t count, const std::string& usage) {
    if (line.tokens.size() < count)
      fail("SyntaxError", "expected '" + usage + "'", line, line.tokens[0].col);
  }

  Block parse_block(const SourceLine& line) {
    const std::string& id = line.tokens[1].text;
    const std::string& kind = line.tokens[2].text;

    std::map<std::string, Token> kv;
    for (std::size_t i = 3; i < line.tokens.size(); ++i) {
      const auto [key, value] = split_kv(line.tokens[i], line);
      kv.emplace(key, Token{value, line.tokens[i].col});
    }
    auto take_num = [&](const std::string& key, std::optional<double> fallback) {
      auto it = kv.find(key);
      if (it == kv.end()) {
        if (fallback) return *fallback;
        fail("SyntaxError", "block " + id + " needs " + key + "=", line, line.tokens[2].col);
      }
      const double v = parse_number(it->second.text, line, it->second.col);
      kv.erase(it);
      return v;
    };
    auto take_str = [&](const std::string& key) {
      auto it = kv.find(key);
      if (it == kv.end())
        fail("SyntaxError", "block " + id + " needs " + key + "=", line, line.tokens[2].col);
      Token t = it->second;
      kv.erase(it);
      return t;
    };

    BlockParams params;
    if (kind == "Constant") {
      params = ConstantParams{take_num("value", std::nullopt)};
    } else if (kind == "Gain") {
      params = GainParams{take_num("k", std::nullopt)};
    } else if (kind == "Sum") {
      const Token t = take_str("signs");
      for (char c : t.text)
        if (c != '+' && c != '-')
          fail("SyntaxError", "sum signs must be drawn from {+,-}", line, t.col);
      params = SumParams{t.text};
    } else if (kind == "Product") {
      params = ProductParams{static_cast<int>(take_num("arity", 2.0))};
    } else if (kind == "Abs") {
      params = AbsParams{};
    } else if (kind == "UnaryMinus") {
      params = UnaryMinusParams{};
    } else if (kind == "Relational") {
      const Token t = take_str("op");
      params = RelationalParams{parse_relop(t.text, line, t.col)};
    } else if (kind == "Logical") {
      const Token t = take_str("op");
      const LogicOp op = parse_logicop(t.text, line, t.col);
      const int arity = static_cast<int>(take_num("arity", op == LogicOp::Not ? 1.0 : 2.0));
      params = LogicalParams{op, arity};
    } else if (kind == "Switch") {
      params = SwitchParams{take_num("threshold", 0.0)};
    } else if (kind == "Saturation") {
      const double lo = take_num("lo", std::nullopt);
      params = SaturationParams{lo, take_num("hi", std::nullopt)};
    } else if (kind == "UnitDelay") {
      params = UnitDelayParams{take_num("init", 0.0)};
    } else if (kind == "DiscreteIntegrator") {
      params = IntegratorParams{take_num("init", 0.0)};
    } else if (kind == "Lookup1D") {
      const Token b = take_str("breakpoints");
      const Token v = take_str("values");
      params = Lookup1DParams{parse_number_list(b.text, line, b.col),
                              parse_number_list(v.text, line, v.col)};
    } else {
      throw ParseError("UnknownBlockKind", "'" + kind + "'", line.number, line.tokens[2].col);
    }
    if (!kv.empty())
      fail("SyntaxError", "unknown attribute '" + kv.begin()->first + "' for " + kind, line,
           kv.begin()->second.col);
    return {id, params};
  }

  LineFault parse_fault(const SourceLine& line, std::size_t from) {
    const auto [fkey, fvalue] = split_kv(line.tokens[from], line);
    if (fkey != "fault")
      fail("SyntaxError", "expected fault=<kind>, got '" + fkey + "'", line, line.tokens[from].col);
    LineFault f;
    f.kind = parse_fault_kind(fvalue, line, line.tokens[from].col);
    for (std::size_t i = from + 1; i < line.tokens.size(); ++i) {
      const auto [key, value] = split_kv(line.tokens[i], line);
      const int col = line.tokens[i].col;
      if (key == "sigma" && f.kind == LineFaultKind::Noise) {
        f.sigma = parse_number(value, line, col);
      } else if (key == "offset" && f.kind == LineFaultKind::Bias) {
        f.offset = parse_number(value, line, col);
      } else if (key == "value" && f.kind == LineFaultKind::StuckAt) {
        f.value = parse_number(value, line, col);
      } else if (key == "delay" && f.kind == LineFaultKind::TimeDelay) {
        f.delay = static_cast<int>(parse_number(value, line, col));
      } else if (key == "prob" && f.kind == LineFaultKind::PackageDrop) {
        f.prob = parse_number(value, line, col);
      } else if (key == "seed" &&
                 (f.kind == LineFaultKind::Noise || f.kind == LineFaultKind::PackageDrop)) {
        if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos)
          fail("SyntaxError", "seed must be a nonnegative integer", line, col);
        f.seed = static_cast<std::uint64_t>(std::strtoull(value.c_str(), nullptr, 10));
      } else {
        fail("SyntaxError", "unknown fault attribute '" + key + "'", line, col);
      }
    }
    return f;
  }
};

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_number_list(const std::vector<double>& vs) {
  std::string out = "[";
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ",";
    out += format_number(vs[i]);
  }
  return out + "]";
}

void serialize_fault(const LineFault& f, std::string& out) {
  out += " fault=";
  out += to_string(f.kind);
  switch (f.kind) {
    case LineFaultKind::Noise:
      out += " sigma=" + format_number(f.sigma) + " seed=" + std::to_string(f.seed);
      break;
    case LineFaultKind::Bias: out += " offset=" + format_number(f.offset); break;
    case LineFaultKind::StuckAt: out += " value=" + format_number(f.value); break;
    case LineFaultKind::TimeDelay: out += " delay=" + std::to_string(f.delay); break;
    case LineFaultKind::PackageDrop:
      out += " prob=" + format_number(f.prob) + " seed=" + std::to_string(f.seed);
      break;
    default: break;
  }
}

void serialize_scope(const Model& model, int depth, std::string& out) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  for (const auto& b : model.blocks) {
    out += pad;
    switch (b.kind()) {
      case BlockKind::Input: {
        const auto& p = std::get<InputParams>(b.params);
        out += "input " + b.id;
        if (p.has_range)
          out += " range=[" + format_number(p.lo) + "," + format_number(p.hi) + "]";
        break;
      }
      case BlockKind::Output: out += "output " + b.id; break;
      case BlockKind::Subsystem: {
        out += "subsystem " + b.id + " {\n";
        serialize_scope(*std::get<SubsystemParams>(b.params).inner, depth + 1, out);
        out += pad + "}";
        break;
      }
      default: {
        out += "block " + b.id + " ";
        out += to_string(b.kind());
        switch (b.kind()) {
          case BlockKind::Constant:
            out += " value=" + format_number(std::get<ConstantParams>(b.params).value);
            break;
          case BlockKind::Gain:
            out += " k=" + format_number(std::get<GainParams>(b.params).factor);
            break;
          case BlockKind::Sum: out += " signs=" + std::get<SumParams>(b.params).signs; break;
          case BlockKind::Product:
            out += " arity=" + std::to_string(std::get<ProductParams>(b.params).arity);
            break;
          case BlockKind::Relational:
            out += std::string(" op=") + to_string(std::get<RelationalParams>(b.params).op);
            break;
          case BlockKind::Logical: {
            const auto& p = std::get<LogicalParams>(b.params);
            out += std::string(" op=") + to_string(p.op) + " arity=" + std::to_string(p.arity);
            break;
          }
          case BlockKind::Switch:
            out += " threshold=" + format_number(std::get<SwitchParams>(b.params).threshold);
            break;
          case BlockKind::Saturation: {
            const auto& p = std::get<SaturationParams>(b.params);
            out += " lo=" + format_number(p.lo) + " hi=" + format_number(p.hi);
            break;
          }
          case BlockKind::UnitDelay:
            out += " init=" + format_number(std::get<UnitDelayParams>(b.params).init);
            break;
          case BlockKind::DiscreteIntegrator:
            out += " init=" + format_number(std::get<IntegratorParams>(b.params).init);
            break;
          case BlockKind::Lookup1D: {
            const auto& p = std::get<Lookup1DParams>(b.params);
            out += " breakpoints=" + format_number_list(p.breakpoints);
            out += " values=" + format_number_list(p.table);
            break;
          }
          default: break;
        }
      }
    }
    out += "\n";
  }
  for (const auto& l : model.lines) {
    out += pad + "line " + l.src.str() + " -> " + l.dst.str();
    if (l.fault) serialize_fault(*l.fault, out);
    out += "\n";
  }
}

}  // namespace

Model parse_model(const std::string& source) {
  const auto lines = tokenize(source);
  Parser parser(lines);
  return parser.parse_scope("", true);
}

Model parse_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::string serialize_model(const Model& model) {
  std::string out;
  if (!model.name.empty()) out += "model " + model.name + "\n";
  serialize_scope(model, 0, out);
  return out;
}

void write_model_file(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file: " + path);
  out << serialize_model(model);
}

}  // namespace pbmt
