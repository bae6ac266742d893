#include "qf/factor/parser.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <optional>

#include "qf/csv.hpp"
#include "qf/error.hpp"

namespace qf::factor {

namespace {

enum class Tok { Number, Ident, LParen, RParen, Comma, Plus, Minus, Star, Slash, End };

struct Token {
  Tok kind;
  std::size_t offset;
  std::string_view text;
  bool integer = false;  // Number without fraction or exponent
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t k = 0;
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  while (k < s.size()) {
    const char c = s[k];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++k;
      continue;
    }
    const std::size_t start = k;
    if (is_digit(c) || (c == '.' && k + 1 < s.size() && is_digit(s[k + 1]))) {
      bool integer = true;
      while (k < s.size() && is_digit(s[k])) ++k;
      if (k < s.size() && s[k] == '.') {
        integer = false;
        ++k;
        while (k < s.size() && is_digit(s[k])) ++k;
      }
      if (k < s.size() && (s[k] == 'e' || s[k] == 'E')) {
        std::size_t j = k + 1;
        if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
        if (j < s.size() && is_digit(s[j])) {
          integer = false;
          k = j;
          while (k < s.size() && is_digit(s[k])) ++k;
        } else {
          throw ParseError("malformed number exponent", k);
        }
      }
      out.push_back({Tok::Number, start, s.substr(start, k - start), integer});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (k < s.size() && (std::isalnum(static_cast<unsigned char>(s[k])) || s[k] == '_')) ++k;
      out.push_back({Tok::Ident, start, s.substr(start, k - start)});
      continue;
    }
    Tok kind;
    switch (c) {
      case '(': kind = Tok::LParen; break;
      case ')': kind = Tok::RParen; break;
      case ',': kind = Tok::Comma; break;
      case '+': kind = Tok::Plus; break;
      case '-': kind = Tok::Minus; break;
      case '*': kind = Tok::Star; break;
      case '/': kind = Tok::Slash; break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", k);
    }
    out.push_back({kind, start, s.substr(start, 1)});
    ++k;
  }
  out.push_back({Tok::End, s.size(), {}});
  return out;
}

enum class FnClass { Unary, Binary, Ts, TsPair, Cs, Graph };

struct FnInfo {
  std::string_view name;
  FnClass cls;
  int code;
};

constexpr FnInfo kFunctions[] = {
    {"neg", FnClass::Unary, static_cast<int>(UnaryOp::Neg)},
    {"abs", FnClass::Unary, static_cast<int>(UnaryOp::Abs)},
    {"log", FnClass::Unary, static_cast<int>(UnaryOp::Log)},
    {"sign", FnClass::Unary, static_cast<int>(UnaryOp::Sign)},
    {"add", FnClass::Binary, static_cast<int>(BinaryOp::Add)},
    {"sub", FnClass::Binary, static_cast<int>(BinaryOp::Sub)},
    {"mul", FnClass::Binary, static_cast<int>(BinaryOp::Mul)},
    {"div", FnClass::Binary, static_cast<int>(BinaryOp::Div)},
    {"min", FnClass::Binary, static_cast<int>(BinaryOp::Min)},
    {"max", FnClass::Binary, static_cast<int>(BinaryOp::Max)},
    {"delay", FnClass::Ts, static_cast<int>(TsKind::Delay)},
    {"delta", FnClass::Ts, static_cast<int>(TsKind::Delta)},
    {"ts_mean", FnClass::Ts, static_cast<int>(TsKind::Mean)},
    {"ts_std", FnClass::Ts, static_cast<int>(TsKind::Std)},
    {"ts_min", FnClass::Ts, static_cast<int>(TsKind::Min)},
    {"ts_max", FnClass::Ts, static_cast<int>(TsKind::Max)},
    {"ts_sum", FnClass::Ts, static_cast<int>(TsKind::Sum)},
    {"ts_rank", FnClass::Ts, static_cast<int>(TsKind::Rank)},
    {"ts_corr", FnClass::TsPair, static_cast<int>(TsPairKind::Corr)},
    {"ts_cov", FnClass::TsPair, static_cast<int>(TsPairKind::Cov)},
    {"rank", FnClass::Cs, static_cast<int>(CsKind::Rank)},
    {"zscore", FnClass::Cs, static_cast<int>(CsKind::Zscore)},
    {"demean", FnClass::Cs, static_cast<int>(CsKind::Demean)},
    {"nbr_mean", FnClass::Graph, static_cast<int>(GraphKind::NbrMean)},
};

const FnInfo* lookup(std::string_view name) {
  for (const auto& f : kFunctions)
    if (f.name == name) return &f;
  return nullptr;
}

struct Arg {
  ExprPtr expr;
  std::size_t offset;
  const Token* sole_number = nullptr;  // set when the argument is one number token
};

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(lex(text)) {}

  ExprPtr run() {
    ExprPtr e = expr();
    if (peek().kind != Tok::End) throw ParseError("unexpected token '" + std::string(peek().text) + "'", peek().offset);
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }

  ExprPtr expr() {
    ExprPtr left = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const BinaryOp op = take().kind == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub;
      left = binary(op, left, term());
    }
    return left;
  }

  ExprPtr term() {
    ExprPtr left = factor();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const BinaryOp op = take().kind == Tok::Star ? BinaryOp::Mul : BinaryOp::Div;
      left = binary(op, left, factor());
    }
    return left;
  }

  static double number_value(const Token& t) {
    double v = 0;
    if (!csv::parse_double(t.text, v)) throw ParseError("number out of range", t.offset);
    return v;
  }

  ExprPtr factor() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number:
        take();
        return constant(number_value(t));
      case Tok::Minus: {
        take();
        if (peek().kind == Tok::Number) return constant(-number_value(take()));
        return unary(UnaryOp::Neg, factor());
      }
      case Tok::LParen: {
        take();
        ExprPtr e = expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident: {
        take();
        if (peek().kind == Tok::LParen) return call(t);
        if (!is_known_field(t.text)) throw ParseError("unknown identifier '" + std::string(t.text) + "'", t.offset);
        return field(std::string(t.text));
      }
      case Tok::End:
        throw ParseError("unexpected end of input", t.offset);
      default:
        throw ParseError("unexpected token '" + std::string(t.text) + "'", t.offset);
    }
  }

  void expect(Tok kind, const char* what) {
    if (peek().kind != kind) {
      if (peek().kind == Tok::End) throw ParseError(std::string("expected ") + what + " before end of input", peek().offset);
      throw ParseError(std::string("expected ") + what, peek().offset);
    }
    take();
  }

  ExprPtr call(const Token& name) {
    const FnInfo* fn = lookup(name.text);
    if (!fn) throw ParseError("unknown identifier '" + std::string(name.text) + "'", name.offset);
    take();  // '('
    std::vector<Arg> args;
    while (true) {
      Arg a;
      a.offset = peek().offset;
      const std::size_t before = pos_;
      a.expr = expr();
      if (pos_ == before + 1 && toks_[before].kind == Tok::Number) a.sole_number = &toks_[before];
      args.push_back(std::move(a));
      if (peek().kind == Tok::Comma) {
        take();
        continue;
      }
      expect(Tok::RParen, "',' or ')'");
      break;
    }
    auto arity = [&](std::size_t n) {
      if (args.size() != n)
        throw ParseError(std::string(fn->name) + " expects " + std::to_string(n) + " arguments, got " +
                             std::to_string(args.size()),
                         name.offset);
    };
    auto window = [&](const Arg& a, int min) {
      if (!a.sole_number) throw ParseError("window must be an integer literal", a.offset);
      if (!a.sole_number->integer) throw ParseError("non-integer window", a.offset);
      int w = 0;
      auto r = std::from_chars(a.sole_number->text.data(), a.sole_number->text.data() + a.sole_number->text.size(), w);
      if (r.ec != std::errc{}) throw ParseError("window out of range", a.offset);
      if (w < min) throw ParseError("window must be >= " + std::to_string(min), a.offset);
      return w;
    };
    switch (fn->cls) {
      case FnClass::Unary:
        arity(1);
        return unary(static_cast<UnaryOp>(fn->code), args[0].expr);
      case FnClass::Binary:
        arity(2);
        return binary(static_cast<BinaryOp>(fn->code), args[0].expr, args[1].expr);
      case FnClass::Ts:
        arity(2);
        return ts(static_cast<TsKind>(fn->code), args[0].expr, window(args[1], 1));
      case FnClass::TsPair:
        arity(3);
        return ts_pair(static_cast<TsPairKind>(fn->code), args[0].expr, args[1].expr, window(args[2], 2));
      case FnClass::Cs:
        arity(1);
        return cs(static_cast<CsKind>(fn->code), args[0].expr);
      case FnClass::Graph:
        arity(1);
        return graph(static_cast<GraphKind>(fn->code), args[0].expr);
    }
    throw ParseError("internal parser error", name.offset);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string_view infix(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return " + ";
    case BinaryOp::Sub: return " - ";
    case BinaryOp::Mul: return " * ";
    case BinaryOp::Div: return " / ";
    default: return {};
  }
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

}  // namespace

ExprPtr parse(std::string_view text) { return Parser(text).run(); }

std::string format(const Expr& e) {
  return std::visit(
      overloaded{
          [](const Constant& x) { return csv::format_double(x.value); },
          [](const Field& x) { return x.name; },
          [](const Unary& x) {
            if (x.op == UnaryOp::Neg) {
              if (std::holds_alternative<Constant>(x.child->node)) return "-(" + format(*x.child) + ")";
              return "-" + format(*x.child);
            }
            return std::string(name_of(x.op)) + "(" + format(*x.child) + ")";
          },
          [](const Binary& x) {
            if (auto op = infix(x.op); !op.empty())
              return "(" + format(*x.left) + std::string(op) + format(*x.right) + ")";
            return std::string(name_of(x.op)) + "(" + format(*x.left) + ", " + format(*x.right) + ")";
          },
          [](const TsOp& x) {
            return std::string(name_of(x.op)) + "(" + format(*x.child) + ", " + std::to_string(x.window) + ")";
          },
          [](const TsPairOp& x) {
            return std::string(name_of(x.op)) + "(" + format(*x.left) + ", " + format(*x.right) + ", " +
                   std::to_string(x.window) + ")";
          },
          [](const CsOp& x) { return std::string(name_of(x.op)) + "(" + format(*x.child) + ")"; },
          [](const GraphOp& x) { return std::string(name_of(x.op)) + "(" + format(*x.child) + ")"; },
      },
      e.node);
}

std::vector<NamedFactor> parse_library(std::string_view text) {
  std::vector<NamedFactor> out;
  auto ls = csv::lines(text);
  for (std::size_t k = 0; k < ls.size(); ++k) {
    std::string_view l = ls[k];
    if (auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
    std::string line = trim(l);
    if (line.empty()) continue;
    auto eq = line.find('=');
    const std::string where = "factor library line " + std::to_string(k + 1);
    if (eq == std::string::npos) throw DataError(where + ": expected 'name = expression'");
    NamedFactor f{trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)), nullptr};
    if (f.name.empty()) throw DataError(where + ": empty factor name");
    for (const auto& prev : out)
      if (prev.name == f.name) throw DataError(where + ": duplicate factor '" + f.name + "'");
    try {
      f.expr = parse(f.text);
    } catch (const ParseError& e) {
      throw DataError(where + ": " + e.what());
    }
    out.push_back(std::move(f));
  }
  return out;
}

const std::vector<NamedFactor>& builtin_library() {
  static const std::vector<NamedFactor> lib = parse_library(R"(# baseline volume-price factors
momentum_20   = rank(delta(close, 20) / delay(close, 20))
reversal_5    = -rank(delta(close, 5))
volatility_20 = -ts_std(returns, 20)
vol_price_corr_10 = -ts_corr(rank(volume), rank(close), 10)
volume_surge  = rank(volume / ts_mean(volume, 20))
range_position = (close - low) / (high - low)
vwap_gap      = zscore((close - vwap) / vwap)
ma_ratio_10   = close / ts_mean(close, 10) - 1
turnover_trend = -ts_rank(volume, 10)
peer_momentum = nbr_mean(rank(delta(close, 5)))
)");
  return lib;
}

}  // namespace qf::factor
