#include "qf/factor/ast.hpp"

#include <algorithm>
#include <cctype>

namespace qf::factor {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool same(const ExprPtr& a, const ExprPtr& b) { return a == b || (a && b && *a == *b); }

ExprPtr make(auto node) { return std::make_shared<const Expr>(Expr{std::move(node)}); }

}  // namespace

bool operator==(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      overloaded{
          [&](const Constant& x) { return x.value == std::get<Constant>(b.node).value; },
          [&](const Field& x) { return x.name == std::get<Field>(b.node).name; },
          [&](const Unary& x) {
            const auto& y = std::get<Unary>(b.node);
            return x.op == y.op && same(x.child, y.child);
          },
          [&](const Binary& x) {
            const auto& y = std::get<Binary>(b.node);
            return x.op == y.op && same(x.left, y.left) && same(x.right, y.right);
          },
          [&](const TsOp& x) {
            const auto& y = std::get<TsOp>(b.node);
            return x.op == y.op && x.window == y.window && same(x.child, y.child);
          },
          [&](const TsPairOp& x) {
            const auto& y = std::get<TsPairOp>(b.node);
            return x.op == y.op && x.window == y.window && same(x.left, y.left) &&
                   same(x.right, y.right);
          },
          [&](const CsOp& x) {
            const auto& y = std::get<CsOp>(b.node);
            return x.op == y.op && same(x.child, y.child);
          },
          [&](const GraphOp& x) {
            const auto& y = std::get<GraphOp>(b.node);
            return x.op == y.op && same(x.child, y.child);
          },
      },
      a.node);
}

ExprPtr constant(double v) { return make(Constant{v}); }
ExprPtr field(std::string name) { return make(Field{std::move(name)}); }
ExprPtr unary(UnaryOp op, ExprPtr child) { return make(Unary{op, std::move(child)}); }
ExprPtr binary(BinaryOp op, ExprPtr l, ExprPtr r) { return make(Binary{op, std::move(l), std::move(r)}); }
ExprPtr ts(TsKind op, ExprPtr child, int window) { return make(TsOp{op, std::move(child), window}); }
ExprPtr ts_pair(TsPairKind op, ExprPtr l, ExprPtr r, int window) {
  return make(TsPairOp{op, std::move(l), std::move(r), window});
}
ExprPtr cs(CsKind op, ExprPtr child) { return make(CsOp{op, std::move(child)}); }
ExprPtr graph(GraphKind op, ExprPtr child) { return make(GraphOp{op, std::move(child)}); }

std::size_t depth(const Expr& e) {
  return std::visit(overloaded{
                        [](const Constant&) -> std::size_t { return 1; },
                        [](const Field&) -> std::size_t { return 1; },
                        [](const Unary& x) { return 1 + depth(*x.child); },
                        [](const Binary& x) { return 1 + std::max(depth(*x.left), depth(*x.right)); },
                        [](const TsOp& x) { return 1 + depth(*x.child); },
                        [](const TsPairOp& x) { return 1 + std::max(depth(*x.left), depth(*x.right)); },
                        [](const CsOp& x) { return 1 + depth(*x.child); },
                        [](const GraphOp& x) { return 1 + depth(*x.child); },
                    },
                    e.node);
}

std::size_t node_count(const Expr& e) {
  return std::visit(overloaded{
                        [](const Constant&) -> std::size_t { return 1; },
                        [](const Field&) -> std::size_t { return 1; },
                        [](const Unary& x) { return 1 + node_count(*x.child); },
                        [](const Binary& x) { return 1 + node_count(*x.left) + node_count(*x.right); },
                        [](const TsOp& x) { return 1 + node_count(*x.child); },
                        [](const TsPairOp& x) { return 1 + node_count(*x.left) + node_count(*x.right); },
                        [](const CsOp& x) { return 1 + node_count(*x.child); },
                        [](const GraphOp& x) { return 1 + node_count(*x.child); },
                    },
                    e.node);
}

namespace {

void collect_fields(const Expr& e, std::set<std::string>& out) {
  std::visit(overloaded{
                 [](const Constant&) {},
                 [&](const Field& x) { out.insert(x.name); },
                 [&](const Unary& x) { collect_fields(*x.child, out); },
                 [&](const Binary& x) {
                   collect_fields(*x.left, out);
                   collect_fields(*x.right, out);
                 },
                 [&](const TsOp& x) { collect_fields(*x.child, out); },
                 [&](const TsPairOp& x) {
                   collect_fields(*x.left, out);
                   collect_fields(*x.right, out);
                 },
                 [&](const CsOp& x) { collect_fields(*x.child, out); },
                 [&](const GraphOp& x) { collect_fields(*x.child, out); },
             },
             e.node);
}

}  // namespace

std::set<std::string> fields_of(const Expr& e) {
  std::set<std::string> out;
  collect_fields(e, out);
  return out;
}

bool uses_graph(const Expr& e) {
  return std::visit(overloaded{
                        [](const Constant&) { return false; },
                        [](const Field&) { return false; },
                        [](const Unary& x) { return uses_graph(*x.child); },
                        [](const Binary& x) { return uses_graph(*x.left) || uses_graph(*x.right); },
                        [](const TsOp& x) { return uses_graph(*x.child); },
                        [](const TsPairOp& x) { return uses_graph(*x.left) || uses_graph(*x.right); },
                        [](const CsOp& x) { return uses_graph(*x.child); },
                        [](const GraphOp&) { return true; },
                    },
                    e.node);
}

std::size_t lookback(const Expr& e) {
  return std::visit(
      overloaded{
          [](const Constant&) -> std::size_t { return 1; },
          [](const Field& x) -> std::size_t { return x.name == "returns" ? 2 : 1; },
          [](const Unary& x) { return lookback(*x.child); },
          [](const Binary& x) { return std::max(lookback(*x.left), lookback(*x.right)); },
          [](const TsOp& x) {
            const std::size_t w = static_cast<std::size_t>(x.window);
            const std::size_t span = (x.op == TsKind::Delay || x.op == TsKind::Delta) ? w + 1 : w;
            return lookback(*x.child) + span - 1;
          },
          [](const TsPairOp& x) {
            return std::max(lookback(*x.left), lookback(*x.right)) + static_cast<std::size_t>(x.window) - 1;
          },
          [](const CsOp& x) { return lookback(*x.child); },
          [](const GraphOp& x) { return lookback(*x.child); },
      },
      e.node);
}

std::string_view name_of(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "neg";
    case UnaryOp::Abs: return "abs";
    case UnaryOp::Log: return "log";
    case UnaryOp::Sign: return "sign";
  }
  return "?";
}

std::string_view name_of(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "add";
    case BinaryOp::Sub: return "sub";
    case BinaryOp::Mul: return "mul";
    case BinaryOp::Div: return "div";
    case BinaryOp::Min: return "min";
    case BinaryOp::Max: return "max";
  }
  return "?";
}

std::string_view name_of(TsKind op) {
  switch (op) {
    case TsKind::Delay: return "delay";
    case TsKind::Delta: return "delta";
    case TsKind::Mean: return "ts_mean";
    case TsKind::Std: return "ts_std";
    case TsKind::Min: return "ts_min";
    case TsKind::Max: return "ts_max";
    case TsKind::Sum: return "ts_sum";
    case TsKind::Rank: return "ts_rank";
  }
  return "?";
}

std::string_view name_of(TsPairKind op) { return op == TsPairKind::Corr ? "ts_corr" : "ts_cov"; }

std::string_view name_of(CsKind op) {
  switch (op) {
    case CsKind::Rank: return "rank";
    case CsKind::Zscore: return "zscore";
    case CsKind::Demean: return "demean";
  }
  return "?";
}

std::string_view name_of(GraphKind) { return "nbr_mean"; }

bool is_known_field(std::string_view name) {
  static constexpr std::string_view kFields[] = {"open",   "high", "low",     "close",
                                                 "volume", "vwap", "returns", "fundamental"};
  if (std::find(std::begin(kFields), std::end(kFields), name) != std::end(kFields)) return true;
  if (name.size() >= 2 && name[0] == 'x')
    return std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  return false;
}

}  // namespace qf::factor
