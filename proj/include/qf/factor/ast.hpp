#pragma once

#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>

namespace qf::factor {

enum class UnaryOp { Neg, Abs, Log, Sign };
enum class BinaryOp { Add, Sub, Mul, Div, Min, Max };
enum class TsKind { Delay, Delta, Mean, Std, Min, Max, Sum, Rank };
enum class TsPairKind { Corr, Cov };
enum class CsKind { Rank, Zscore, Demean };
enum class GraphKind { NbrMean };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Constant {
  double value;
};
struct Field {
  std::string name;
};
struct Unary {
  UnaryOp op;
  ExprPtr child;
};
struct Binary {
  BinaryOp op;
  ExprPtr left, right;
};
struct TsOp {
  TsKind op;
  ExprPtr child;
  int window;
};
struct TsPairOp {
  TsPairKind op;
  ExprPtr left, right;
  int window;
};
struct CsOp {
  CsKind op;
  ExprPtr child;
};
struct GraphOp {
  GraphKind op;
  ExprPtr child;
};

/// Immutable factor expression tree node.
struct Expr {
  std::variant<Constant, Field, Unary, Binary, TsOp, TsPairOp, CsOp, GraphOp> node;
};

/// Deep structural equality.
bool operator==(const Expr& a, const Expr& b);

ExprPtr constant(double v);
ExprPtr field(std::string name);
ExprPtr unary(UnaryOp op, ExprPtr child);
ExprPtr binary(BinaryOp op, ExprPtr left, ExprPtr right);
ExprPtr ts(TsKind op, ExprPtr child, int window);
ExprPtr ts_pair(TsPairKind op, ExprPtr left, ExprPtr right, int window);
ExprPtr cs(CsKind op, ExprPtr child);
ExprPtr graph(GraphKind op, ExprPtr child);

/// Leaves have depth 1.
std::size_t depth(const Expr& e);
std::size_t node_count(const Expr& e);
std::set<std::string> fields_of(const Expr& e);
bool uses_graph(const Expr& e);
/// Largest number of trailing rows any output cell depends on (1 = none).
std::size_t lookback(const Expr& e);

std::string_view name_of(UnaryOp op);
std::string_view name_of(BinaryOp op);
std::string_view name_of(TsKind op);
std::string_view name_of(TsPairKind op);
std::string_view name_of(CsKind op);
std::string_view name_of(GraphKind op);

/// Field names the parser accepts: bar fields, returns, fundamental, x<digits>.
bool is_known_field(std::string_view name);

}  // namespace qf::factor
