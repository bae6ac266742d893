#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qf/factor/ast.hpp"

namespace qf::factor {

/// Parses factor text. Grammar (whitespace-insensitive):
///   expr   := term (("+"|"-") term)*
///   term   := factor (("*"|"/") factor)*
///   factor := number | ident | "-" factor | ident "(" args ")" | "(" expr ")"
///   args   := expr ("," expr)*
/// "-" directly followed by a number yields a negative Constant. Time-series
/// windows must be decimal integer literals. Throws ParseError with offset.
ExprPtr parse(std::string_view text);

/// Canonical text: arithmetic fully parenthesized, `name(arg, ..., window)`
/// for function operators. parse(format(e)) == e structurally.
std::string format(const Expr& e);

struct NamedFactor {
  std::string name;
  std::string text;
  ExprPtr expr;
};

/// `name = expression` per line; `#` starts a comment. Errors carry line numbers.
std::vector<NamedFactor> parse_library(std::string_view text);

/// Ten built-in baseline factors (momentum, reversal, volatility, ...).
const std::vector<NamedFactor>& builtin_library();

}  // namespace qf::factor
