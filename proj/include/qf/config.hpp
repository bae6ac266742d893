#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "qf/harness.hpp"

namespace qf::config {

/// A TOML-subset value: bool, integer, float, string or a flat array.
struct Value {
  using Array = std::vector<Value>;
  std::variant<bool, std::int64_t, double, std::string, Array> v;

  bool is_string() const { return std::holds_alternative<std::string>(v); }
  bool is_array() const { return std::holds_alternative<Array>(v); }
  friend bool operator==(const Value&, const Value&) = default;
};

struct Section {
  std::string name;  // "" for top-level keys
  std::vector<std::pair<std::string, Value>> entries;
};

/// Ordered sections of `key = value` lines. Supported: `[section]` headers,
/// `#` comments, bare keys, basic strings with \" \\ \n \t escapes, integers,
/// floats, true/false and (possibly multi-line) arrays of scalars.
struct Document {
  std::vector<Section> sections;

  const Value* find(std::string_view section, std::string_view key) const;
  void set(std::string_view section, std::string_view key, Value value);
};

Document parse(std::string_view text);
std::string serialize(const Document& doc);

/// Parses the right-hand side of a TOML assignment, falling back to a
/// string for bare words (so `--set data.dir=/tmp/x` works unquoted).
Value parse_value_lenient(std::string_view text);

/// Applies `section.key=value` (or top-level `key=value`).
void apply_override(Document& doc, std::string_view assignment);

/// Builds a validated experiment config. Unknown sections and keys are errors.
/// The factor section holds `use = [...]` entries (built-in factor names or
/// expressions) plus `name = "expression"` custom factors, in file order.
ExperimentConfig to_experiment(const Document& doc);

/// Canonical document for a config: every field written explicitly, so
/// to_experiment(from_experiment(c)) reproduces `c`.
Document from_experiment(const ExperimentConfig& cfg);

}  // namespace qf::config
