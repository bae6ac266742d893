#include "qf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "qf/csv.hpp"
#include "qf/error.hpp"
#include "qf/factor/parser.hpp"

namespace qf::config {

const Value* Document::find(std::string_view section, std::string_view key) const {
  for (const Section& s : sections)
    if (s.name == section)
      for (const auto& [k, v] : s.entries)
        if (k == key) return &v;
  return nullptr;
}

void Document::set(std::string_view section, std::string_view key, Value value) {
  auto sit = std::find_if(sections.begin(), sections.end(), [&](const Section& s) { return s.name == section; });
  if (sit == sections.end()) {
    sections.push_back({std::string(section), {}});
    sit = sections.end() - 1;
  }
  for (auto& [k, v] : sit->entries)
    if (k == key) {
      v = std::move(value);
      return;
    }
  sit->entries.emplace_back(std::string(key), std::move(value));
}

namespace {

bool is_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

class ValueParser {
 public:
  ValueParser(std::string_view text, std::size_t base, std::string prefix = "")
      : s_(text), base_(base), prefix_(std::move(prefix)) {}

  Value parse_top() {
    skip_ws();
    Value v = value();
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected text after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(prefix_ + msg, base_ + pos_); }

  void skip_ws(bool newlines = false) {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == ' ' || c == '\t' || (newlines && (c == '\n' || c == '\r'))) ++pos_;
      else if (newlines && c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else break;
    }
  }

  Value value() {
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return Value{string()};
    if (c == '[') return array();
    if (s_.substr(pos_, 4) == "true" && !more_key(pos_ + 4)) {
      pos_ += 4;
      return Value{true};
    }
    if (s_.substr(pos_, 5) == "false" && !more_key(pos_ + 5)) {
      pos_ += 5;
      return Value{false};
    }
    return number();
  }

  bool more_key(std::size_t p) const { return p < s_.size() && is_key_char(s_[p]); }

  std::string string() {
    ++pos_;
    std::string out;
    while (true) {
      if (pos_ >= s_.size() || s_[pos_] == '\n') fail("unterminated string");
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (pos_ >= s_.size()) fail("unterminated escape");
      switch (s_[pos_++]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        default: fail("unsupported escape");
      }
    }
  }

  Value array() {
    ++pos_;
    Value::Array items;
    skip_ws(true);
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return Value{items};
    }
    while (true) {
      skip_ws(true);
      if (pos_ < s_.size() && s_[pos_] == '[') fail("nested arrays are not supported");
      items.push_back(value());
      skip_ws(true);
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws(true);
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return Value{items};
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return Value{items};
      }
      fail("expected ',' or ']' in array");
    }
  }

  Value number() {
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '+' ||
                               s_[end] == '-' || s_[end] == '.' || s_[end] == '_'))
      ++end;
    std::string tok(s_.substr(pos_, end - pos_));
    tok.erase(std::remove(tok.begin(), tok.end(), '_'), tok.end());
    if (tok.empty()) fail("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "nan";
    if (!is_float) {
      std::int64_t iv = 0;
      const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
      auto [p, ec] = std::from_chars(b, tok.data() + tok.size(), iv);
      if (ec == std::errc() && p == tok.data() + tok.size()) {
        pos_ = end;
        return Value{iv};
      }
      fail("invalid value '" + tok + "'");
    }
    double dv = 0.0;
    const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
    auto [p, ec] = std::from_chars(b, tok.data() + tok.size(), dv);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(dv)) fail("invalid number '" + tok + "'");
    pos_ = end;
    return Value{dv};
  }

  std::string_view s_;
  std::size_t base_;
  std::string prefix_;
  std::size_t pos_ = 0;
};

// Bracket depth outside strings and comments, to join multi-line arrays.
int bracket_delta(std::string_view line) {
  int d = 0;
  bool in_str = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (in_str) {
      if (c == '\\') ++k;
      else if (c == '"') in_str = false;
    } else if (c == '"') in_str = true;
    else if (c == '#') break;
    else if (c == '[') ++d;
    else if (c == ']') --d;
  }
  return d;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

}  // namespace

Document parse(std::string_view text) {
  Document doc;
  doc.sections.push_back({"", {}});
  std::set<std::string> seen_sections{""};
  std::size_t offset = 0;
  std::size_t line_no = 0;
  while (offset < text.size()) {
    std::size_t eol = text.find('\n', offset);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(offset, eol - offset);
    const std::size_t line_start = offset;
    offset = eol + 1;
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t[0] == '[') {
      const auto close = t.find(']');
      if (close == std::string::npos) throw ParseError("line " + std::to_string(line_no) + ": unclosed section header", line_start);
      const std::string name = trim(std::string_view(t).substr(1, close - 1));
      if (name.empty() || !std::all_of(name.begin(), name.end(), is_key_char))
        throw ParseError("line " + std::to_string(line_no) + ": invalid section name", line_start);
      const std::string rest = trim(std::string_view(t).substr(close + 1));
      if (!rest.empty() && rest[0] != '#')
        throw ParseError("line " + std::to_string(line_no) + ": text after section header", line_start);
      if (!seen_sections.insert(name).second)
        throw ParseError("line " + std::to_string(line_no) + ": duplicate section [" + name + "]", line_start);
      doc.sections.push_back({name, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("line " + std::to_string(line_no) + ": expected key = value", line_start);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty() || !std::all_of(key.begin(), key.end(), is_key_char))
      throw ParseError("line " + std::to_string(line_no) + ": invalid key '" + key + "'", line_start);
    std::string rhs(line.substr(eq + 1));
    int depth = bracket_delta(rhs);
    while (depth > 0 && offset < text.size()) {
      eol = text.find('\n', offset);
      if (eol == std::string_view::npos) eol = text.size();
      const std::string_view more = text.substr(offset, eol - offset);
      rhs += '\n';
      rhs += more;
      depth += bracket_delta(more);
      offset = eol + 1;
      ++line_no;
    }
    Value v = ValueParser(rhs, line_start + eq + 1, "line " + std::to_string(line_no) + ": ").parse_top();
    Section& sec = doc.sections.back();
    for (const auto& [k, _] : sec.entries)
      if (k == key) throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'", line_start);
    sec.entries.emplace_back(key, std::move(v));
  }
  return doc;
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + '"';
}

std::string render(const Value& v) {
  struct {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const {
      std::string s = csv::format_double(d);
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      return s;
    }
    std::string operator()(const std::string& s) const { return quote(s); }
    std::string operator()(const Value::Array& a) const {
      std::string s = "[";
      for (std::size_t k = 0; k < a.size(); ++k) s += (k ? ", " : "") + render(a[k]);
      return s + "]";
    }
  } visitor;
  return std::visit(visitor, v.v);
}

}  // namespace

std::string serialize(const Document& doc) {
  std::string out;
  for (const Section& s : doc.sections) {
    if (s.name.empty() && s.entries.empty()) continue;
    if (!s.name.empty()) out += (out.empty() ? "" : "\n") + std::string("[") + s.name + "]\n";
    for (const auto& [k, v] : s.entries) out += k + " = " + render(v) + '\n';
  }
  return out;
}

Value parse_value_lenient(std::string_view text) {
  const std::string t = trim(text);
  try {
    return ValueParser(t, 0).parse_top();
  } catch (const ParseError&) {
    return Value{t};
  }
}

void apply_override(Document& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ValidationError("override '" + std::string(assignment) + "' must be key=value");
  const std::string path = trim(assignment.substr(0, eq));
  const auto dot = path.find('.');
  const std::string section = dot == std::string::npos ? "" : path.substr(0, dot);
  const std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
  if (key.empty()) throw ValidationError("override '" + std::string(assignment) + "' has an empty key");
  doc.set(section, key, parse_value_lenient(assignment.substr(eq + 1)));
}

namespace {

class Reader {
 public:
  Reader(const Document& doc, std::string section) : doc_(doc), section_(std::move(section)) {
    for (const Section& s : doc.sections)
      if (s.name == section_)
        for (const auto& [k, _] : s.entries) pending_.insert(k);
  }

  const Value* get(const std::string& key) {
    pending_.erase(key);
    return doc_.find(section_, key);
  }

  void number(const std::string& key, double& out) {
    if (const Value* v = get(key)) {
      if (auto* d = std::get_if<double>(&v->v)) out = *d;
      else if (auto* i = std::get_if<std::int64_t>(&v->v)) out = static_cast<double>(*i);
      else bad(key, "a number");
    }
  }

  template <class T>
  void integer(const std::string& key, T& out) {
    if (const Value* v = get(key)) {
      auto* i = std::get_if<std::int64_t>(&v->v);
      if (!i || *i < 0) bad(key, "a nonnegative integer");
      out = static_cast<T>(*i);
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const Value* v = get(key)) {
      auto* b = std::get_if<bool>(&v->v);
      if (!b) bad(key, "true or false");
      out = *b;
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const Value* v = get(key)) {
      auto* s = std::get_if<std::string>(&v->v);
      if (!s) bad(key, "a string");
      out = *s;
    }
  }

  void date(const std::string& key, std::optional<Date>& out) {
    std::string s;
    if (const Value* v = doc_.find(section_, key); v && v->is_string()) {
      string(key, s);
      out = Date::parse(s);
    } else if (v) {
      bad(key, "a date string YYYY-MM-DD");
    }
  }

  void finish() const {
    if (!pending_.empty())
      throw ValidationError("config: unknown key '" + *pending_.begin() + "' in " +
                            (section_.empty() ? std::string("top level") : "[" + section_ + "]"));
  }

  std::vector<std::string> remaining() const { return {pending_.begin(), pending_.end()}; }

  [[noreturn]] void bad(const std::string& key, const char* expected) const {
    throw ValidationError("config: " + (section_.empty() ? key : section_ + "." + key) + " must be " + expected);
  }

 private:
  const Document& doc_;
  std::string section_;
  std::set<std::string> pending_;
};

factor::NamedFactor resolve_factor(const std::string& name, const std::string& text) {
  if (text.empty() || text == name)
    for (const auto& f : factor::builtin_library())
      if (f.name == name) return f;
  const std::string src = text.empty() ? name : text;
  return {name, src, factor::parse(src)};
}

}  // namespace

ExperimentConfig to_experiment(const Document& doc) {
  static const std::set<std::string> kSections{"",          "data",      "factors",  "model", "split",
                                               "roll",      "portfolio", "ensemble", "tuning"};
  for (const Section& s : doc.sections)
    if (!kSections.count(s.name)) throw ValidationError("config: unknown section [" + s.name + "]");

  ExperimentConfig cfg;
  std::optional<std::uint64_t> global_seed;
  {
    Reader r(doc, "");
    std::uint64_t seed = 0;
    if (doc.find("", "seed")) {
      r.integer("seed", seed);
      global_seed = seed;
    }
    r.finish();
  }
  {
    Reader r(doc, "data");
    r.string("dir", cfg.data.dir);
    SynthConfig& s = cfg.data.synth;
    r.integer("n_instruments", s.n_instruments);
    r.integer("n_days", s.n_days);
    r.integer("seed", s.seed);
    r.number("signal_ic", s.signal_ic);
    r.number("noise_vol", s.noise_vol);
    r.integer("n_latent_factors", s.n_latent_factors);
    r.integer("drift_period", s.drift_period);
    r.number("graph_density", s.graph_density);
    r.integer("n_planted", s.n_planted);
    std::optional<Date> start;
    r.date("start", start);
    if (start) s.start = *start;
    r.finish();
  }
  {
    Reader r(doc, "factors");
    std::int64_t horizon = cfg.label_horizon;
    r.integer("label_horizon", horizon);
    cfg.label_horizon = static_cast<int>(horizon);
    r.integer("decay_horizon", cfg.decay_horizon);
    if (const Value* use = r.get("use")) {
      if (!use->is_array()) r.bad("use", "an array of factor names or expressions");
      for (const Value& item : std::get<Value::Array>(use->v)) {
        const auto* s = std::get_if<std::string>(&item.v);
        if (!s) r.bad("use", "an array of strings");
        cfg.factors.push_back(resolve_factor(*s, ""));
      }
    }
    // everything else in [factors] is `name = "expression"`
    for (const Section& sec : doc.sections)
      if (sec.name == "factors")
        for (const auto& [k, v] : sec.entries) {
          if (k == "use" || k == "label_horizon" || k == "decay_horizon") continue;
          const auto* s = std::get_if<std::string>(&v.v);
          if (!s) r.bad(k, "an expression string");
          r.get(k);
          cfg.factors.push_back(resolve_factor(k, *s));
        }
    r.finish();
  }
  {
    Reader r(doc, "model");
    std::string kind(to_string(cfg.objective.kind));
    r.string("objective", kind);
    std::transform(kind.begin(), kind.end(), kind.begin(), [](unsigned char c) { return std::toupper(c); });
    cfg.objective.kind = objective_from_string(kind);
    if (doc.find("model", "combo_alpha")) {
      double a = 0.0;
      r.number("combo_alpha", a);
      cfg.objective.combo_alpha = a;
    }
    r.integer("rank_pairs_per_date", cfg.objective.rank_pairs_per_date);
    r.number("learning_rate", cfg.fit.learning_rate);
    r.integer("epochs", cfg.fit.epochs);
    r.number("l2", cfg.fit.l2);
    r.integer("seed", cfg.fit.seed);
    r.number("init_scale", cfg.fit.init_scale);
    r.number("row_subsample", cfg.fit.row_subsample);
    r.finish();
  }
  {
    Reader r(doc, "split");
    std::string scheme(to_string(cfg.split.scheme));
    r.string("scheme", scheme);
    cfg.split.scheme = split_scheme_from_string(scheme);
    r.number("valid_fraction", cfg.split.valid_fraction);
    r.integer("n_fragments", cfg.split.n_fragments);
    r.integer("seed", cfg.split.seed);
    r.finish();
  }
  {
    Reader r(doc, "roll");
    r.integer("train_months", cfg.roll.train_months);
    if (const Value* v = doc.find("roll", "roll_step"); v && v->is_string()) {
      std::string s;
      r.string("roll_step", s);
      if (s != "none" && s != "NONE") r.bad("roll_step", "3, 6, 12 or \"none\"");
      cfg.roll.roll_step = 0;
    } else {
      r.integer("roll_step", cfg.roll.roll_step);
    }
    r.date("test_start", cfg.roll.test_start);
    r.date("test_end", cfg.roll.test_end);
    r.boolean("expanding", cfg.roll.expanding);
    r.finish();
  }
  {
    Reader r(doc, "portfolio");
    PortfolioSpec& p = cfg.portfolio;
    r.string("method", p.method);
    r.integer("k", p.k);
    r.integer("rebalance_every", p.rebalance_every);
    r.number("fee_rate", p.costs.fee_rate);
    r.number("slippage_rate", p.costs.slippage_rate);
    r.integer("cov_window", p.mv.cov_window);
    r.number("ridge", p.mv.ridge);
    r.number("gamma", p.mv.gamma);
    r.number("w_max", p.mv.w_max);
    r.number("mu_scale", p.mv.mu_scale);
    r.finish();
  }
  {
    Reader r(doc, "ensemble");
    r.integer("n_runs", cfg.ensemble.n_runs);
    r.integer("base_seed", cfg.ensemble.base_seed);
    r.finish();
  }
  {
    Reader r(doc, "tuning");
    r.boolean("retrain", cfg.tuning.retrain);
    for (const Section& sec : doc.sections)
      if (sec.name == "tuning")
        for (const auto& [k, v] : sec.entries) {
          if (k == "retrain") continue;
          r.get(k);
          std::vector<double> values;
          auto push = [&](const Value& x) {
            if (auto* d = std::get_if<double>(&x.v)) values.push_back(*d);
            else if (auto* i = std::get_if<std::int64_t>(&x.v)) values.push_back(static_cast<double>(*i));
            else r.bad(k, "a number or an array of numbers");
          };
          if (v.is_array())
            for (const Value& x : std::get<Value::Array>(v.v)) push(x);
          else push(v);
          cfg.tuning.grid.emplace_back(k, std::move(values));
        }
    r.finish();
    FitConfig probe_fit;
    ObjectiveSpec probe_obj;
    for (const auto& [k, vals] : cfg.tuning.grid) apply_params({{k, vals.empty() ? 0.0 : vals.front()}}, probe_fit, probe_obj);
  }
  if (cfg.factors.empty())
    for (const auto& f : factor::builtin_library())
      if (!factor::uses_graph(*f.expr)) cfg.factors.push_back(f);
  if (global_seed) cfg.set_seed(*global_seed);
  cfg.validate();
  return cfg;
}

Document from_experiment(const ExperimentConfig& cfg) {
  Document d;
  auto num = [](double x) { return Value{x}; };
  auto integer = [](std::uint64_t x) { return Value{static_cast<std::int64_t>(x)}; };
  auto str = [](std::string s) { return Value{std::move(s)}; };
  if (!cfg.data.dir.empty()) {
    d.set("data", "dir", str(cfg.data.dir));
  } else {
    const SynthConfig& s = cfg.data.synth;
    d.set("data", "n_instruments", integer(s.n_instruments));
    d.set("data", "n_days", integer(s.n_days));
    d.set("data", "seed", integer(s.seed));
    d.set("data", "signal_ic", num(s.signal_ic));
    d.set("data", "noise_vol", num(s.noise_vol));
    d.set("data", "n_latent_factors", integer(s.n_latent_factors));
    d.set("data", "drift_period", integer(s.drift_period));
    d.set("data", "graph_density", num(s.graph_density));
    d.set("data", "n_planted", integer(s.n_planted));
    d.set("data", "start", str(s.start.to_string()));
  }
  d.set("factors", "label_horizon", integer(static_cast<std::uint64_t>(cfg.label_horizon)));
  d.set("factors", "decay_horizon", integer(cfg.decay_horizon));
  // builtins and factors named by their own expression go in `use`,
  // which is read before the keyed entries
  Value::Array use;
  std::vector<const factor::NamedFactor*> keyed;
  for (const auto& f : cfg.factors) {
    const bool bare = !f.name.empty() && std::all_of(f.name.begin(), f.name.end(), is_key_char);
    bool builtin = false;
    for (const auto& b : factor::builtin_library())
      if (b.name == f.name && *b.expr == *f.expr) builtin = true;
    if (!bare || f.name == f.text || builtin) use.push_back(str(f.name));
    else keyed.push_back(&f);
  }
  if (!use.empty()) d.set("factors", "use", Value{use});
  for (const auto* f : keyed) d.set("factors", f->name, str(factor::format(*f->expr)));
  std::string kind(to_string(cfg.objective.kind));
  std::transform(kind.begin(), kind.end(), kind.begin(), [](unsigned char c) { return std::tolower(c); });
  d.set("model", "objective", str(kind));
  if (cfg.objective.combo_alpha) d.set("model", "combo_alpha", num(*cfg.objective.combo_alpha));
  d.set("model", "rank_pairs_per_date", integer(cfg.objective.rank_pairs_per_date));
  d.set("model", "learning_rate", num(cfg.fit.learning_rate));
  d.set("model", "epochs", integer(cfg.fit.epochs));
  d.set("model", "l2", num(cfg.fit.l2));
  d.set("model", "seed", integer(cfg.fit.seed));
  d.set("model", "init_scale", num(cfg.fit.init_scale));
  d.set("model", "row_subsample", num(cfg.fit.row_subsample));
  d.set("split", "scheme", str(std::string(to_string(cfg.split.scheme))));
  d.set("split", "valid_fraction", num(cfg.split.valid_fraction));
  d.set("split", "n_fragments", integer(cfg.split.n_fragments));
  d.set("split", "seed", integer(cfg.split.seed));
  d.set("roll", "train_months", integer(cfg.roll.train_months));
  if (cfg.roll.roll_step == 0) d.set("roll", "roll_step", str("none"));
  else d.set("roll", "roll_step", integer(cfg.roll.roll_step));
  if (cfg.roll.test_start) d.set("roll", "test_start", str(cfg.roll.test_start->to_string()));
  if (cfg.roll.test_end) d.set("roll", "test_end", str(cfg.roll.test_end->to_string()));
  d.set("roll", "expanding", Value{cfg.roll.expanding});
  const PortfolioSpec& p = cfg.portfolio;
  d.set("portfolio", "method", str(p.method));
  d.set("portfolio", "k", integer(p.k));
  d.set("portfolio", "rebalance_every", integer(p.rebalance_every));
  d.set("portfolio", "fee_rate", num(p.costs.fee_rate));
  d.set("portfolio", "slippage_rate", num(p.costs.slippage_rate));
  d.set("portfolio", "cov_window", integer(p.mv.cov_window));
  d.set("portfolio", "ridge", num(p.mv.ridge));
  d.set("portfolio", "gamma", num(p.mv.gamma));
  d.set("portfolio", "w_max", num(p.mv.w_max));
  d.set("portfolio", "mu_scale", num(p.mv.mu_scale));
  d.set("ensemble", "n_runs", integer(cfg.ensemble.n_runs));
  d.set("ensemble", "base_seed", integer(cfg.ensemble.base_seed));
  d.set("tuning", "retrain", Value{cfg.tuning.retrain});
  for (const auto& [k, vals] : cfg.tuning.grid) {
    Value::Array a;
    for (double v : vals) a.push_back(num(v));
    d.set("tuning", k, Value{a});
  }
  return d;
}

}  // namespace qf::config
