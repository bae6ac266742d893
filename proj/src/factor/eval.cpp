#include "qf/factor/eval.hpp"

#include <algorithm>
#include <cmath>

#include "qf/error.hpp"
#include "qf/stats.hpp"

namespace qf::factor {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Panel blank_like(const BarPanel& bars) {
  return Panel(bars.close.calendar_ptr(), bars.close.instruments_ptr());
}

Cell apply_unary(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::Neg: return -x;
    case UnaryOp::Abs: return std::fabs(x);
    case UnaryOp::Log:
      if (x <= 0.0) return kMissing;
      return finite_or_missing(std::log(x));
    case UnaryOp::Sign: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  }
  return kMissing;
}

Cell apply_binary(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::Add: return finite_or_missing(a + b);
    case BinaryOp::Sub: return finite_or_missing(a - b);
    case BinaryOp::Mul: return finite_or_missing(a * b);
    case BinaryOp::Div:
      if (b == 0.0) return kMissing;
      return finite_or_missing(a / b);
    case BinaryOp::Min: return std::min(a, b);
    case BinaryOp::Max: return std::max(a, b);
  }
  return kMissing;
}

// Fills `buf` with column i over rows [t-w+1, t]; false if any is MISSING.
bool window_values(const Panel& p, std::size_t t, std::size_t i, std::size_t w, std::vector<double>& buf) {
  buf.clear();
  if (t + 1 < w) return false;
  for (std::size_t r = t + 1 - w; r <= t; ++r) {
    const Cell& c = p.at(r, i);
    if (!c) return false;
    buf.push_back(*c);
  }
  return true;
}

Cell reduce_window(TsKind op, std::span<const double> v) {
  const std::size_t w = v.size();
  switch (op) {
    case TsKind::Mean: {
      double s = 0.0;
      for (double x : v) s += x;
      return finite_or_missing(s / static_cast<double>(w));
    }
    case TsKind::Sum: {
      double s = 0.0;
      for (double x : v) s += x;
      return finite_or_missing(s);
    }
    case TsKind::Std: return finite_or_missing(stats::population_std(v));
    case TsKind::Min: return *std::min_element(v.begin(), v.end());
    case TsKind::Max: return *std::max_element(v.begin(), v.end());
    case TsKind::Rank: {
      if (w == 1) return 0.5;
      const double cur = v.back();
      double less = 0.0, equal = 0.0;
      for (double x : v) {
        if (x < cur) less += 1.0;
        else if (x == cur) equal += 1.0;
      }
      const double avg_rank = less + 0.5 * (equal + 1.0);  // 1-based
      return (avg_rank - 1.0) / static_cast<double>(w - 1);
    }
    default: return kMissing;
  }
}

Cell population_cov(std::span<const double> a, std::span<const double> b) {
  const double ma = stats::mean(a), mb = stats::mean(b);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - ma) * (b[k] - mb);
  return finite_or_missing(s / static_cast<double>(a.size()));
}

class Evaluator {
 public:
  explicit Evaluator(const DataView& data) : data_(data) {}

  Panel eval(const Expr& e) {
    return std::visit(overloaded{
                          [&](const Constant& x) { return constant(x.value); },
                          [&](const Field& x) { return field(x.name); },
                          [&](const Unary& x) { return unary(x); },
                          [&](const Binary& x) { return binary(x); },
                          [&](const TsOp& x) { return ts(x); },
                          [&](const TsPairOp& x) { return ts_pair(x); },
                          [&](const CsOp& x) { return cs(x); },
                          [&](const GraphOp& x) { return graph(x); },
                      },
                      e.node);
  }

 private:
  Panel constant(double v) {
    Panel out = blank_like(*data_.bars);
    for (std::size_t t = 0; t < out.rows(); ++t)
      for (auto& c : out.row(t)) c = v;
    return out;
  }

  Panel field(const std::string& name) {
    Panel scratch;
    const Panel& p = data_.resolve(name, scratch);
    return &p == &scratch ? std::move(scratch) : p;
  }

  Panel unary(const Unary& x) {
    Panel in = eval(*x.child);
    Panel out = blank_like(*data_.bars);
    for (std::size_t t = 0; t < out.rows(); ++t)
      for (std::size_t i = 0; i < out.cols(); ++i)
        if (const Cell& c = in.at(t, i)) out.at(t, i) = apply_unary(x.op, *c);
    return out;
  }

  Panel binary(const Binary& x) {
    Panel a = eval(*x.left);
    Panel b = eval(*x.right);
    Panel out = blank_like(*data_.bars);
    for (std::size_t t = 0; t < out.rows(); ++t)
      for (std::size_t i = 0; i < out.cols(); ++i) {
        const Cell &ca = a.at(t, i), &cb = b.at(t, i);
        if (ca && cb) out.at(t, i) = apply_binary(x.op, *ca, *cb);
      }
    return out;
  }

  Panel ts(const TsOp& x) {
    Panel in = eval(*x.child);
    Panel out = blank_like(*data_.bars);
    const std::size_t w = static_cast<std::size_t>(x.window);
    std::vector<double> buf;
    for (std::size_t i = 0; i < out.cols(); ++i)
      for (std::size_t t = 0; t < out.rows(); ++t) {
        if (x.op == TsKind::Delay || x.op == TsKind::Delta) {
          if (t < w) continue;
          const Cell& past = in.at(t - w, i);
          if (!past) continue;
          if (x.op == TsKind::Delay) {
            out.at(t, i) = past;
          } else if (const Cell& cur = in.at(t, i)) {
            out.at(t, i) = finite_or_missing(*cur - *past);
          }
          continue;
        }
        if (window_values(in, t, i, w, buf)) out.at(t, i) = reduce_window(x.op, buf);
      }
    return out;
  }

  Panel ts_pair(const TsPairOp& x) {
    Panel a = eval(*x.left);
    Panel b = eval(*x.right);
    Panel out = blank_like(*data_.bars);
    const std::size_t w = static_cast<std::size_t>(x.window);
    std::vector<double> va, vb;
    for (std::size_t i = 0; i < out.cols(); ++i)
      for (std::size_t t = 0; t < out.rows(); ++t) {
        if (!window_values(a, t, i, w, va) || !window_values(b, t, i, w, vb)) continue;
        if (x.op == TsPairKind::Corr) {
          if (auto c = stats::pearson(va, vb)) out.at(t, i) = *c;
        } else {
          out.at(t, i) = population_cov(va, vb);
        }
      }
    return out;
  }

  Panel cs(const CsOp& x) {
    Panel in = eval(*x.child);
    Panel out = blank_like(*data_.bars);
    std::vector<double> vals;
    std::vector<std::size_t> idx;
    for (std::size_t t = 0; t < out.rows(); ++t) {
      vals.clear();
      idx.clear();
      for (std::size_t i = 0; i < out.cols(); ++i)
        if (const Cell& c = in.at(t, i)) {
          vals.push_back(*c);
          idx.push_back(i);
        }
      if (vals.empty()) continue;
      const std::size_t n = vals.size();
      switch (x.op) {
        case CsKind::Rank: {
          if (n == 1) {
            out.at(t, idx[0]) = 0.5;
            break;
          }
          auto r = stats::average_ranks(vals);
          for (std::size_t k = 0; k < n; ++k) out.at(t, idx[k]) = (r[k] - 1.0) / static_cast<double>(n - 1);
          break;
        }
        case CsKind::Zscore: {
          const double sd = stats::population_std(vals);
          if (sd == 0.0) break;
          const double m = stats::mean(vals);
          for (std::size_t k = 0; k < n; ++k) out.at(t, idx[k]) = finite_or_missing((vals[k] - m) / sd);
          break;
        }
        case CsKind::Demean: {
          const double m = stats::mean(vals);
          for (std::size_t k = 0; k < n; ++k) out.at(t, idx[k]) = finite_or_missing(vals[k] - m);
          break;
        }
      }
    }
    return out;
  }

  Panel graph(const GraphOp& x) {
    if (!data_.graph) throw ValidationError("nbr_mean requires a relation graph");
    Panel in = eval(*x.child);
    Panel out = blank_like(*data_.bars);
    for (std::size_t t = 0; t < out.rows(); ++t) {
      auto nbrs = graph_as_of_indexed(*data_.graph, out.calendar()[t], out.instruments());
      for (std::size_t i = 0; i < out.cols(); ++i) {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t j : nbrs[i])
          if (const Cell& c = in.at(t, j)) {
            s += *c;
            ++n;
          }
        if (n > 0) out.at(t, i) = finite_or_missing(s / static_cast<double>(n));
      }
    }
    return out;
  }

  const DataView& data_;
};

}  // namespace

const Panel& DataView::resolve(const std::string& name, Panel& scratch) const {
  if (!bars) throw ValidationError("no bar data bound");
  if (name == "open") return bars->open;
  if (name == "high") return bars->high;
  if (name == "low") return bars->low;
  if (name == "close") return bars->close;
  if (name == "volume") return bars->volume;
  if (name == "vwap") return bars->vwap;
  if (fields) {
    auto it = fields->find(name);
    if (it != fields->end()) {
      require_same_axes(bars->close, it->second, ("field " + name).c_str());
      return it->second;
    }
  }
  if (name == "returns") {
    scratch = trailing_returns(*bars);
    return scratch;
  }
  throw ValidationError("unbound field '" + name + "'");
}

Panel evaluate(const Expr& e, const DataView& data) {
  if (!data.bars) throw ValidationError("evaluate: no bar data bound");
  if (uses_graph(e) && !data.graph) throw ValidationError("nbr_mean requires a relation graph");
  return Evaluator(data).eval(e);
}

}  // namespace qf::factor
