#include "qf/factor/search.hpp"

#include <algorithm>
#include <cmath>

#include "qf/error.hpp"
#include "qf/factor/parser.hpp"
#include "qf/stats.hpp"

namespace qf::factor {

namespace {

constexpr int kWindows[] = {1, 2, 3, 5, 10, 20};
constexpr int kPairWindows[] = {3, 5, 10, 20};

enum Cls { kField, kConstant, kUnary, kBinary, kTs, kTsPair, kCs, kGraph, kNumCls };
constexpr const char* kClsNames[] = {"field", "constant", "unary", "binary", "ts", "ts_pair", "cs", "graph"};
constexpr double kDefaultWeights[] = {1.0, 0.2, 0.5, 1.0, 1.5, 0.5, 1.0, 0.3};

struct Weights {
  double w[kNumCls];
};

Weights weights_of(const GenConfig& cfg, bool allow_graph) {
  Weights out;
  for (int k = 0; k < kNumCls; ++k) {
    out.w[k] = kDefaultWeights[k];
    if (auto it = cfg.op_weights.find(kClsNames[k]); it != cfg.op_weights.end()) out.w[k] = it->second;
    if (out.w[k] < 0.0) throw ValidationError(std::string("negative op weight for ") + kClsNames[k]);
  }
  if (!allow_graph) out.w[kGraph] = 0.0;
  return out;
}

int pick(Rng& rng, const double* w, int lo, int hi) {
  double total = 0.0;
  for (int k = lo; k < hi; ++k) total += w[k];
  if (total <= 0.0) return lo;
  double u = rng.uniform() * total;
  for (int k = lo; k < hi; ++k) {
    if (u < w[k]) return k;
    u -= w[k];
  }
  return hi - 1;
}

ExprPtr leaf(Rng& rng, const GenConfig& cfg, const Weights& w) {
  if (cfg.fields.empty()) throw ValidationError("random_expr: no fields available");
  const double ws[2] = {w.w[kField], w.w[kConstant]};
  if (pick(rng, ws, 0, 2) == 1) return constant(std::round(rng.uniform(-2.0, 2.0) * 1000.0) / 1000.0);
  return field(cfg.fields[rng.below(cfg.fields.size())]);
}

ExprPtr gen(Rng& rng, const GenConfig& cfg, const Weights& w, std::size_t depth_left) {
  if (depth_left <= 1) return leaf(rng, cfg, w);
  switch (pick(rng, w.w, 0, kNumCls)) {
    case kField:
    case kConstant: return leaf(rng, cfg, w);
    case kUnary: return unary(static_cast<UnaryOp>(rng.below(4)), gen(rng, cfg, w, depth_left - 1));
    case kBinary: {
      auto op = static_cast<BinaryOp>(rng.below(6));
      auto l = gen(rng, cfg, w, depth_left - 1);
      return binary(op, l, gen(rng, cfg, w, depth_left - 1));
    }
    case kTs: {
      auto op = static_cast<TsKind>(rng.below(8));
      int win = kWindows[rng.below(std::size(kWindows))];
      return ts(op, gen(rng, cfg, w, depth_left - 1), win);
    }
    case kTsPair: {
      auto op = static_cast<TsPairKind>(rng.below(2));
      int win = kPairWindows[rng.below(std::size(kPairWindows))];
      auto l = gen(rng, cfg, w, depth_left - 1);
      return ts_pair(op, l, gen(rng, cfg, w, depth_left - 1), win);
    }
    case kCs: return cs(static_cast<CsKind>(rng.below(3)), gen(rng, cfg, w, depth_left - 1));
    default: return graph(GraphKind::NbrMean, gen(rng, cfg, w, depth_left - 1));
  }
}

}  // namespace

ExprPtr random_expr(Rng& rng, const GenConfig& cfg, bool allow_graph) {
  if (cfg.max_depth < 1) throw ValidationError("random_expr: max_depth must be >= 1");
  return gen(rng, cfg, weights_of(cfg, allow_graph), cfg.max_depth);
}

FactorCandidate score_factor(const Panel& values, const Panel& labels) {
  require_same_axes(values, labels, "score_factor");
  FactorCandidate out;
  const std::size_t total = values.rows() * values.cols();
  const std::size_t present = values.count_present();
  if (total == 0 || 2 * present < total) return out;
  std::vector<double> all;
  all.reserve(present);
  for (const Cell& c : values.cells())
    if (c) all.push_back(*c);
  if (stats::all_equal(all)) return out;

  double sum = 0.0;
  std::vector<double> a, b;
  for (std::size_t t = 0; t < values.rows(); ++t) {
    a.clear();
    b.clear();
    for (std::size_t i = 0; i < values.cols(); ++i) {
      const Cell &v = values.at(t, i), &y = labels.at(t, i);
      if (v && y) {
        a.push_back(*v);
        b.push_back(*y);
      }
    }
    if (a.size() < 3) continue;
    if (auto c = stats::pearson(a, b)) {
      sum += std::fabs(*c);
      ++out.n_valid_dates;
    }
  }
  out.score = out.n_valid_dates ? sum / static_cast<double>(out.n_valid_dates) : 0.0;
  return out;
}

std::vector<FactorCandidate> search_factors(const DataView& data, const Panel& labels, const GenConfig& cfg) {
  if (cfg.n_candidates < 1) throw ValidationError("search_factors: n_candidates must be >= 1");
  require_same_axes(data.bars->close, labels, "search_factors");
  Rng rng(cfg.seed, 0x5EA4C4ull);
  const bool allow_graph = data.graph && !data.graph->empty();
  std::vector<FactorCandidate> out;
  out.reserve(cfg.n_candidates);
  for (std::size_t k = 0; k < cfg.n_candidates; ++k) {
    ExprPtr e = random_expr(rng, cfg, allow_graph);
    FactorCandidate c = score_factor(evaluate(*e, data), labels);
    c.expr = e;
    c.text = format(*e);
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FactorCandidate& a, const FactorCandidate& b) { return a.score > b.score; });
  return out;
}

}  // namespace qf::factor
