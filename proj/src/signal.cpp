#include "qf/signal.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <unordered_map>

#include "qf/csv.hpp"
#include "qf/error.hpp"
#include "qf/random.hpp"
#include "qf/stats.hpp"

namespace qf {

using nlohmann::json;

namespace {

FeatureStats compute_stats(const FeatureMatrix& m) {
  FeatureStats s;
  s.mean.assign(m.n_features, 0.0);
  s.stdev.assign(m.n_features, 1.0);
  std::vector<double> col(m.rows());
  for (std::size_t f = 0; f < m.n_features; ++f) {
    for (std::size_t r = 0; r < m.rows(); ++r) col[r] = m.at(r, f);
    s.mean[f] = stats::mean(col);
    const double sd = stats::population_std(col);
    s.stdev[f] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

// Row indices grouped by date, groups in ascending date order.
std::vector<std::vector<std::size_t>> group_by_date(std::span<const std::size_t> date_index) {
  std::vector<std::size_t> order(date_index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return date_index[a] < date_index[b]; });
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k == 0 || date_index[order[k]] != date_index[order[k - 1]]) groups.emplace_back();
    groups.back().push_back(order[k]);
  }
  return groups;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }
double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LossGrad mse(std::span<const double> p, std::span<const double> y) {
  LossGrad out{0.0, std::vector<double>(p.size())};
  const double n = static_cast<double>(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = p[k] - y[k];
    out.loss += d * d;
    out.grad[k] = 2.0 * d / n;
  }
  out.loss /= n;
  return out;
}

LossGrad clf(std::span<const double> p, std::span<const double> y) {
  LossGrad out{0.0, std::vector<double>(p.size())};
  const double n = static_cast<double>(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double target = y[k] > 0.0 ? 1.0 : 0.0;
    out.loss += softplus(p[k]) - target * p[k];
    out.grad[k] = (sigmoid(p[k]) - target) / n;
  }
  out.loss /= n;
  return out;
}

LossGrad ic(std::span<const double> p, std::span<const double> y, std::span<const std::size_t> dates) {
  LossGrad out{0.0, std::vector<double>(p.size(), 0.0)};
  struct Kept {
    const std::vector<std::size_t>* rows;
    double corr, norm_p, norm_y, mp, my;
  };
  std::vector<Kept> kept;
  const auto groups = group_by_date(dates);
  std::vector<double> gp, gy;
  for (const auto& g : groups) {
    if (g.size() < 3) continue;
    gp.clear();
    gy.clear();
    for (std::size_t r : g) {
      gp.push_back(p[r]);
      gy.push_back(y[r]);
    }
    if (stats::all_equal(gp) || stats::all_equal(gy)) continue;
    const double mp = stats::mean(gp), my = stats::mean(gy);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      sxy += (gp[k] - mp) * (gy[k] - my);
      sxx += (gp[k] - mp) * (gp[k] - mp);
      syy += (gy[k] - my) * (gy[k] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) continue;
    const double np = std::sqrt(sxx), ny = std::sqrt(syy);
    kept.push_back({&g, sxy / (np * ny), np, ny, mp, my});
  }
  if (kept.empty()) throw NumericError("objective undefined on batch");
  const double d = static_cast<double>(kept.size());
  for (const auto& k : kept) {
    out.loss -= k.corr / d;
    // d corr / d p_r = yc_r/(|pc||yc|) - corr pc_r/|pc|^2
    for (std::size_t r : *k.rows) {
      const double pc = p[r] - k.mp, yc = y[r] - k.my;
      const double dc = yc / (k.norm_p * k.norm_y) - k.corr * pc / (k.norm_p * k.norm_p);
      out.grad[r] = -dc / d;
    }
  }
  return out;
}

LossGrad rank_pairs(std::span<const double> p, std::span<const double> y, std::span<const std::size_t> dates,
                    std::size_t pairs_per_date, std::uint64_t seed) {
  LossGrad out{0.0, std::vector<double>(p.size(), 0.0)};
  struct Pair {
    std::size_t i, j;
    double s;
  };
  std::vector<Pair> pairs;
  for (const auto& g : group_by_date(dates)) {
    if (g.size() < 2) continue;
    Rng rng(seed, 0x7A1B0000ull + dates[g.front()]);
    for (std::size_t k = 0; k < pairs_per_date; ++k) {
      const std::size_t a = rng.below(g.size());
      std::size_t b = rng.below(g.size() - 1);
      if (b >= a) ++b;
      const std::size_t i = g[a], j = g[b];
      if (y[i] == y[j]) continue;
      pairs.push_back({i, j, y[i] > y[j] ? 1.0 : -1.0});
    }
  }
  if (pairs.empty()) return out;
  const double n = static_cast<double>(pairs.size());
  for (const auto& pr : pairs) {
    const double z = -(p[pr.i] - p[pr.j]) * pr.s;
    out.loss += softplus(z);
    const double dz = sigmoid(z) / n;  // d softplus(z)/dz
    out.grad[pr.i] += -pr.s * dz;
    out.grad[pr.j] += pr.s * dz;
  }
  out.loss /= n;
  return out;
}

}  // namespace

FeatureMatrix build_feature_matrix(const std::vector<std::pair<std::string, const Panel*>>& features,
                                   const Panel& labels, std::span<const std::size_t> dates) {
  if (features.empty()) throw ValidationError("feature matrix needs at least one feature");
  for (const auto& [name, p] : features) require_same_axes(labels, *p, ("feature " + name).c_str());
  FeatureMatrix m;
  m.n_features = features.size();
  for (const auto& f : features) m.feature_names.push_back(f.first);
  std::vector<std::size_t> sorted(dates.begin(), dates.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> row(m.n_features);
  for (std::size_t t : sorted) {
    if (t >= labels.rows()) throw ValidationError("feature matrix date index out of range");
    for (std::size_t i = 0; i < labels.cols(); ++i) {
      const Cell& y = labels.at(t, i);
      if (!y) continue;
      bool ok = true;
      for (std::size_t f = 0; f < m.n_features && ok; ++f) {
        const Cell& c = features[f].second->at(t, i);
        ok = c.has_value();
        if (ok) row[f] = *c;
      }
      if (!ok) continue;
      m.x.insert(m.x.end(), row.begin(), row.end());
      m.y.push_back(*y);
      m.date_index.push_back(t);
      m.instrument_index.push_back(i);
    }
  }
  m.stats = compute_stats(m);
  return m;
}

FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> rows) {
  FeatureMatrix out;
  out.feature_names = m.feature_names;
  out.n_features = m.n_features;
  for (std::size_t r : rows) {
    out.x.insert(out.x.end(), m.x.begin() + static_cast<std::ptrdiff_t>(r * m.n_features),
                 m.x.begin() + static_cast<std::ptrdiff_t>((r + 1) * m.n_features));
    out.y.push_back(m.y[r]);
    out.date_index.push_back(m.date_index[r]);
    out.instrument_index.push_back(m.instrument_index[r]);
  }
  out.stats = compute_stats(out);
  return out;
}

std::string_view to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::MSE: return "MSE";
    case ObjectiveKind::IC: return "IC";
    case ObjectiveKind::RANK: return "RANK";
    case ObjectiveKind::CLF: return "CLF";
    case ObjectiveKind::COMBO: return "COMBO";
  }
  return "?";
}

ObjectiveKind objective_from_string(std::string_view s) {
  std::string upper(s);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  for (auto k : {ObjectiveKind::MSE, ObjectiveKind::IC, ObjectiveKind::RANK, ObjectiveKind::CLF, ObjectiveKind::COMBO})
    if (to_string(k) == upper) return k;
  throw ValidationError("unknown objective '" + std::string(s) + "'");
}

void ObjectiveSpec::validate() const {
  if ((kind == ObjectiveKind::COMBO) != combo_alpha.has_value())
    throw ValidationError("combo_alpha must be set exactly when the objective is COMBO");
  if (combo_alpha && !(*combo_alpha >= 0.0 && *combo_alpha <= 1.0))
    throw ValidationError("combo_alpha must be in [0, 1]");
  if ((kind == ObjectiveKind::RANK || kind == ObjectiveKind::COMBO) && rank_pairs_per_date < 1)
    throw ValidationError("rank_pairs_per_date must be >= 1");
}

LossGrad objective(const ObjectiveSpec& spec, std::span<const double> p, std::span<const double> y,
                   std::span<const std::size_t> date_index, std::uint64_t seed) {
  spec.validate();
  if (p.size() != y.size() || p.size() != date_index.size() || p.empty())
    throw ValidationError("objective: predictions, labels and dates must be equal nonempty sizes");
  switch (spec.kind) {
    case ObjectiveKind::MSE: return mse(p, y);
    case ObjectiveKind::CLF: return clf(p, y);
    case ObjectiveKind::IC: return ic(p, y, date_index);
    case ObjectiveKind::RANK: return rank_pairs(p, y, date_index, spec.rank_pairs_per_date, seed);
    case ObjectiveKind::COMBO: {
      const double a = *spec.combo_alpha;
      LossGrad m = mse(p, y);
      LossGrad r = rank_pairs(p, y, date_index, spec.rank_pairs_per_date, seed);
      LossGrad out{a * m.loss + (1.0 - a) * r.loss, std::vector<double>(p.size())};
      for (std::size_t k = 0; k < p.size(); ++k) out.grad[k] = a * m.grad[k] + (1.0 - a) * r.grad[k];
      return out;
    }
  }
  throw ValidationError("unknown objective");
}

double LinearModel::score(std::span<const double> raw) const {
  double s = bias;
  for (std::size_t f = 0; f < weights.size(); ++f)
    s += weights[f] * (raw[f] - train_stats.mean[f]) / train_stats.stdev[f];
  return s;
}

LinearModel fit(const FeatureMatrix& input, const ObjectiveSpec& spec, const FitConfig& cfg) {
  spec.validate();
  if (input.n_features < 1) throw ValidationError("fit: needs at least one feature");
  if (!(cfg.row_subsample > 0.0 && cfg.row_subsample <= 1.0))
    throw ValidationError("fit: row_subsample must be in (0, 1]");
  Rng rng(cfg.seed, 0xF17ull);

  FeatureMatrix sub;
  const FeatureMatrix* data = &input;
  if (cfg.row_subsample < 1.0) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < input.rows(); ++r)
      if (rng.uniform() < cfg.row_subsample) rows.push_back(r);
    sub = select_rows(input, rows);
    data = &sub;
  }
  const FeatureMatrix& m = *data;
  if (m.rows() < 10) throw ValidationError("fit: needs at least 10 rows, got " + std::to_string(m.rows()));

  const std::size_t nf = m.n_features, n = m.rows();
  LinearModel model;
  model.feature_names = m.feature_names;
  model.train_stats = m.stats;
  model.objective = spec;
  model.weights.assign(nf, 0.0);

  std::vector<double> xs(m.x.size());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t f = 0; f < nf; ++f)
      xs[r * nf + f] = (m.at(r, f) - m.stats.mean[f]) / m.stats.stdev[f];

  double init = cfg.init_scale;
  if (init == 0.0 && spec.kind == ObjectiveKind::IC) init = 0.01;
  if (init != 0.0)
    for (auto& w : model.weights) w = init * rng.normal();
  if (spec.kind == ObjectiveKind::MSE || spec.kind == ObjectiveKind::COMBO) model.bias = stats::mean(m.y);

  std::vector<double> pred(n);
  auto forward = [&] {
    for (std::size_t r = 0; r < n; ++r) {
      double s = model.bias;
      for (std::size_t f = 0; f < nf; ++f) s += model.weights[f] * xs[r * nf + f];
      pred[r] = s;
    }
  };
  std::vector<double> gw(nf);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    forward();
    LossGrad lg = objective(spec, pred, m.y, m.date_index, derive_seed(cfg.seed, epoch));
    double reg = 0.0;
    for (double w : model.weights) reg += w * w;
    const double total = lg.loss + cfg.l2 * reg;
    if (!std::isfinite(total)) throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
    model.final_loss = total;
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double g = lg.grad[r];
      gb += g;
      for (std::size_t f = 0; f < nf; ++f) gw[f] += g * xs[r * nf + f];
    }
    for (std::size_t f = 0; f < nf; ++f) model.weights[f] -= cfg.learning_rate * (gw[f] + 2.0 * cfg.l2 * model.weights[f]);
    model.bias -= cfg.learning_rate * gb;
    for (double w : model.weights)
      if (!std::isfinite(w)) throw NumericError("non-finite weights after epoch " + std::to_string(epoch));
  }
  return model;
}

SignalFrame predict(const LinearModel& model, const std::map<std::string, Panel>& feature_panels,
                    std::size_t first, std::size_t last) {
  std::vector<const Panel*> cols;
  for (const auto& name : model.feature_names) {
    auto it = feature_panels.find(name);
    if (it == feature_panels.end()) throw ValidationError("unknown factor '" + name + "'");
    cols.push_back(&it->second);
  }
  if (cols.empty()) throw ValidationError("predict: model has no features");
  const Panel& ref = *cols.front();
  for (const Panel* p : cols) require_same_axes(ref, *p, "predict");
  SignalFrame out(ref.calendar_ptr(), ref.instruments_ptr());
  if (first > last || last >= ref.rows()) throw ValidationError("predict: span outside calendar");
  std::vector<double> raw(cols.size());
  for (std::size_t t = first; t <= last; ++t)
    for (std::size_t i = 0; i < ref.cols(); ++i) {
      bool ok = true;
      for (std::size_t f = 0; f < cols.size() && ok; ++f) {
        const Cell& c = cols[f]->at(t, i);
        ok = c.has_value();
        if (ok) raw[f] = *c;
      }
      if (ok) out.at(t, i) = finite_or_missing(model.score(raw));
    }
  return out;
}

SignalFrame predict(const LinearModel& model, const factor::DataView& data,
                    const std::vector<factor::NamedFactor>& library, std::size_t first, std::size_t last) {
  std::map<std::string, Panel> panels;
  for (const auto& name : model.feature_names) {
    auto it = std::find_if(library.begin(), library.end(), [&](const auto& f) { return f.name == name; });
    if (it == library.end()) throw ValidationError("unknown factor '" + name + "'");
    panels.emplace(name, factor::evaluate(*it->expr, data));
  }
  return predict(model, panels, first, last);
}

json model_to_json(const LinearModel& m) {
  json obj = {{"kind", std::string(to_string(m.objective.kind))},
              {"rank_pairs_per_date", m.objective.rank_pairs_per_date}};
  if (m.objective.combo_alpha) obj["combo_alpha"] = *m.objective.combo_alpha;
  return json{{"feature_names", m.feature_names},
              {"weights", m.weights},
              {"bias", m.bias},
              {"train_stats", {{"mean", m.train_stats.mean}, {"std", m.train_stats.stdev}}},
              {"objective", obj},
              {"final_loss", m.final_loss}};
}

LinearModel model_from_json(const json& j) {
  try {
    LinearModel m;
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.train_stats.mean = j.at("train_stats").at("mean").get<std::vector<double>>();
    m.train_stats.stdev = j.at("train_stats").at("std").get<std::vector<double>>();
    const json& o = j.at("objective");
    m.objective.kind = objective_from_string(o.at("kind").get<std::string>());
    m.objective.rank_pairs_per_date = o.value("rank_pairs_per_date", std::size_t{32});
    if (o.contains("combo_alpha")) m.objective.combo_alpha = o.at("combo_alpha").get<double>();
    m.final_loss = j.value("final_loss", 0.0);
    const std::size_t n = m.feature_names.size();
    if (m.weights.size() != n || m.train_stats.mean.size() != n || m.train_stats.stdev.size() != n)
      throw DataError("model JSON: inconsistent feature counts");
    for (double s : m.train_stats.stdev)
      if (!(s > 0.0)) throw DataError("model JSON: train_stats std must be > 0");
    m.objective.validate();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
}

SignalFrame load_external_signal(std::string_view text) {
  auto ls = csv::lines(text);
  if (ls.empty() || ls[0] != "date,instrument,score")
    throw DataError("line 1: expected header date,instrument,score");
  struct Row {
    Date d;
    std::string id;
    double v;
  };
  std::vector<Row> rows;
  std::set<Date> dates;
  std::set<std::string> ids;
  for (std::size_t k = 1; k < ls.size(); ++k) {
    if (ls[k].empty()) continue;
    auto f = csv::split(ls[k]);
    Row r;
    if (f.size() != 3 || !Date::try_parse(f[0], r.d) || f[1].empty() || !csv::parse_double(f[2], r.v))
      throw DataError("line " + std::to_string(k + 1) + ": malformed signal row");
    r.id = std::string(f[1]);
    dates.insert(r.d);
    ids.insert(r.id);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("signal CSV has no rows");
  auto cal = std::make_shared<const TradingCalendar>(std::vector<Date>(dates.begin(), dates.end()));
  auto inst = std::make_shared<const InstrumentSet>(std::vector<std::string>(ids.begin(), ids.end()));
  SignalFrame out(cal, inst);
  for (const auto& r : rows) {
    Cell& c = out.at(*cal->index_of(r.d), *inst->index_of(r.id));
    if (c) throw DataError("duplicate signal key (" + r.d.to_string() + ", " + r.id + ")");
    c = r.v;
  }
  return out;
}

std::string export_signal_csv(const SignalFrame& s) {
  std::string out = "date,instrument,score\n";
  for (std::size_t t = 0; t < s.rows(); ++t) {
    const std::string d = s.calendar()[t].to_string();
    for (std::size_t i = 0; i < s.cols(); ++i)
      if (const Cell& c = s.at(t, i)) out += d + ',' + s.instruments()[i] + ',' + csv::format_double(*c) + '\n';
  }
  return out;
}

Panel reindex(const Panel& p, const CalendarPtr& calendar, const InstrumentsPtr& instruments) {
  Panel out(calendar, instruments);
  std::vector<std::optional<std::size_t>> cmap(instruments->size());
  for (std::size_t i = 0; i < instruments->size(); ++i) cmap[i] = p.instruments().index_of((*instruments)[i]);
  for (std::size_t t = 0; t < calendar->size(); ++t) {
    auto src = p.calendar().index_of((*calendar)[t]);
    if (!src) continue;
    for (std::size_t i = 0; i < instruments->size(); ++i)
      if (cmap[i]) out.at(t, i) = p.at(*src, *cmap[i]);
  }
  return out;
}

}  // namespace qf
