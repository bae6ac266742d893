#include "qf/report.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "qf/csv.hpp"

namespace qf::report {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const SignalReport& r) {
  json dates = json::array();
  for (const Date& d : r.ic_dates) dates.push_back(d.to_string());
  return json{{"method", std::string(to_string(r.method))},
              {"ic_mean", r.ic_mean},
              {"ic_std", r.ic_std},
              {"icir", opt(r.icir)},
              {"rank_ic_mean", r.rank_ic_mean},
              {"coverage", r.coverage},
              {"n_dates", r.ic_series.size()},
              {"ic_dates", dates},
              {"ic_series", r.ic_series}};
}

json to_json(const PortfolioReport& r) {
  return json{{"ann_return", r.ann_return},
              {"ann_vol", r.ann_vol},
              {"sharpe", opt(r.sharpe)},
              {"max_drawdown", r.max_drawdown},
              {"avg_turnover", r.avg_turnover},
              {"rolling_sharpe_std", opt(r.rolling_sharpe_std)},
              {"n_dates", r.n_dates}};
}

json to_json(const DecayReport& r) {
  json ics = json::array();
  for (const auto& v : r.ic_by_horizon) ics.push_back(opt(v));
  return json{{"mode", std::string(to_string(r.mode))},
              {"ic_by_horizon", ics},
              {"half_life", opt(r.half_life)},
              {"half_life_status", std::string(to_string(r.status))}};
}

json to_json(const ParamPoint& p) {
  json o = json::object();
  for (const auto& [k, v] : p) o[k] = v;
  return o;
}

json to_json(const RollRecord& r) {
  return json{{"index", r.index},
              {"train_first", r.train_first.to_string()},
              {"train_last", r.train_last.to_string()},
              {"test_first", r.test_first.to_string()},
              {"test_last", r.test_last.to_string()},
              {"n_train_dates", r.n_train_dates},
              {"n_valid_dates", r.n_valid_dates},
              {"n_train_rows", r.n_train_rows},
              {"final_loss", r.final_loss},
              {"params", to_json(r.params)},
              {"valid_score", opt(r.valid_score)}};
}

json to_json(const Matrix& m) { return json(m); }

json signal_json(const EvaluationReport& e) {
  return json{{"pearson", to_json(e.ic_pearson)}, {"spearman", to_json(e.ic_spearman)}};
}

json portfolio_json(const EvaluationReport& e) {
  if (!e.portfolio) return json(nullptr);
  json j = to_json(*e.portfolio);
  j["halted"] = e.curve.halted;
  j["terminal_nav"] = e.curve.nav.empty() ? 1.0 : e.curve.nav.back();
  return j;
}

std::string fmt(std::optional<double> v, int precision) {
  if (!v) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
  return buf;
}

std::string text_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  auto numeric = [](const std::string& s) {
    return !s.empty() && (std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '-' || s[0] == '+');
  };
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      const std::string pad(width[c] - cell.size(), ' ');
      if (c) out += "  ";
      out += numeric(cell) ? pad + cell : cell + pad;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + '\n';
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + '\n';
  for (const auto& r : rows) out += line(r);
  return out;
}

namespace {

std::optional<double> num(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_number()) return std::nullopt;
  return j[key].get<double>();
}

std::string str(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) return "";
  const json& v = j[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return fmt(v.get<double>());
  return "";
}

}  // namespace

std::string render_text(const json& bundle) {
  std::string out;
  if (bundle.contains("command")) out += "command: " + bundle["command"].get<std::string>() + "\n\n";
  const json& sig = bundle.value("signal", json(nullptr));
  if (sig.is_object() && sig.contains("pearson")) {
    std::vector<std::vector<std::string>> rows;
    for (const char* m : {"pearson", "spearman"}) {
      const json& r = sig[m];
      rows.push_back({m, fmt(num(r, "ic_mean")), fmt(num(r, "ic_std")), fmt(num(r, "icir")),
                      fmt(num(r, "rank_ic_mean")), fmt(num(r, "coverage")), str(r, "n_dates")});
    }
    out += "signal\n" + text_table({"method", "ic_mean", "ic_std", "icir", "rank_ic_mean", "coverage", "n_dates"}, rows) + "\n";
  }
  const json& pf = bundle.value("portfolio", json(nullptr));
  if (pf.is_object()) {
    std::vector<std::vector<std::string>> rows;
    for (const char* k : {"ann_return", "ann_vol", "sharpe", "max_drawdown", "avg_turnover", "rolling_sharpe_std", "terminal_nav"})
      rows.push_back({k, fmt(num(pf, k))});
    out += "portfolio\n" + text_table({"metric", "value"}, rows) + "\n";
  }
  const json& dc = bundle.value("decay", json(nullptr));
  if (dc.is_object() && dc.contains("ic_by_horizon")) {
    std::vector<std::vector<std::string>> rows;
    const json& ics = dc["ic_by_horizon"];
    for (std::size_t h = 0; h < ics.size(); ++h)
      rows.push_back({std::to_string(h + 1), ics[h].is_number() ? fmt(ics[h].get<double>()) : "undefined"});
    out += "decay (" + str(dc, "mode") + ", half_life " +
           (num(dc, "half_life") ? fmt(num(dc, "half_life"), 2) : str(dc, "half_life_status")) + ")\n" +
           text_table({"horizon", "ic"}, rows) + "\n";
  }
  const json& rolls = bundle.value("rolls", json(nullptr));
  if (rolls.is_array() && !rolls.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const json& r : rolls)
      rows.push_back({str(r, "index"), str(r, "train_first"), str(r, "train_last"), str(r, "test_first"),
                      str(r, "test_last"), fmt(num(r, "final_loss"), 6)});
    out += "rolls\n" +
           text_table({"roll", "train_first", "train_last", "test_first", "test_last", "final_loss"}, rows) + "\n";
  }
  const json& runs = bundle.value("runs", json(nullptr));
  if (runs.is_array() && !runs.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const json& r : runs)
      rows.push_back({str(r, "seed"), fmt(num(r, "ic_mean")), fmt(num(r, "rank_ic_mean")), fmt(num(r, "sharpe")),
                      fmt(num(r, "terminal_nav"))});
    out += "runs\n" + text_table({"seed", "ic_mean", "rank_ic_mean", "sharpe", "terminal_nav"}, rows) + "\n";
  }
  return out;
}

std::string ic_series_csv(const SignalReport& r) {
  std::string out = "date,ic\n";
  for (std::size_t k = 0; k < r.ic_series.size(); ++k)
    out += r.ic_dates[k].to_string() + ',' + csv::format_double(r.ic_series[k]) + '\n';
  return out;
}

}  // namespace qf::report
