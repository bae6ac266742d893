#include "qf/runner.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>

#include "qf/config.hpp"
#include "qf/csv.hpp"
#include "qf/error.hpp"
#include "qf/report.hpp"
#include "qf/synth.hpp"

namespace qf::run {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json value_json(const config::Value& v) {
  struct {
    json operator()(bool b) const { return b; }
    json operator()(std::int64_t i) const { return i; }
    json operator()(double d) const { return d; }
    json operator()(const std::string& s) const { return s; }
    json operator()(const config::Value::Array& a) const {
      json out = json::array();
      for (const auto& x : a) out.push_back(value_json(x));
      return out;
    }
  } visitor;
  return std::visit(visitor, v.v);
}

class Bundle {
 public:
  Bundle(std::string command, const ExperimentConfig& cfg, const Options& opt) : opt_(opt) {
    if (opt.out_dir.empty()) throw ValidationError("no output directory given");
    if (!cfg.data.dir.empty() && fs::exists(cfg.data.dir) && fs::exists(opt.out_dir) &&
        fs::equivalent(cfg.data.dir, opt.out_dir))
      throw ValidationError("output directory must differ from the data directory '" + cfg.data.dir + "'");
    fs::create_directories(opt.out_dir);
    j_ = json{{"command", std::move(command)},
              {"config", config_json(cfg)},
              {"signal", nullptr},
              {"portfolio", nullptr},
              {"decay", nullptr},
              {"correlation", nullptr},
              {"rolls", json::array()},
              {"manifest", json::array()}};
    write("config.toml", config::serialize(config::from_experiment(cfg)), "config");
  }

  json& operator[](const char* key) { return j_[key]; }

  void write(const std::string& name, const std::string& content, const std::string& kind) {
    const fs::path path = fs::path(opt_.out_dir) / name;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    csv::write_file(path.string(), content);
    j_["manifest"].push_back(json{{"path", name}, {"kind", kind}});
  }

  void evaluation(const EvaluationReport& e, const std::string& prefix = "") {
    j_["signal"] = report::signal_json(e);
    j_["decay"] = report::to_json(e.decay);
    j_["portfolio"] = report::portfolio_json(e);
    write(prefix + "ic_series.csv", report::ic_series_csv(e.ic_pearson), "ic_series");
    write(prefix + "weights.csv", export_weights_csv(e.weights), "weights");
    write(prefix + "equity.csv", export_equity_csv(e.curve), "equity");
    write(prefix + "trades.csv", export_trades_csv(e.curve), "trades");
  }

  json finish() {
    if (!opt_.deterministic) {
      const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      char buf[32];
      std::tm tm{};
      gmtime_r(&now, &tm);
      std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
      j_["generated_at"] = buf;
    }
    j_["manifest"].push_back(json{{"path", "report.txt"}, {"kind", "text"}});
    j_["manifest"].push_back(json{{"path", "report.json"}, {"kind", "report"}});
    csv::write_file((fs::path(opt_.out_dir) / "report.txt").string(), report::render_text(j_));
    csv::write_file((fs::path(opt_.out_dir) / "report.json").string(), j_.dump(2) + '\n');
    return j_;
  }

 private:
  Options opt_;
  json j_;
};

json rolls_json(const WalkForwardResult& wf) {
  json out = json::array();
  for (const auto& r : wf.rolls) out.push_back(report::to_json(r));
  return out;
}

}  // namespace

json config_json(const ExperimentConfig& cfg) {
  json out = json::object();
  for (const auto& sec : config::from_experiment(cfg).sections) {
    json s = json::object();
    for (const auto& [k, v] : sec.entries) s[k] = value_json(v);
    out[sec.name] = s;
  }
  return out;
}

json synth(const ExperimentConfig& cfg, const Options& opt) {
  Bundle b("synth", cfg, opt);
  const MarketBundle mb = generate(cfg.data.synth);
  const fs::path data_dir = fs::path(opt.out_dir) / "data";
  mb.market.write(data_dir.string());
  for (const auto& entry : fs::directory_iterator(data_dir))
    b["manifest"].push_back(json{{"path", "data/" + entry.path().filename().string()}, {"kind", "data"}});
  json regimes = json::array();
  for (const auto& r : mb.truth.regimes)
    regimes.push_back(json{{"first_day", r.first_day},
                           {"last_day", r.last_day},
                           {"dominant_field", "x" + std::to_string(r.dominant_field)},
                           {"realized_ic", r.realized_ic}});
  b.write("truth.json", json{{"mean_realized_ic", mb.truth.mean_realized_ic}, {"regimes", regimes}}.dump(2) + '\n',
          "truth");
  b.write("planted_signal.csv", export_panel_csv(mb.planted_signal, "value"), "planted_signal");
  const Panel fwd = forward_returns(mb.market.bars, 1);
  b["signal"] = json{{"pearson", report::to_json(information_coefficient(mb.planted_signal, fwd, IcMethod::Pearson))},
                     {"spearman", report::to_json(information_coefficient(mb.planted_signal, fwd, IcMethod::Spearman))}};
  return b.finish();
}

json factor_eval(const ExperimentConfig& cfg, const std::string& expr, const Options& opt) {
  const MarketData market = load_market(cfg.data);
  const factor::ExprPtr e = factor::parse(expr);
  const Panel values = factor::evaluate(*e, factor::DataView::of(market));
  Bundle b("factor eval", cfg, opt);
  b["factor"] = json{{"expr", expr}, {"canonical", factor::format(*e)}, {"present_cells", values.count_present()}};
  b.write("factor.csv", export_panel_csv(values, "value"), "factor");
  const Panel fwd = forward_returns(market.bars, cfg.label_horizon);
  if (mean_ic(values, fwd))
    b["signal"] = json{{"pearson", report::to_json(information_coefficient(values, fwd, IcMethod::Pearson))},
                       {"spearman", report::to_json(information_coefficient(values, fwd, IcMethod::Spearman))}};
  return b.finish();
}

json factor_search(const ExperimentConfig& cfg, const factor::GenConfig& gen, const Options& opt) {
  const MarketData market = load_market(cfg.data);
  const Panel fwd = forward_returns(market.bars, cfg.label_horizon);
  const auto found = factor::search_factors(factor::DataView::of(market), fwd, gen);
  Bundle b("factor search", cfg, opt);
  json list = json::array();
  std::string text = "name = expression  # score\n";
  for (std::size_t k = 0; k < found.size(); ++k) {
    list.push_back(json{{"rank", k + 1}, {"expr", found[k].text}, {"score", found[k].score},
                        {"n_valid_dates", found[k].n_valid_dates}});
    text += "cand_" + std::to_string(k + 1) + " = " + found[k].text + "  # " + csv::format_double(found[k].score) + '\n';
  }
  b["candidates"] = list;
  b["search"] = json{{"seed", gen.seed}, {"n_candidates", gen.n_candidates}, {"max_depth", gen.max_depth}};
  b.write("candidates.txt", text, "factor_library");
  return b.finish();
}

json train(const ExperimentConfig& cfg_in, const Options& opt) {
  ExperimentConfig cfg = cfg_in;
  cfg.roll.roll_step = 0;
  const MarketData market = load_market(cfg.data);
  const WalkForwardResult wf = walk_forward(cfg, market, opt.threads);
  Bundle b("train", cfg, opt);
  b["rolls"] = rolls_json(wf);
  b.write("model.json", model_to_json(wf.models.front()).dump(2) + '\n', "model");
  b.write("signal.csv", export_signal_csv(wf.oos_signal), "signal");
  b.evaluation(evaluate_signal(cfg, market, wf.oos_signal));
  return b.finish();
}

json backtest(const ExperimentConfig& cfg, const std::string& signal_path, const Options& opt) {
  const MarketData market = load_market(cfg.data);
  SignalFrame signal;
  WalkForwardResult wf;
  if (!signal_path.empty()) {
    signal = reindex(load_external_signal(csv::read_file(signal_path)), market.bars.close.calendar_ptr(),
                     market.bars.close.instruments_ptr());
  } else {
    wf = walk_forward(cfg, market, opt.threads);
    signal = wf.oos_signal;
  }
  Bundle b("backtest", cfg, opt);
  if (signal_path.empty()) b["rolls"] = rolls_json(wf);
  else b["signal_source"] = signal_path;
  b.evaluation(evaluate_signal(cfg, market, signal));
  return b.finish();
}

json walkforward(const ExperimentConfig& cfg, const Options& opt) {
  const MarketData market = load_market(cfg.data);
  const WalkForwardResult wf = walk_forward(cfg, market, opt.threads);
  Bundle b("walkforward", cfg, opt);
  b["rolls"] = rolls_json(wf);
  b.write("signal.csv", export_signal_csv(wf.oos_signal), "signal");
  json models = json::array();
  for (const auto& m : wf.models) models.push_back(model_to_json(m));
  b.write("models.json", models.dump(2) + '\n', "models");
  b.evaluation(evaluate_signal(cfg, market, wf.oos_signal));
  return b.finish();
}

json ensemble(const ExperimentConfig& cfg, const Options& opt) {
  const MarketData market = load_market(cfg.data);
  const EnsembleResult er = run_ensemble(cfg, market, opt.threads);
  Bundle b("ensemble", cfg, opt);
  json runs = json::array();
  std::string per_run = "seed,ic_mean,rank_ic_mean,sharpe,terminal_nav\n";
  for (std::size_t i = 0; i < er.runs.size(); ++i) {
    const EvaluationReport& r = er.run_reports[i];
    const double nav = r.curve.nav.empty() ? 1.0 : r.curve.nav.back();
    std::optional<double> sharpe;
    if (r.portfolio) sharpe = r.portfolio->sharpe;
    runs.push_back(json{{"seed", er.seeds[i]},
                        {"ic_mean", r.ic_pearson.ic_mean},
                        {"rank_ic_mean", r.ic_spearman.ic_mean},
                        {"sharpe", sharpe ? json(*sharpe) : json(nullptr)},
                        {"terminal_nav", nav}});
    per_run += std::to_string(er.seeds[i]) + ',' + csv::format_double(r.ic_pearson.ic_mean) + ',' +
               csv::format_double(r.ic_spearman.ic_mean) + ',' + (sharpe ? csv::format_double(*sharpe) : "") + ',' +
               csv::format_double(nav) + '\n';
  }
  b["runs"] = runs;
  b["rolls"] = rolls_json(er.runs.front());
  b["correlation"] = report::to_json(er.correlation);
  b.write("runs.csv", per_run, "runs");
  b.write("signal.csv", export_signal_csv(er.ensemble), "signal");
  b.evaluation(er.ensemble_report);
  return b.finish();
}

}  // namespace qf::run
