// qf command-line front end. Talks to the engine only through qf/qf.h.
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qf/qf.h"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string out_dir;
  std::string data_dir;
  bool deterministic = false;
};

int exit_code(qf_status s) {
  if (s == QF_OK) return 0;
  if (s == QF_ERR_USAGE) return 1;
  return 2;
}

int fail(qf_status s) {
  std::cerr << "qf: " << qf_status_name(s) << " error: " << qf_last_error() << '\n';
  return exit_code(s);
}

class ConfigHandle {
 public:
  ~ConfigHandle() { qf_config_free(cfg_); }
  qf_config* get() const { return cfg_; }
  qf_config** out() { return &cfg_; }

 private:
  qf_config* cfg_ = nullptr;
};

qf_status build_config(const Common& c, ConfigHandle& cfg) {
  qf_status s = c.config_path.empty() ? qf_config_new(cfg.out()) : qf_config_load(c.config_path.c_str(), cfg.out());
  if (s != QF_OK) return s;
  if (!c.data_dir.empty()) {
    if (!std::filesystem::is_directory(c.data_dir)) {
      // reported like any other missing-data condition
      qf_market* m = nullptr;
      s = qf_market_load(c.data_dir.c_str(), &m);
      qf_market_free(m);
      if (s != QF_OK) return s;
    }
    const std::string a = "data.dir=\"" + c.data_dir + "\"";
    if ((s = qf_config_set(cfg.get(), a.c_str())) != QF_OK) return s;
  }
  for (const auto& o : c.overrides)
    if ((s = qf_config_set(cfg.get(), o.c_str())) != QF_OK) return s;
  if (c.seed && (s = qf_config_set_seed(cfg.get(), *c.seed)) != QF_OK) return s;
  return QF_OK;
}

int finish(qf_status s, char* report) {
  if (s != QF_OK) return fail(s);
  char* text = nullptr;
  const qf_status r = qf_report_render(report, &text);
  qf_string_free(report);
  if (r != QF_OK) return fail(r);
  std::cout << text;
  qf_string_free(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qf: factor research, walk-forward evaluation and backtesting"};
  app.require_subcommand(1);
  app.fallthrough();

  Common c;
  if (const char* env = std::getenv("QF_OUTPUT_DIR")) c.out_dir = env;
  if (c.out_dir.empty()) c.out_dir = "qf_out";
  std::uint64_t seed_value = 0;
  app.add_option("--config", c.config_path, "experiment config file (TOML subset)");
  app.add_option("--set", c.overrides, "override a config value, section.key=value")->take_all();
  auto* seed_opt = app.add_option("--seed", seed_value, "override every seed");
  app.add_option("--threads", c.threads, "maximum worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", c.out_dir, "output directory (default $QF_OUTPUT_DIR or ./qf_out)");
  app.add_option("--data", c.data_dir, "market data directory");
  app.add_flag("--deterministic", c.deterministic, "omit timestamps so reports are byte-identical");

  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic market bundle");
  auto* factor = app.add_subcommand("factor", "evaluate or search factor expressions");
  factor->require_subcommand(1);
  auto* f_eval = factor->add_subcommand("eval", "evaluate one expression to a panel CSV");
  std::string expr;
  f_eval->add_option("--expr", expr, "factor expression")->required();
  auto* f_search = factor->add_subcommand("search", "random expression search scored by IC");
  std::size_t n_candidates = 100, max_depth = 3;
  f_search->add_option("--n", n_candidates, "candidates to generate")->check(CLI::PositiveNumber);
  f_search->add_option("--depth", max_depth, "maximum tree depth")->check(CLI::PositiveNumber);
  auto* train = app.add_subcommand("train", "fit once on the train window and predict the test range");
  auto* backtest = app.add_subcommand("backtest", "backtest a signal CSV or the walk-forward signal");
  std::string signal_path;
  backtest->add_option("--signal", signal_path, "signal CSV with header date,instrument,score");
  auto* walkforward = app.add_subcommand("walkforward", "rolling fit/predict over the test range");
  auto* ensemble = app.add_subcommand("ensemble", "seed ensemble of walk-forward runs");
  auto* report = app.add_subcommand("report", "render a report.json as text tables");
  std::string report_in;
  report->add_option("--in", report_in, "report.json to render")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "qf: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  if (seed_opt->count()) c.seed = seed_value;

  if (report->parsed()) {
    std::ifstream in(report_in, std::ios::binary);
    if (!in) {
      std::cerr << "qf: data error: cannot open '" << report_in << "'\n";
      return 2;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    char* text = nullptr;
    const qf_status s = qf_report_render(ss.str().c_str(), &text);
    if (s != QF_OK) return fail(s);
    std::cout << text;
    qf_string_free(text);
    return 0;
  }

  ConfigHandle cfg;
  if (qf_status s = build_config(c, cfg); s != QF_OK) return fail(s);
  const qf_run_options opt{c.out_dir.c_str(), c.deterministic ? 1 : 0, c.threads};
  char* out = nullptr;
  qf_status s = QF_ERR_USAGE;
  if (synth->parsed()) s = qf_run_synth(cfg.get(), &opt, &out);
  else if (f_eval->parsed()) s = qf_run_factor_eval(cfg.get(), expr.c_str(), &opt, &out);
  else if (f_search->parsed())
    s = qf_run_factor_search(cfg.get(), n_candidates, max_depth, c.seed.value_or(1), &opt, &out);
  else if (train->parsed()) s = qf_run_train(cfg.get(), &opt, &out);
  else if (backtest->parsed())
    s = qf_run_backtest(cfg.get(), signal_path.empty() ? nullptr : signal_path.c_str(), &opt, &out);
  else if (walkforward->parsed()) s = qf_run_walkforward(cfg.get(), &opt, &out);
  else if (ensemble->parsed()) s = qf_run_ensemble(cfg.get(), &opt, &out);
  else {
    std::cerr << app.help();
    return 1;
  }
  return finish(s, out);
}
