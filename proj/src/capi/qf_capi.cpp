#include "qf/qf.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "qf/config.hpp"
#include "qf/csv.hpp"
#include "qf/error.hpp"
#include "qf/factor/eval.hpp"
#include "qf/factor/parser.hpp"
#include "qf/metrics.hpp"
#include "qf/report.hpp"
#include "qf/runner.hpp"

struct qf_config {
  qf::config::Document doc;
  std::optional<std::uint64_t> seed;
};

struct qf_market {
  qf::MarketData data;
};

struct qf_panel {
  qf::Panel panel;
};

namespace {

thread_local std::string g_last_error;

template <class F>
qf_status guard(F&& f) {
  try {
    g_last_error.clear();
    f();
    return QF_OK;
  } catch (const qf::ParseError& e) {
    g_last_error = e.what();
    return QF_ERR_PARSE;
  } catch (const qf::DataError& e) {
    g_last_error = e.what();
    return QF_ERR_DATA;
  } catch (const qf::ValidationError& e) {
    g_last_error = e.what();
    return QF_ERR_VALIDATION;
  } catch (const qf::NumericError& e) {
    g_last_error = e.what();
    return QF_ERR_NUMERIC;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return QF_ERR_IO;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return QF_ERR_DATA;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return QF_ERR_USAGE;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return QF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal error: unknown exception";
    return QF_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

qf::ExperimentConfig resolve(const qf_config* cfg) {
  qf::ExperimentConfig c = qf::config::to_experiment(cfg->doc);
  if (cfg->seed) c.set_seed(*cfg->seed);
  c.validate();
  return c;
}

qf::run::Options options(const qf_run_options* opt) {
  require(opt, "options");
  require(opt->out_dir, "options->out_dir");
  return {opt->out_dir, opt->deterministic != 0, opt->threads ? opt->threads : 1};
}

template <class F>
qf_status run_command(const qf_config* cfg, const qf_run_options* opt, char** out, F&& f) {
  return guard([&] {
    require(cfg, "config");
    require(out, "output");
    const nlohmann::json j = f(resolve(cfg), options(opt));
    *out = dup(j.dump(2) + '\n');
  });
}

}  // namespace

extern "C" {

const char* qf_version(void) { return "0.1.0"; }

const char* qf_last_error(void) { return g_last_error.c_str(); }

const char* qf_status_name(qf_status s) {
  switch (s) {
    case QF_OK: return "ok";
    case QF_ERR_USAGE: return "usage";
    case QF_ERR_DATA: return "data";
    case QF_ERR_VALIDATION: return "validation";
    case QF_ERR_PARSE: return "parse";
    case QF_ERR_NUMERIC: return "numeric";
    case QF_ERR_IO: return "io";
    case QF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void qf_string_free(char* s) { std::free(s); }

qf_status qf_config_new(qf_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new qf_config{};
  });
}

qf_status qf_config_parse(const char* text, qf_config** out) {
  return guard([&] {
    require(text, "text");
    require(out, "out");
    auto c = std::make_unique<qf_config>();
    c->doc = qf::config::parse(text);
    *out = c.release();
  });
}

qf_status qf_config_load(const char* path, qf_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    if (!std::filesystem::exists(path)) throw qf::DataError(std::string("config file '") + path + "' does not exist");
    auto c = std::make_unique<qf_config>();
    c->doc = qf::config::parse(qf::csv::read_file(path));
    *out = c.release();
  });
}

qf_status qf_config_set(qf_config* cfg, const char* assignment) {
  return guard([&] {
    require(cfg, "config");
    require(assignment, "assignment");
    qf::config::apply_override(cfg->doc, assignment);
  });
}

qf_status qf_config_set_seed(qf_config* cfg, uint64_t seed) {
  return guard([&] {
    require(cfg, "config");
    cfg->seed = seed;
  });
}

qf_status qf_config_canonical(const qf_config* cfg, char** out) {
  return guard([&] {
    require(cfg, "config");
    require(out, "out");
    *out = dup(qf::config::serialize(qf::config::from_experiment(resolve(cfg))));
  });
}

void qf_config_free(qf_config* cfg) { delete cfg; }

qf_status qf_market_load(const char* dir, qf_market** out) {
  return guard([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new qf_market{qf::MarketData::load(dir)};
  });
}

qf_status qf_market_from_config(const qf_config* cfg, qf_market** out) {
  return guard([&] {
    require(cfg, "config");
    require(out, "out");
    *out = new qf_market{qf::load_market(resolve(cfg).data)};
  });
}

qf_status qf_market_write(const qf_market* m, const char* dir) {
  return guard([&] {
    require(m, "market");
    require(dir, "dir");
    m->data.write(dir);
  });
}

size_t qf_market_num_dates(const qf_market* m) { return m ? m->data.bars.rows() : 0; }
size_t qf_market_num_instruments(const qf_market* m) { return m ? m->data.bars.cols() : 0; }
void qf_market_free(qf_market* m) { delete m; }

qf_status qf_factor_eval(const qf_market* m, const char* expr, qf_panel** out) {
  return guard([&] {
    require(m, "market");
    require(expr, "expr");
    require(out, "out");
    const qf::factor::ExprPtr e = qf::factor::parse(expr);
    *out = new qf_panel{qf::factor::evaluate(*e, qf::factor::DataView::of(m->data))};
  });
}

qf_status qf_factor_format(const char* expr, char** out) {
  return guard([&] {
    require(expr, "expr");
    require(out, "out");
    *out = dup(qf::factor::format(*qf::factor::parse(expr)));
  });
}

qf_status qf_panel_get(const qf_panel* p, size_t date, size_t instrument, double* value, int* present) {
  return guard([&] {
    require(p, "panel");
    require(value, "value");
    require(present, "present");
    if (date >= p->panel.rows() || instrument >= p->panel.cols())
      throw std::invalid_argument("panel index out of range");
    const qf::Cell& c = p->panel.at(date, instrument);
    *present = c.has_value();
    *value = c.value_or(0.0);
  });
}

size_t qf_panel_rows(const qf_panel* p) { return p ? p->panel.rows() : 0; }
size_t qf_panel_cols(const qf_panel* p) { return p ? p->panel.cols() : 0; }

qf_status qf_panel_to_csv(const qf_panel* p, char** out) {
  return guard([&] {
    require(p, "panel");
    require(out, "out");
    *out = dup(qf::export_panel_csv(p->panel, "value"));
  });
}

qf_status qf_panel_ic(const qf_panel* p, const qf_market* m, int horizon, double* ic_mean) {
  return guard([&] {
    require(p, "panel");
    require(m, "market");
    require(ic_mean, "ic_mean");
    const qf::Panel fwd = qf::forward_returns(m->data.bars, horizon);
    *ic_mean = qf::information_coefficient(p->panel, fwd, qf::IcMethod::Pearson).ic_mean;
  });
}

void qf_panel_free(qf_panel* p) { delete p; }

qf_status qf_run_synth(const qf_config* cfg, const qf_run_options* opt, char** report_json) {
  return run_command(cfg, opt, report_json, [](const auto& c, const auto& o) { return qf::run::synth(c, o); });
}

qf_status qf_run_factor_eval(const qf_config* cfg, const char* expr, const qf_run_options* opt, char** report_json) {
  return run_command(cfg, opt, report_json, [&](const auto& c, const auto& o) {
    require(expr, "expr");
    return qf::run::factor_eval(c, expr, o);
  });
}

qf_status qf_run_factor_search(const qf_config* cfg, size_t n_candidates, size_t max_depth, uint64_t seed,
                               const qf_run_options* opt, char** report_json) {
  return run_command(cfg, opt, report_json, [&](const auto& c, const auto& o) {
    qf::factor::GenConfig gen;
    gen.n_candidates = n_candidates;
    gen.max_depth = max_depth;
    gen.seed = seed;
    return qf::run::factor_search(c, gen, o);
  });
}

qf_status qf_run_train(const qf_config* cfg, const qf_run_options* opt, char** report_json) {
  return run_command(cfg, opt, report_json, [](const auto& c, const auto& o) { return qf::run::train(c, o); });
}

qf_status qf_run_backtest(const qf_config* cfg, const char* signal_csv_path, const qf_run_options* opt,
                          char** report_json) {
  return run_command(cfg, opt, report_json, [&](const auto& c, const auto& o) {
    return qf::run::backtest(c, signal_csv_path ? signal_csv_path : "", o);
  });
}

qf_status qf_run_walkforward(const qf_config* cfg, const qf_run_options* opt, char** report_json) {
  return run_command(cfg, opt, report_json, [](const auto& c, const auto& o) { return qf::run::walkforward(c, o); });
}

qf_status qf_run_ensemble(const qf_config* cfg, const qf_run_options* opt, char** report_json) {
  return run_command(cfg, opt, report_json, [](const auto& c, const auto& o) { return qf::run::ensemble(c, o); });
}

qf_status qf_report_render(const char* report_json, char** text) {
  return guard([&] {
    require(report_json, "report_json");
    require(text, "text");
    *text = dup(qf::report::render_text(nlohmann::json::parse(report_json)));
  });
}

}  // extern "C"
