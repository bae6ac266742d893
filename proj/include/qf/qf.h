/* C interface to the qf research toolkit. All functions return a status
 * code; on failure qf_last_error() describes the error for the calling
 * thread. Strings returned through char** are owned by the caller and must
 * be released with qf_string_free. */
#ifndef QF_QF_H
#define QF_QF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define QF_API __declspec(dllexport)
#else
#define QF_API __attribute__((visibility("default")))
#endif

typedef enum qf_status {
  QF_OK = 0,
  QF_ERR_USAGE = 1,      /* bad argument to the API itself */
  QF_ERR_DATA = 2,       /* missing or malformed input data */
  QF_ERR_VALIDATION = 3, /* configuration or precondition violated */
  QF_ERR_PARSE = 4,      /* factor expression or config syntax */
  QF_ERR_NUMERIC = 5,    /* divergence, overflow, undefined objective */
  QF_ERR_IO = 6,
  QF_ERR_INTERNAL = 7
} qf_status;

typedef struct qf_config qf_config;
typedef struct qf_market qf_market;
typedef struct qf_panel qf_panel;

typedef struct qf_run_options {
  const char* out_dir;
  int deterministic; /* nonzero: omit timestamps from reports */
  size_t threads;    /* 0 is treated as 1 */
} qf_run_options;

QF_API const char* qf_version(void);
QF_API const char* qf_last_error(void);
QF_API const char* qf_status_name(qf_status s);
QF_API void qf_string_free(char* s);

/* Experiment configuration (TOML-like text). */
QF_API qf_status qf_config_new(qf_config** out);
QF_API qf_status qf_config_parse(const char* text, qf_config** out);
QF_API qf_status qf_config_load(const char* path, qf_config** out);
/* "section.key=value" override, applied before validation. */
QF_API qf_status qf_config_set(qf_config* cfg, const char* assignment);
/* Overrides every seed (data, fit, split, ensemble). */
QF_API qf_status qf_config_set_seed(qf_config* cfg, uint64_t seed);
/* Validates and returns the canonical, fully explicit config text. */
QF_API qf_status qf_config_canonical(const qf_config* cfg, char** out);
QF_API void qf_config_free(qf_config* cfg);

/* Market data: load a directory, or generate from the config's [data]. */
QF_API qf_status qf_market_load(const char* dir, qf_market** out);
QF_API qf_status qf_market_from_config(const qf_config* cfg, qf_market** out);
QF_API qf_status qf_market_write(const qf_market* m, const char* dir);
QF_API size_t qf_market_num_dates(const qf_market* m);
QF_API size_t qf_market_num_instruments(const qf_market* m);
QF_API void qf_market_free(qf_market* m);

/* Date x instrument panels (factor values, signals). */
QF_API qf_status qf_factor_eval(const qf_market* m, const char* expr, qf_panel** out);
QF_API qf_status qf_factor_format(const char* expr, char** out);
QF_API qf_status qf_panel_get(const qf_panel* p, size_t date, size_t instrument, double* value, int* present);
QF_API size_t qf_panel_rows(const qf_panel* p);
QF_API size_t qf_panel_cols(const qf_panel* p);
QF_API qf_status qf_panel_to_csv(const qf_panel* p, char** out);
/* Mean per-date Pearson IC against h-day forward returns. */
QF_API qf_status qf_panel_ic(const qf_panel* p, const qf_market* m, int horizon, double* ic_mean);
QF_API void qf_panel_free(qf_panel* p);

/* Commands. Each writes artifacts under options->out_dir and returns the
 * report bundle JSON. */
QF_API qf_status qf_run_synth(const qf_config* cfg, const qf_run_options* opt, char** report_json);
QF_API qf_status qf_run_factor_eval(const qf_config* cfg, const char* expr, const qf_run_options* opt,
                                    char** report_json);
QF_API qf_status qf_run_factor_search(const qf_config* cfg, size_t n_candidates, size_t max_depth, uint64_t seed,
                                      const qf_run_options* opt, char** report_json);
QF_API qf_status qf_run_train(const qf_config* cfg, const qf_run_options* opt, char** report_json);
/* signal_csv_path may be NULL to backtest the walk-forward signal. */
QF_API qf_status qf_run_backtest(const qf_config* cfg, const char* signal_csv_path, const qf_run_options* opt,
                                 char** report_json);
QF_API qf_status qf_run_walkforward(const qf_config* cfg, const qf_run_options* opt, char** report_json);
QF_API qf_status qf_run_ensemble(const qf_config* cfg, const qf_run_options* opt, char** report_json);

/* Renders a report bundle JSON as aligned text tables. */
QF_API qf_status qf_report_render(const char* report_json, char** text);

#ifdef __cplusplus
}
#endif

#endif /* QF_QF_H */
