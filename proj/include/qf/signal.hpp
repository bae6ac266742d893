#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qf/factor/eval.hpp"
#include "qf/factor/parser.hpp"
#include "qf/panel.hpp"

namespace qf {

/// Model scores on the evaluation axes.
using SignalFrame = Panel;

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stdev;  // > 0; constant features get 1
};

/// Rows are (date, instrument) pairs where every feature and the label are
/// present, ordered by date then instrument. `x` holds raw feature values.
struct FeatureMatrix {
  std::vector<std::string> feature_names;
  std::size_t n_features = 0;
  std::vector<double> x;  // row-major n_rows x n_features
  std::vector<double> y;
  std::vector<std::size_t> date_index;  // calendar row of each row
  std::vector<std::size_t> instrument_index;
  FeatureStats stats;  // over the retained rows

  std::size_t rows() const { return y.size(); }
  double at(std::size_t r, std::size_t f) const { return x[r * n_features + f]; }
};

/// Builds the matrix over calendar rows `dates`; stats computed on the result.
FeatureMatrix build_feature_matrix(const std::vector<std::pair<std::string, const Panel*>>& features,
                                   const Panel& labels, std::span<const std::size_t> dates);
/// Subset of rows (stats recomputed on the subset).
FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> rows);

enum class ObjectiveKind { MSE, IC, RANK, CLF, COMBO };

std::string_view to_string(ObjectiveKind k);
ObjectiveKind objective_from_string(std::string_view s);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::MSE;
  std::optional<double> combo_alpha;  // COMBO only
  std::size_t rank_pairs_per_date = 32;

  void validate() const;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d prediction
};

/// Loss and exact gradient w.r.t. predictions.
///   MSE   mean (p - y)^2
///   IC    -mean over dates of Pearson(p_t, y_t); dates with < 3 rows or a
///         constant side are skipped; all skipped -> NumericError
///   RANK  mean softplus(-(p_i - p_j) sign(y_i - y_j)) over sampled
///         within-date pairs (ties in y skipped); pairs drawn from `seed`
///   CLF   mean logistic loss of p against 1[y > 0]
///   COMBO alpha MSE + (1 - alpha) RANK
LossGrad objective(const ObjectiveSpec& spec, std::span<const double> predictions,
                   std::span<const double> labels, std::span<const std::size_t> date_index,
                   std::uint64_t seed);

struct FitConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 200;
  double l2 = 0.0;
  std::uint64_t seed = 1;
  double init_scale = 0.0;    // std of the seeded initial weights
  double row_subsample = 1.0;  // fraction of rows drawn (seeded) for the fit
};

struct LinearModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;  // on standardized features
  double bias = 0.0;
  FeatureStats train_stats;
  ObjectiveSpec objective;
  double final_loss = 0.0;

  /// Score for one raw feature vector.
  double score(std::span<const double> raw) const;
};

/// Full-batch gradient descent on objective + l2 |w|^2 over standardized
/// features. Weights start at init_scale * N(0,1) (IC uses 0.01 when the
/// scale is 0, since a constant prediction leaves the objective undefined).
/// Bias starts at the label mean for MSE/COMBO and 0 otherwise.
LinearModel fit(const FeatureMatrix& features, const ObjectiveSpec& spec, const FitConfig& cfg);

/// Scores calendar rows [first, last] where every feature is present;
/// MISSING elsewhere. Feature panels are looked up by the model's names.
SignalFrame predict(const LinearModel& model, const std::map<std::string, Panel>& feature_panels,
                    std::size_t first, std::size_t last);
/// Evaluates the model's factors from `library` on `data`, then predicts.
SignalFrame predict(const LinearModel& model, const factor::DataView& data,
                    const std::vector<factor::NamedFactor>& library, std::size_t first, std::size_t last);

nlohmann::json model_to_json(const LinearModel& m);
LinearModel model_from_json(const nlohmann::json& j);

/// `date,instrument,score` rows on their own union axes.
SignalFrame load_external_signal(std::string_view csv_text);
std::string export_signal_csv(const SignalFrame& s);
/// Reindexes onto other axes; cells outside the source are MISSING.
Panel reindex(const Panel& p, const CalendarPtr& calendar, const InstrumentsPtr& instruments);

}  // namespace qf
