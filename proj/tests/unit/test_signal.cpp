#include <doctest.h>

#include <numeric>

#include <nlohmann/json.hpp>

#include "qf/error.hpp"
#include "qf/metrics.hpp"
#include "qf/signal.hpp"
#include "qf/synth.hpp"
#include "support/oracles.hpp"

using namespace qf;

namespace {

struct Batch {
  std::vector<double> p, y;
  std::vector<std::size_t> d;
};

Batch random_batch(Rng& rng, std::size_t rows, std::size_t dates) {
  Batch b;
  for (std::size_t r = 0; r < rows; ++r) {
    b.d.push_back(r % dates);
    b.y.push_back(rng.normal());
    b.p.push_back(0.5 * b.y.back() + rng.normal());
  }
  return b;
}

ObjectiveSpec spec_of(ObjectiveKind k) {
  ObjectiveSpec s;
  s.kind = k;
  if (k == ObjectiveKind::COMBO) s.combo_alpha = 0.5;
  return s;
}

double loss_of(const ObjectiveSpec& s, const Batch& b, const std::vector<double>& p, std::uint64_t seed = 3) {
  return objective(s, p, b.y, b.d, seed).loss;
}

MarketBundle planted_bundle() {
  SynthConfig c;
  c.n_instruments = 200;
  c.n_days = 500;
  c.signal_ic = 0.1;
  c.n_planted = 6;
  c.seed = 11;
  return generate(c);
}

std::vector<std::size_t> span(std::size_t a, std::size_t b) {
  std::vector<std::size_t> v(b - a);
  std::iota(v.begin(), v.end(), a);
  return v;
}

}  // namespace

TEST_SUITE("signal") {
  TEST_CASE("mse is zero at the labels") {
    Rng rng(1);
    const Batch b = random_batch(rng, 12, 3);
    const LossGrad lg = objective(spec_of(ObjectiveKind::MSE), b.y, b.y, b.d, 1);
    CHECK(lg.loss == 0.0);
    CHECK(testing::all_of(lg.grad, 0.0));
  }

  TEST_CASE("ic is -1 for perfect per-date correlation") {
    Rng rng(2);
    const Batch b = random_batch(rng, 20, 4);
    CHECK(objective(spec_of(ObjectiveKind::IC), b.y, b.y, b.d, 1).loss == doctest::Approx(-1.0).epsilon(1e-14));
  }

  TEST_CASE("ic on degenerate batches is undefined") {
    const std::vector<double> p{1, 2}, y{1, 2};
    const std::vector<std::size_t> d{0, 0};
    CHECK_THROWS_AS(objective(spec_of(ObjectiveKind::IC), p, y, d, 1), NumericError);
    const std::vector<double> flat{1, 1, 1};
    const std::vector<std::size_t> d3{0, 0, 0};
    CHECK_THROWS_AS(objective(spec_of(ObjectiveKind::IC), flat, std::vector<double>{1, 2, 3}, d3, 1), NumericError);
  }

  TEST_CASE("ic gradient matches finite differences on a 20x4 batch") {
    Rng rng(3);
    const Batch b = random_batch(rng, 20, 4);
    const auto s = spec_of(ObjectiveKind::IC);
    const auto lg = objective(s, b.p, b.y, b.d, 1);
    CHECK(testing::fd_max_rel_error([&](const std::vector<double>& p) { return loss_of(s, b, p); }, b.p, lg.grad) < 1e-5);
  }

  TEST_CASE("every objective gradient matches finite differences") {
    Rng rng(4);
    for (auto k : {ObjectiveKind::MSE, ObjectiveKind::IC, ObjectiveKind::RANK, ObjectiveKind::CLF, ObjectiveKind::COMBO})
      for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dates = 1 + rng.below(5);
        const Batch b = random_batch(rng, dates * (3 + rng.below(10)), dates);
        const auto s = spec_of(k);
        const std::uint64_t seed = rng.next_u64();
        const auto lg = objective(s, b.p, b.y, b.d, seed);
        INFO(to_string(k) << " trial " << trial);
        CHECK(testing::fd_max_rel_error([&](const std::vector<double>& p) { return loss_of(s, b, p, seed); }, b.p,
                                        lg.grad) < 1e-5);
      }
  }

  TEST_CASE("rank loss decreases as consistent margins grow") {
    Rng rng(5);
    Batch b = random_batch(rng, 30, 3);
    b.p = b.y;
    const auto s = spec_of(ObjectiveKind::RANK);
    double prev = loss_of(s, b, b.p);
    for (int k = 0; k < 6; ++k) {
      for (double& v : b.p) v *= 2.0;
      const double cur = loss_of(s, b, b.p);
      CHECK(cur < prev);
      prev = cur;
    }
  }

  TEST_CASE("ic loss is invariant to per-date affine label maps") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      Batch b = random_batch(rng, 40, 4);
      const auto s = spec_of(ObjectiveKind::IC);
      const double base = loss_of(s, b, b.p);
      std::vector<double> scale(4), shift(4);
      for (int d = 0; d < 4; ++d) {
        scale[d] = rng.uniform(0.1, 10.0);
        shift[d] = rng.uniform(-5.0, 5.0);
      }
      for (std::size_t r = 0; r < b.y.size(); ++r) b.y[r] = scale[b.d[r]] * b.y[r] + shift[b.d[r]];
      CHECK(std::fabs(loss_of(s, b, b.p) - base) <= 1e-12);
    }
  }

  TEST_CASE("rank loss depends on labels only through their order") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      Batch b = random_batch(rng, 30, 3);
      const auto s = spec_of(ObjectiveKind::RANK);
      const double base = loss_of(s, b, b.p);
      for (double& v : b.y) v = std::exp(3.0 * v) + 1.0;  // strictly increasing map
      CHECK(loss_of(s, b, b.p) == base);
    }
  }

  TEST_CASE("objective spec validation") {
    ObjectiveSpec s;
    s.combo_alpha = 0.5;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.kind = ObjectiveKind::COMBO;
    CHECK_NOTHROW(s.validate());
    s.combo_alpha = 1.5;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.combo_alpha.reset();
    CHECK_THROWS_AS(s.validate(), ValidationError);
    CHECK(objective_from_string("combo") == ObjectiveKind::COMBO);
    CHECK_THROWS_AS(objective_from_string("huber"), ValidationError);
  }

  TEST_CASE("mse fit recovers the least-squares coefficient") {
    Rng rng(8);
    const auto cal = testing::make_calendar(10);
    const auto inst = testing::make_instruments(20);
    const Panel x1 = testing::random_panel(rng, cal, inst, -3, 5);
    const Panel x2 = testing::random_panel(rng, cal, inst, 0, 1);
    Panel y(cal, inst);
    for (std::size_t t = 0; t < 10; ++t)
      for (std::size_t i = 0; i < 20; ++i) y.at(t, i) = 2.0 * *x1.at(t, i);
    const FeatureMatrix m = build_feature_matrix({{"x1", &x1}, {"x2", &x2}}, y, span(0, 10));
    REQUIRE(m.rows() == 200);
    // closed-form OLS on the standardized design (intercept handled by centring)
    Eigen::MatrixXd z(200, 2);
    Eigen::VectorXd yc(200);
    double ym = 0.0;
    for (double v : m.y) ym += v / 200.0;
    for (std::size_t r = 0; r < 200; ++r) {
      for (std::size_t f = 0; f < 2; ++f) z(r, f) = (m.at(r, f) - m.stats.mean[f]) / m.stats.stdev[f];
      yc(r) = m.y[r] - ym;
    }
    const Eigen::VectorXd beta = (z.transpose() * z).ldlt().solve(z.transpose() * yc);
    FitConfig cfg;
    cfg.epochs = 2000;
    cfg.learning_rate = 0.2;
    const LinearModel model = fit(m, spec_of(ObjectiveKind::MSE), cfg);
    CHECK(std::fabs(model.weights[0] - beta(0)) < 1e-3);
    CHECK(std::fabs(model.weights[1] - beta(1)) < 1e-3);
    CHECK(model.bias == doctest::Approx(ym));
  }

  TEST_CASE("zero epochs leaves zero weights and the mean label") {
    Rng rng(9);
    const auto cal = testing::make_calendar(5);
    const auto inst = testing::make_instruments(5);
    const Panel x = testing::random_panel(rng, cal, inst, 0, 1);
    const Panel y = testing::random_panel(rng, cal, inst, -1, 1);
    const FeatureMatrix m = build_feature_matrix({{"x", &x}}, y, span(0, 5));
    FitConfig cfg;
    cfg.epochs = 0;
    const LinearModel model = fit(m, spec_of(ObjectiveKind::MSE), cfg);
    CHECK(model.weights == std::vector<double>{0.0});
    CHECK(model.bias == doctest::Approx(testing::tb_mean(m.y)).epsilon(1e-14));
    CHECK_THROWS_AS(fit(select_rows(m, span(0, 9)), spec_of(ObjectiveKind::MSE), cfg), ValidationError);
  }

  TEST_CASE("diverging descent reports the epoch") {
    Rng rng(10);
    const auto cal = testing::make_calendar(5);
    const auto inst = testing::make_instruments(5);
    const Panel x = testing::random_panel(rng, cal, inst, 0, 1);
    const Panel y = testing::random_panel(rng, cal, inst, -1, 1);
    const FeatureMatrix m = build_feature_matrix({{"x", &x}}, y, span(0, 5));
    FitConfig cfg;
    cfg.learning_rate = 1e6;
    cfg.epochs = 500;
    try {
      fit(m, spec_of(ObjectiveKind::MSE), cfg);
      FAIL("expected divergence");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }

  TEST_CASE("feature matrix drops rows with any missing cell") {
    const auto cal = testing::make_calendar(2);
    const auto inst = testing::make_instruments(3);
    Panel a(cal, inst), b(cal, inst), y(cal, inst);
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t i = 0; i < 3; ++i) {
        a.at(t, i) = 1.0 * i;
        b.at(t, i) = 2.0 * t;
        y.at(t, i) = 0.1;
      }
    a.at(0, 1).reset();
    y.at(1, 2).reset();
    const FeatureMatrix m = build_feature_matrix({{"a", &a}, {"b", &b}}, y, span(0, 2));
    CHECK(m.rows() == 4);
    for (double v : m.x) CHECK(std::isfinite(v));
  }

  TEST_CASE("ic fit on planted features generalizes") {
    const MarketBundle bundle = planted_bundle();
    const Panel y = forward_returns(bundle.market.bars, 1);
    std::vector<std::pair<std::string, const Panel*>> feats;
    for (int k = 0; k < 6; ++k) {
      const std::string name = "x" + std::to_string(k);
      feats.emplace_back(name, &bundle.market.fields.at(name));
    }
    const FeatureMatrix train = build_feature_matrix(feats, y, span(0, 300));
    FitConfig cfg;
    cfg.epochs = 200;
    const LinearModel model = fit(train, spec_of(ObjectiveKind::IC), cfg);
    std::map<std::string, Panel> panels;
    for (const auto& [n, p] : feats) panels.emplace(n, *p);
    const SignalFrame s = predict(model, panels, 301, 498);
    const auto ic = mean_ic(s, y);
    REQUIRE(ic);
    CHECK(*ic >= 0.05);
    CHECK(std::fabs(model.weights[0]) > std::fabs(model.weights[1]));
  }

  TEST_CASE("fit is deterministic given the seed") {
    const MarketBundle bundle = planted_bundle();
    const Panel y = forward_returns(bundle.market.bars, 1);
    const FeatureMatrix m = build_feature_matrix({{"x0", &bundle.market.fields.at("x0")}, {"x1", &bundle.market.fields.at("x1")}},
                                                 y, span(0, 100));
    FitConfig cfg;
    cfg.epochs = 30;
    cfg.row_subsample = 0.5;
    cfg.init_scale = 0.1;
    for (auto k : {ObjectiveKind::RANK, ObjectiveKind::COMBO, ObjectiveKind::IC}) {
      const LinearModel a = fit(m, spec_of(k), cfg);
      const LinearModel b = fit(m, spec_of(k), cfg);
      CHECK(a.weights == b.weights);
      CHECK(a.bias == b.bias);
      cfg.seed = 2;
      const LinearModel c = fit(m, spec_of(k), cfg);
      cfg.seed = 1;
      CHECK(c.weights != a.weights);
    }
  }

  TEST_CASE("prediction composes with the standardization") {
    Rng rng(12);
    const auto cal = testing::make_calendar(6);
    const auto inst = testing::make_instruments(4);
    const Panel f = testing::random_panel(rng, cal, inst, -1, 1, 0.2);
    LinearModel id;
    id.feature_names = {"f"};
    id.weights = {1.0};
    id.train_stats = {{0.0}, {1.0}};
    const SignalFrame s = predict(id, {{"f", f}}, 0, 5);
    CHECK(s == f);
    LinearModel zero = id;
    zero.weights = {0.0};
    zero.bias = 0.25;
    const SignalFrame z = predict(zero, {{"f", f}}, 0, 5);
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t i = 0; i < 4; ++i) CHECK(z.at(t, i) == (f.at(t, i) ? Cell(0.25) : Cell()));
    CHECK_THROWS_AS(predict(id, {{"g", f}}, 0, 5), ValidationError);
    const SignalFrame part = predict(id, {{"f", f}}, 2, 3);
    CHECK_FALSE(part.at(1, 0));
    CHECK_FALSE(part.at(4, 0));
  }

  TEST_CASE("prediction ignores bars after the span") {
    Rng rng(13);
    BarPanel bars = testing::random_bars(rng, 40, 5);
    const auto lib = factor::builtin_library();
    LinearModel m;
    for (const auto& f : lib)
      if (!factor::uses_graph(*f.expr)) {
        m.feature_names.push_back(f.name);
        m.weights.push_back(rng.normal());
        m.train_stats.mean.push_back(0.0);
        m.train_stats.stdev.push_back(1.0);
      }
    const SignalFrame a = predict(m, factor::DataView{&bars, nullptr, nullptr}, lib, 25, 30);
    for (Panel* p : {&bars.close, &bars.volume, &bars.high, &bars.low, &bars.open, &bars.vwap})
      for (std::size_t t = 31; t < 40; ++t)
        for (std::size_t i = 0; i < 5; ++i) p->at(t, i) = rng.uniform(1, 1000);
    const SignalFrame b = predict(m, factor::DataView{&bars, nullptr, nullptr}, lib, 25, 30);
    CHECK(a == b);
    CHECK(a.count_present() > 0);
  }

  TEST_CASE("model json round-trips") {
    LinearModel m;
    m.feature_names = {"a", "b"};
    m.weights = {0.1, -0.30000000000000004};
    m.bias = 1e-7;
    m.train_stats = {{1.0, 2.0}, {0.5, 3.0}};
    m.objective.kind = ObjectiveKind::COMBO;
    m.objective.combo_alpha = 0.25;
    const LinearModel back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
    CHECK(back.weights == m.weights);
    CHECK(back.bias == m.bias);
    CHECK(back.train_stats.stdev == m.train_stats.stdev);
    CHECK(back.objective.combo_alpha == 0.25);
    nlohmann::json bad = model_to_json(m);
    bad["weights"] = {1.0};
    CHECK_THROWS_AS(model_from_json(bad), DataError);
  }

  TEST_CASE("external signals") {
    const SignalFrame one = load_external_signal("date,instrument,score\n2020-01-02,A,1\n2020-01-03,A,2\n");
    CHECK(one.rows() == 2);
    CHECK(one.cols() == 1);
    const SignalFrame two = load_external_signal("date,instrument,score\n2020-01-02,A,1\n2020-01-02,B,2\n");
    CHECK(two.rows() == 1);
    CHECK(two.cols() == 2);
    CHECK_THROWS_AS(load_external_signal("date,instrument,score\n2020-01-02,A,1\n2020-01-02,A,2\n"), DataError);
    CHECK_THROWS_AS(load_external_signal("date,instrument,score\n2020-01-02,A\n"), DataError);
    const SignalFrame sparse = load_external_signal(
        "date,instrument,score\n2020-01-02,A,0.1\n2020-01-03,B,-2.5e-9\n2020-01-06,A,3\n");
    CHECK(load_external_signal(export_signal_csv(sparse)) == sparse);
  }

  TEST_CASE("reindex aligns onto other axes") {
    const SignalFrame s = load_external_signal("date,instrument,score\n2020-01-02,B,1\n");
    const auto cal = std::make_shared<const TradingCalendar>(std::vector<Date>{Date::parse("2020-01-02"), Date::parse("2020-01-03")});
    const auto inst = std::make_shared<const InstrumentSet>(std::vector<std::string>{"A", "B"});
    const Panel r = reindex(s, cal, inst);
    CHECK(r.at(0, 1) == 1.0);
    CHECK(r.count_present() == 1);
  }
}
