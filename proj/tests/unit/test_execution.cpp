#include <doctest.h>

#include <Eigen/Dense>

#include "qf/error.hpp"
#include "qf/execution.hpp"
#include "qf/random.hpp"
#include "support/oracles.hpp"

using namespace qf;

using testing::from_holdings;
using testing::numerical_minimizer;

TEST_SUITE("execution") {
  TEST_CASE("twap is uniform and flat-path shortfall is exact") {
    const ExecutionSchedule s = twap(1000, 4, 1.0);
    CHECK(s.slices == std::vector<double>{250, 250, 250, 250});
    CHECK(s.holdings == std::vector<double>{1000, 750, 500, 250, 0});
    CHECK(s.times.back() == 4.0);
    const std::vector<double> flat(5, 50.0);
    const ExecutionResult r = simulate_execution(s, flat, ImpactModel{0.5, 0.0});
    CHECK(r.shortfall == 125000.0);
    CHECK(r.temporary_cost == 125000.0);
    CHECK(r.avg_fill == 175.0);
  }

  TEST_CASE("flat-path twap shortfall equals eta X^2 / (N tau)") {
    Rng rng(1);
    for (int k = 0; k < 50; ++k) {
      const double X = std::round(rng.uniform(1, 1e5)), eta = rng.uniform(1e-4, 1.0), tau = rng.uniform(0.1, 5.0);
      const std::size_t N = 1 + rng.below(50);
      const std::vector<double> flat(N + 1, rng.uniform(1, 100));
      const auto r = simulate_execution(twap(X, N, tau), flat, ImpactModel{eta, 0.0});
      CHECK(testing::close_rel(r.shortfall, eta * X * X / (static_cast<double>(N) * tau), 1e-12));
    }
  }

  TEST_CASE("risk-neutral trajectory is exactly uniform") {
    const ExecutionSchedule s = ac_trajectory(1200, 6, AcParams{0.0, 0.1, 0.3, 1.0, 0.0});
    CHECK(s.slices == twap(1200, 6, 1.0).slices);
    const ExecutionSchedule z = ac_trajectory(1200, 6, AcParams{1.0, 0.1, 0.0, 1.0, 0.0});
    CHECK(z.slices == twap(1200, 6, 1.0).slices);
  }

  TEST_CASE("risk-averse trajectories sell strictly faster early") {
    Rng rng(2);
    for (int k = 0; k < 50; ++k) {
      AcParams p{rng.uniform(1e-6, 1e-2), rng.uniform(0.01, 1.0), rng.uniform(0.1, 2.0), rng.uniform(0.2, 2.0), 0.0};
      const std::size_t N = 2 + rng.below(30);
      const ExecutionSchedule s = ac_trajectory(1e4, N, p);
      CHECK_NOTHROW(s.validate());
      for (std::size_t j = 1; j < N; ++j) CHECK(s.slices[j] < s.slices[j - 1]);
      CHECK(s.holdings.front() == 1e4);
      CHECK(s.holdings.back() == 0.0);
    }
  }

  TEST_CASE("trajectory matches the numerical minimizer of the discrete cost") {
    const AcParams p{2e-6, 0.05, 0.95, 1.0, 0.01};
    const double X = 1e6;
    const std::size_t N = 10;
    const ExecutionSchedule s = ac_trajectory(X, N, p);
    const std::vector<double> x = numerical_minimizer(X, N, p);
    for (std::size_t j = 0; j < N; ++j) {
      const double nj = x[j] - x[j + 1];
      CHECK(std::fabs(s.slices[j] - nj) <= 0.005 * std::fabs(nj));
    }
    CHECK(ac_objective(s, p) <= ac_objective(twap(X, N, 1.0), p));
  }

  TEST_CASE("overflowing trajectories are reported") {
    CHECK_THROWS_AS(ac_trajectory(1e6, 1000, AcParams{10.0, 1e-3, 5.0, 1.0, 0.0}), NumericError);
    CHECK_THROWS_AS(ac_trajectory(1e6, 10, AcParams{1.0, 0.01, 1.0, 1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(twap(100, 0, 1.0), ValidationError);
  }

  TEST_CASE("shortfall is linear in the mid path") {
    Rng rng(3);
    const ExecutionSchedule s = ac_trajectory(5000, 8, AcParams{1e-4, 0.1, 0.5, 1.0, 0.0});
    std::vector<double> a(9), b(9), sum(9);
    for (std::size_t j = 0; j < 9; ++j) {
      a[j] = rng.uniform(50, 60);
      b[j] = rng.uniform(50, 60);
      sum[j] = a[j] + b[j];
    }
    const ImpactModel none{0.0, 0.0};
    const double ra = simulate_execution(s, a, none).shortfall, rb = simulate_execution(s, b, none).shortfall;
    CHECK(simulate_execution(s, sum, none).shortfall == doctest::Approx(ra + rb).epsilon(1e-12));
  }

  TEST_CASE("monte carlo shortfall moments match the cost model") {
    const double X = 1000, tau = 1.0, sigma = 0.5;
    const ImpactModel impact{0.05, 0.002};
    const ExecutionSchedule s = ac_trajectory(X, 5, AcParams{1e-3, impact.eta_temp, sigma, tau, impact.gamma_perm});
    double expected = 0.0, bought = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      expected += s.slices[j] * (impact.eta_temp * s.slices[j] / tau + impact.gamma_perm * bought);
      bought += s.slices[j];
      var += sigma * sigma * tau * s.holdings[j] * s.holdings[j];
    }
    Rng rng(4);
    const int paths = 20000;
    std::vector<double> sf(paths);
    for (int k = 0; k < paths; ++k) {
      std::vector<double> mid(6, 100.0);
      for (std::size_t j = 1; j < 6; ++j) mid[j] = mid[j - 1] + sigma * std::sqrt(tau) * rng.normal();
      sf[k] = simulate_execution(s, mid, impact).shortfall;
    }
    const double m = testing::tb_mean(sf), sd = *testing::tb_sample_std(sf);
    CHECK(std::fabs(m - expected) < 4.0 * std::sqrt(var / paths));
    CHECK(std::fabs(sd * sd / var - 1.0) < 0.05);
  }

  TEST_CASE("schedule validation") {
    ExecutionSchedule s = twap(100, 2, 1.0);
    s.slices = {120, -20};
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.slices = {50, 40};
    CHECK_THROWS_AS(s.validate(), ValidationError);
    const std::vector<double> short_path{1.0, 1.0};
    CHECK_THROWS_AS(simulate_execution(twap(100, 2, 1.0), short_path, ImpactModel{}), ValidationError);
  }
}
