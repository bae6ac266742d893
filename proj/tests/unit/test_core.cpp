#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "qf/csv.hpp"
#include "qf/date.hpp"
#include "qf/error.hpp"
#include "qf/panel.hpp"
#include "qf/parallel.hpp"
#include "qf/random.hpp"
#include "qf/stats.hpp"
#include "support/oracles.hpp"

using namespace qf;

TEST_SUITE("core") {
  TEST_CASE("dates parse, print and step over weekends") {
    const Date d = Date::parse("2020-02-28");
    CHECK(d.to_string() == "2020-02-28");
    CHECK(Date::from_ymd(1970, 1, 1).days() == 0);
    CHECK(Date::parse("2020-03-01").days() - d.days() == 2);
    CHECK(d.weekday() == 4);  // Friday
    CHECK(d.next_business_day().to_string() == "2020-03-02");
    CHECK_THROWS_AS(Date::parse("2020-2-28"), DataError);
    CHECK_THROWS_AS(Date::parse("2020-02-30"), DataError);
    CHECK_THROWS_AS(Date::parse("2020-02-28x"), DataError);
    Date out;
    CHECK_FALSE(Date::try_parse("", out));
  }

  TEST_CASE("calendar rejects unsorted or duplicate dates") {
    CHECK_THROWS(TradingCalendar({}));
    CHECK_THROWS(TradingCalendar({Date(3), Date(3)}));
    CHECK_THROWS(TradingCalendar({Date(4), Date(3)}));
    const TradingCalendar c({Date(1), Date(3), Date(7)});
    CHECK(c.index_of(Date(3)) == 1u);
    CHECK_FALSE(c.index_of(Date(4)));
    CHECK(c.upper_index(Date(0)) == 0u);
    CHECK(c.upper_index(Date(3)) == 2u);
    CHECK(c.upper_index(Date(100)) == 3u);
  }

  TEST_CASE("instrument set rejects duplicates") {
    CHECK_THROWS(InstrumentSet({"A", "A"}));
    const InstrumentSet s({"B", "A"});
    CHECK(s.index_of("A") == 1u);
    CHECK_FALSE(s.index_of("C"));
  }

  TEST_CASE("non-finite values become missing") {
    CHECK_FALSE(finite_or_missing(std::nan("")));
    CHECK_FALSE(finite_or_missing(INFINITY));
    CHECK(finite_or_missing(1.5) == 1.5);
  }

  TEST_CASE("doubles round-trip through text") {
    Rng rng(5);
    for (int k = 0; k < 1000; ++k) {
      const double v = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.below(80)) - 40);
      double back = 0.0;
      REQUIRE(csv::parse_double(csv::format_double(v), back));
      CHECK(back == v);
    }
    double x;
    CHECK_FALSE(csv::parse_double("1.5abc", x));
    CHECK_FALSE(csv::parse_double("nan", x));
    CHECK_FALSE(csv::parse_double("", x));
  }

  TEST_CASE("csv split and lines") {
    const auto f = csv::split("a,,b");
    REQUIRE(f.size() == 3);
    CHECK(f[1].empty());
    const auto l = csv::lines("x\r\ny\n");
    REQUIRE(l.size() >= 2);
    CHECK(l[0] == "x");
    CHECK(l[1] == "y");
  }

  TEST_CASE("rng is reproducible and streams differ") {
    Rng a(42, 3), b(42, 3), c(42, 4);
    bool differs = false;
    for (int k = 0; k < 100; ++k) {
      const auto x = a.next_u64();
      CHECK(x == b.next_u64());
      differs |= x != c.next_u64();
    }
    CHECK(differs);
    Rng r(1);
    for (int k = 0; k < 1000; ++k) {
      const auto v = r.below(7);
      CHECK(v < 7u);
      const double u = r.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
  }

  TEST_CASE("normal variates have unit moments") {
    Rng r(9);
    std::vector<double> v(200000);
    for (auto& x : v) x = r.normal();
    CHECK(std::fabs(testing::tb_mean(v)) < 0.01);
    CHECK(std::fabs(testing::tb_pop_std(v) - 1.0) < 0.01);
  }

  TEST_CASE("stats match textbook formulas") {
    Rng r(11);
    for (int k = 0; k < 50; ++k) {
      const std::size_t n = 3 + r.below(30);
      std::vector<double> x(n), y(n);
      for (std::size_t j = 0; j < n; ++j) {
        x[j] = std::round(r.uniform(-5, 5));  // integer values exercise ties
        y[j] = r.uniform(-1, 1) + 0.3 * x[j];
      }
      CHECK(stats::mean(x) == doctest::Approx(testing::tb_mean(x)).epsilon(1e-14));
      CHECK(stats::population_std(x) == doctest::Approx(testing::tb_pop_std(x)).epsilon(1e-12));
      CHECK(*stats::sample_std(x) == doctest::Approx(*testing::tb_sample_std(x)).epsilon(1e-12));
      const auto c = stats::pearson(x, y);
      const auto tc = testing::tb_corr(x, y);
      REQUIRE(c.has_value() == tc.has_value());
      if (c) CHECK(std::fabs(*c - *tc) < 1e-12);
      CHECK(stats::average_ranks(x) == testing::tb_ranks(x));
    }
    const std::vector<double> flat{2, 2, 2};
    CHECK(stats::population_std(flat) == 0.0);
    CHECK(*stats::sample_std(flat) == 0.0);
    CHECK_FALSE(stats::pearson(flat, std::vector<double>{1, 2, 3}));
    CHECK_FALSE(stats::sample_std(std::vector<double>{1.0}));
  }

  TEST_CASE("parallel_for fills every slot and rethrows the lowest failure") {
    std::vector<int> out(100, 0);
    parallel_for(out.size(), 4, [&](std::size_t k) { out[k] = static_cast<int>(k) * 2; });
    for (std::size_t k = 0; k < out.size(); ++k) CHECK(out[k] == static_cast<int>(k) * 2);
    try {
      parallel_for(50, 4, [&](std::size_t k) {
        if (k == 7 || k == 30) throw std::runtime_error("fail " + std::to_string(k));
      });
      FAIL("expected a throw");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "fail 7");
    }
    parallel_for(0, 3, [](std::size_t) { FAIL("no items"); });
  }
}
