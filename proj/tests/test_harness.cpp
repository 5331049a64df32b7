#include <doctest.h>

#include <cmath>

#include "gridmf/harness.hpp"

using namespace gridmf;

namespace {

TrialConfig small(int trials = 60) {
  TrialConfig c;
  c.trials = trials;
  c.criteria = {true, true, true};
  return c;
}

bool same(const BusOutcome& a, const BusOutcome& b) {
  return a.bus == b.bus && a.voltage_attacked == b.voltage_attacked && a.kappa_v_2d == b.kappa_v_2d &&
         a.kappa_i == b.kappa_i && a.flag_2d == b.flag_2d && a.predicted == b.predicted;
}

}  // namespace

TEST_CASE("config validation") {
  TrialConfig c;
  CHECK_NOTHROW(c.validate());
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.thresholds.voltage = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.epsilon = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.min_targets = 3;
  c.max_targets = 2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("trials are deterministic and stealthy") {
  const auto c = small();
  const auto ctx = TrialContext::make(c);
  for (int k = 0; k < 20; ++k) {
    const auto a = run_trial(c, ctx, k);
    const auto b = run_trial(c, ctx, k);
    CHECK(a.stealth_verified);
    CHECK(a.attack_active);
    REQUIRE(a.buses.size() == 7);
    for (std::size_t i = 0; i < a.buses.size(); ++i) CHECK(same(a.buses[i], b.buses[i]));
  }
  const auto x = run_trial(c, ctx, 1);
  const auto y = run_trial(c, ctx, 2);
  CHECK(x.buses[0].kappa_v_2d != y.buses[0].kappa_v_2d);
}

TEST_CASE("clean noiseless system raises nothing") {
  auto c = small(20);
  c.attack_enabled = false;
  c.sigma = 0.0;
  c.refine = true;
  for (int k = 0; k < c.trials; ++k) {
    const auto t = run_trial(c, k);
    CHECK_FALSE(t.attack_active);
    for (const auto& b : t.buses) {
      CHECK_FALSE(b.voltage_attacked);
      CHECK_FALSE(b.predicted);
      CHECK_FALSE(b.stage1);
    }
  }
}

TEST_CASE("truth labels follow the attack") {
  const auto c = small();
  for (int k = 0; k < 30; ++k) {
    const auto t = run_trial(c, k);
    int attacked = 0;
    for (const auto& b : t.buses) attacked += b.voltage_attacked;
    CHECK(attacked >= 1);
    CHECK(attacked <= 3);
  }
}

TEST_CASE("confusion percentages") {
  ColumnStats col{"x", "X", {}};
  col.per_bus[1] = {9, 1, 18, 2};
  col.per_bus[2] = {1, 0, 0, 0};
  const auto s = col.summary();
  CHECK(s.detected_attacks_pct.aggregate == doctest::Approx(100.0 * 10 / 11));
  CHECK(s.detected_attacks_pct.min == doctest::Approx(90.0));
  CHECK(s.detected_attacks_pct.max == doctest::Approx(100.0));
  CHECK(s.detected_attacks_pct.aggregate + s.not_detected_pct.aggregate == doctest::Approx(100.0));
  CHECK(s.false_alarms_pct.aggregate == doctest::Approx(10.0));
  // Bus 2 has no clean measurements, so it does not enter the clean ranges.
  CHECK(s.false_alarms_pct.min == doctest::Approx(10.0));
  CHECK(s.attacked_measurements.aggregate == 11);

  ColumnStats empty{"e", "E", {}};
  empty.per_bus[1] = {0, 0, 5, 0};
  CHECK(std::isnan(empty.summary().detected_attacks_pct.aggregate));
}

TEST_CASE("montecarlo does not depend on the thread count") {
  auto c = small(40);
  c.refine = true;
  const auto one = report(run_montecarlo(c), ReportFormat::csv);
  c.threads = 3;
  CHECK(report(run_montecarlo(c), ReportFormat::csv) == one);
}

TEST_CASE("statistics csv round trip") {
  auto c = small(40);
  c.refine = true;
  const auto stats = run_montecarlo(c);
  CHECK(stats.trials == 40);
  CHECK(stats.column("pipeline").aggregate().attacked() > 0);
  CHECK_THROWS(stats.column("nope"));
  const auto csv = report(stats, ReportFormat::csv);
  CHECK(csv.rfind("metric,aggregate,min,max\n", 0) == 0);
  const auto back = read_stats_csv(csv);
  CHECK(report(back, ReportFormat::csv) == csv);
  CHECK(report(back, ReportFormat::table) == report(stats, ReportFormat::table));
  CHECK_THROWS_AS(read_stats_csv("metric,aggregate,min,max\nbogus\n"), ParseError);
}

TEST_CASE("report format names") {
  CHECK(parse_report_format("table") == ReportFormat::table);
  CHECK(parse_report_format("csv") == ReportFormat::csv);
  CHECK_THROWS_AS(parse_report_format("xml"), std::invalid_argument);
}

TEST_CASE("table layout") {
  const auto text = report(run_montecarlo(small(10)), ReportFormat::table);
  CHECK(text.find("Detected attacks, %") != std::string::npos);
  CHECK(text.find("False alarms, %") != std::string::npos);
  CHECK(text.find("2D MF") != std::string::npos);
}
