#include <doctest.h>

#include <Eigen/Dense>
#include <numbers>

#include "gridmf/measurement.hpp"
#include "support.hpp"

using namespace gridmf;

namespace {

// Nodal admittance matrix assembled entry by entry, independent of the
// per-branch current code.
Eigen::MatrixXcd ybus(const GridTopology& g) {
  const auto n = static_cast<Eigen::Index>(g.bus_count());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : g.branches()) {
    const auto i = static_cast<Eigen::Index>(g.column_of(br.from));
    const auto j = static_cast<Eigen::Index>(g.column_of(br.to));
    const Phasor ys = 1.0 / br.z_series;
    y(i, i) += ys + br.y_shunt_total / 2.0;
    y(j, j) += ys + br.y_shunt_total / 2.0;
    y(i, j) -= ys;
    y(j, i) -= ys;
  }
  return y;
}

}  // namespace

TEST_CASE("hand-computed branch current") {
  // Z = 0.01 + j0.05, Y = j0.02, V1 = 1, V2 = 0.98 - j0.02.
  const auto g = test::two_bus();
  TrueState s;
  s.voltages = {{1, {1.0, 0.0}}, {2, {0.98, -0.02}}};
  const Phasor expected = Phasor(0.02, 0.02) / Phasor(0.01, 0.05) + Phasor(0.0, 0.01);
  CHECK(std::abs(branch_current(s, 1, g.branches()[0]) - expected) < 1e-14);
  // (0.02 + j0.02) / (0.01 + j0.05) = (0.0012 - j0.0008) / 0.0026
  CHECK(std::abs(expected - Phasor(0.0012 / 0.0026, -0.0008 / 0.0026 + 0.01)) < 1e-12);
}

TEST_CASE("injections match the nodal admittance matrix") {
  Rng rng = make_rng(11);
  const auto g = default7_grid();
  const auto y = ybus(g);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = synthesize_true_state(g, 0.1, rng);
    Eigen::VectorXcd v(g.bus_count());
    for (const auto& bus : g.buses()) v(static_cast<Eigen::Index>(g.column_of(bus.id))) = s.voltages.at(bus.id);
    const Eigen::VectorXcd inj = y * v;
    for (const auto& bus : g.buses()) {
      CHECK(std::abs(injection_current(g, s, bus.id) - inj(static_cast<Eigen::Index>(g.column_of(bus.id)))) <
            1e-12);
    }
  }
}

TEST_CASE("KCL closes on exact measurements") {
  Rng rng = make_rng(12);
  const auto g = default7_grid();
  const auto m = exact_measurements(g, synthesize_true_state(g, 0.05, rng), 1);
  for (const auto& bus : g.buses()) {
    Phasor sum = 0.0;
    for (const auto& a : g.adjacency_of(bus.id)) sum += current_at(m, bus.id, a.neighbor);
    CHECK(std::abs(sum - injection_at(m, bus.id)) < 1e-12);
  }
}

TEST_CASE("lossless line without charging carries equal and opposite end currents") {
  const auto g = test::two_bus({0.0, 0.1}, 0.0);
  TrueState s;
  s.voltages = {{1, {1.0, 0.0}}, {2, std::polar(1.0, -0.1)}};
  const auto& br = g.branches()[0];
  CHECK(std::abs(branch_current(s, 1, br) + branch_current(s, 2, br)) < 1e-14);
}

TEST_CASE("measurement set completeness") {
  const auto g = default7_grid();
  const auto m = exact_measurements(g, test::flat_state(g), 1);
  CHECK(m.bus_voltages.size() == 7);
  CHECK(m.injection_currents.size() == 7);
  CHECK(m.branch_currents.size() == 16);
  CHECK_NOTHROW(require_complete(g, m));

  auto broken = m;
  broken.branch_currents.erase({4, 1});
  CHECK_THROWS_AS(require_complete(g, broken), MissingMeasurementError);
  CHECK_THROWS_AS(current_at(broken, 4, 1), MissingMeasurementError);
  CHECK_THROWS_AS(voltage_at(m, 9), MissingMeasurementError);
}

TEST_CASE("flat state has no flows") {
  const auto g = test::two_bus({0.01, 0.05}, 0.0);
  const auto m = exact_measurements(g, test::flat_state(g), 1);
  CHECK(std::abs(current_at(m, 1, 2)) < 1e-15);
  CHECK(std::abs(injection_at(m, 2)) < 1e-15);
}

TEST_CASE("zero variation gives the flat profile") {
  Rng rng = make_rng(1);
  const auto g = default7_grid();
  const auto s = synthesize_true_state(g, 0.0, rng);
  for (const auto& [bus, v] : s.voltages) CHECK(v == Phasor(1.0, 0.0));
}

TEST_CASE("generated states stay in the sanity band") {
  Rng rng = make_rng(2);
  const auto g = default7_grid();
  for (int k = 0; k < 200; ++k) {
    const auto series = synthesize_state_series(g, 0.3, 0.5, rng);
    for (const auto& s : series) {
      CHECK(s.voltages.size() == 7);
      for (const auto& [bus, v] : s.voltages) {
        CHECK(std::abs(v) > 0.5);
        CHECK(std::abs(v) < 1.5);
      }
    }
  }
}

TEST_CASE("noise statistics") {
  const auto g = default7_grid();
  const auto state = test::flat_state(g);
  const double sigma = 0.01;
  Rng rng = make_rng(3);
  const auto exact = exact_measurements(g, state, 1);
  double sum_abs = 0.0;
  double sum = 0.0;
  long count = 0;
  for (int k = 0; k < 2000; ++k) {
    const auto m = snapshot(g, state, NoiseModel(sigma), 1, rng);
    for (const auto& [bus, v] : m.bus_voltages) {
      const Phasor e = v - exact.bus_voltages.at(bus);
      sum_abs += std::abs(e.real()) + std::abs(e.imag());
      sum += e.real() + e.imag();
      count += 2;
    }
  }
  // E|N(0, sigma)| = sigma sqrt(2 / pi)
  const double folded = sigma * std::sqrt(2.0 / std::numbers::pi);
  CHECK(sum_abs / static_cast<double>(count) == doctest::Approx(folded).epsilon(0.02));
  CHECK(std::abs(sum / static_cast<double>(count)) < 4.0 * sigma / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("zero noise reproduces exact measurements") {
  Rng rng = make_rng(4);
  const auto g = default7_grid();
  const auto s = synthesize_true_state(g, 0.05, rng);
  CHECK(snapshot(g, s, NoiseModel(0.0), 2, rng) == exact_measurements(g, s, 2));
}

TEST_CASE("noise model rejects negative sigma") { CHECK_THROWS_AS(NoiseModel(-0.1), std::invalid_argument); }

TEST_CASE("time series indexing and determinism") {
  const auto g = default7_grid();
  auto run = [&](std::uint64_t seed) {
    Rng rng = make_rng(seed);
    const auto states = synthesize_state_series(g, 0.05, 0.1, rng);
    return time_series(g, states, NoiseModel(), rng);
  };
  const auto a = run(5);
  const auto b = run(5);
  const auto c = run(6);
  CHECK(a[0].time_index == 1);
  CHECK(a[2].time_index == 3);
  CHECK(a == b);
  CHECK_FALSE(a[0] == c[0]);

  Rng rng = make_rng(0);
  std::vector<TrueState> two(2, test::flat_state(g));
  CHECK_THROWS_AS(time_series(g, two, NoiseModel(), rng), std::invalid_argument);
}

TEST_CASE("drift stays within the spread") {
  Rng rng = make_rng(9);
  const auto g = default7_grid();
  const auto base = synthesize_true_state(g, 0.05, rng);
  const auto moved = drift_state(base, 0.01, rng);
  for (const auto& [bus, v] : moved.voltages) {
    const Phasor b = base.voltages.at(bus);
    CHECK(std::abs(std::abs(v) - std::abs(b)) <= 0.01 + 1e-15);
    CHECK(std::abs(std::arg(v) - std::arg(b)) <= 0.01 + 1e-12);
  }
}

TEST_CASE("measurement csv round trip") {
  const auto g = default7_grid();
  Rng rng = make_rng(10);
  const auto states = synthesize_state_series(g, 0.05, 0.1, rng);
  const auto snaps = time_series(g, states, NoiseModel(), rng);
  const auto text = write_measurements(snaps);
  CHECK(text.rfind("time,kind,bus,neighbor,re,im\n", 0) == 0);
  const auto back = read_measurements(text);
  REQUIRE(back.size() == 3);
  for (int k = 0; k < 3; ++k) CHECK(back[static_cast<std::size_t>(k)] == snaps[static_cast<std::size_t>(k)]);
}

TEST_CASE("measurement csv errors") {
  CHECK_THROWS_AS(read_measurements("bad header\n"), ParseError);
  CHECK_THROWS_AS(read_measurements("time,kind,bus,neighbor,re,im\n1,X,1,-,1,0\n"), ParseError);
  CHECK_THROWS_AS(read_measurements("time,kind,bus,neighbor,re,im\n1,V,1,-,1\n"), ParseError);
  CHECK_THROWS_AS(read_measurements("time,kind,bus,neighbor,re,im\n1,V,1,-,abc,0\n"), ParseError);
  CHECK_THROWS_AS(read_measurements("time,kind,bus,neighbor,re,im\n1,V,1,-,1,0\n1,V,1,-,1,0\n"), ParseError);
  try {
    read_measurements("time,kind,bus,neighbor,re,im\n1,V,1,-,1,0\n1,Q,1,-,1,0\n");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}
