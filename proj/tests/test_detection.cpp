#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "gridmf/attack.hpp"
#include "gridmf/detection.hpp"
#include "support.hpp"

using namespace gridmf;

namespace {

// Sort-based oracle: lowest-index element among those of median magnitude.
std::size_t sorted_median(const std::vector<Phasor>& v) {
  std::vector<double> mags;
  for (const auto& x : v) mags.push_back(std::abs(x));
  std::sort(mags.begin(), mags.end());
  const double m = mags[(mags.size() - 1) / 2];
  std::size_t k = 0;
  while (std::abs(v[k]) != m) ++k;
  return k;
}

// Path 2 - 1 - 3 without charging, flat state, bus 1 reading `v1`.
struct Worked {
  GridTopology g = [] {
    GridDescription d;
    d.buses = {{1, ""}, {2, ""}, {3, ""}};
    d.branches = {{1, 2, {0.01, 0.05}, {0.0, 0.0}}, {1, 3, {0.02, 0.08}, {0.0, 0.0}}};
    return GridTopology(std::move(d));
  }();

  MeasurementSet snapshot(Phasor v1) const {
    auto m = exact_measurements(g, test::flat_state(g), 1);
    m.bus_voltages[1] = v1;
    return m;
  }
};

}  // namespace

TEST_CASE("median of odd lists") {
  const std::vector<Phasor> v{{1.5, 0.0}, {1.0, 0.0}, {1.0, 0.0}};
  CHECK(median_phasor(v) == Phasor(1.0, 0.0));
  const std::vector<Phasor> one{{0.3, 0.4}};
  CHECK(median_phasor(one) == Phasor(0.3, 0.4));
  CHECK_THROWS_AS(median_phasor(std::vector<Phasor>{}), std::invalid_argument);
  CHECK_THROWS_AS(median_phasor(std::vector<Phasor>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("median agrees with a sort oracle") {
  Rng rng = make_rng(41);
  std::uniform_int_distribution<int> len(1, 6);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int k = 0; k < 500; ++k) {
    std::vector<Phasor> v(static_cast<std::size_t>(2 * len(rng) - 1));
    // Coarse values so that ties occur often.
    for (auto& x : v) x = std::polar(0.5 + 0.25 * coarse(rng), 0.3 * coarse(rng));
    const auto expect = sorted_median(v);
    CHECK(median_index(v, MedianRule::magnitude) == expect);
    CHECK(median_phasor(v) == v[expect]);
  }
}

TEST_CASE("even lists use the lower median") {
  const std::vector<Phasor> v{{4.0, 0.0}, {1.0, 0.0}, {3.0, 0.0}, {2.0, 0.0}};
  CHECK(median_index(v, MedianRule::magnitude) == 3);
}

TEST_CASE("vector median") {
  const std::vector<Phasor> v{{1.5, 0.0}, {1.0, 0.0}, {1.0, 0.0}};
  CHECK(median_index(v, MedianRule::vector) == 1);
  // Same magnitudes, one outlier by angle: the magnitude rule cannot see it.
  const std::vector<Phasor> w{std::polar(1.0, 0.4), std::polar(1.0, 0.0), std::polar(1.0, 0.01)};
  CHECK(median_index(w, MedianRule::vector) != 0);
  CHECK(median_index(w, MedianRule::magnitude) == 0);
}

TEST_CASE("pi-model reconstruction inverts the branch current") {
  Rng rng = make_rng(42);
  const auto g = default7_grid();
  const auto s = synthesize_true_state(g, 0.1, rng);
  const auto m = exact_measurements(g, s, 1);
  for (const auto& br : g.branches()) {
    const Phasor rec = reconstruct_voltage(br, voltage_at(m, br.to), current_at(m, br.to, br.from));
    CHECK(std::abs(rec - s.voltages.at(br.from)) < 1e-12);
    const Phasor rec2 = reconstruct_voltage(br, voltage_at(m, br.from), current_at(m, br.from, br.to));
    CHECK(std::abs(rec2 - s.voltages.at(br.to)) < 1e-12);
    const Phasor printed = reconstruct_voltage(br, voltage_at(m, br.to), current_at(m, br.to, br.from),
                                               ReconstructionForm::printed);
    CHECK(std::abs(printed - s.voltages.at(br.from)) > 0.5);
  }
}

TEST_CASE("sequence construction") {
  Rng rng = make_rng(43);
  const auto g = default7_grid();
  const auto states = synthesize_state_series(g, 0.05, 0.1, rng);
  const auto snaps = time_series(g, states, NoiseModel(), rng);

  const auto s1 = build_sequence_1d(g, snaps[2], 4);
  REQUIRE(s1.elements.size() == 4);
  CHECK(s1.elements[0].direct());
  CHECK(s1.elements[0].value == voltage_at(snaps[2], 4));
  CHECK(*s1.elements[1].via == 1);
  CHECK(*s1.elements[2].via == 3);
  CHECK(*s1.elements[3].via == 5);

  const auto s2 = build_sequence_2d(g, snaps, 2);
  REQUIRE(s2.elements.size() == 9);
  CHECK(s2.elements[0].time_index == 1);
  CHECK(s2.elements[8].time_index == 3);

  // Input order does not matter.
  std::array<MeasurementSet, 3> shuffled{snaps[2], snaps[0], snaps[1]};
  const auto s3 = build_sequence_2d(g, shuffled, 2);
  for (std::size_t k = 0; k < 9; ++k) CHECK(s3.elements[k].value == s2.elements[k].value);

  CHECK_THROWS_AS(build_sequence_2d(g, std::span(snaps).first(2), 2), std::invalid_argument);
  std::array<MeasurementSet, 3> dup{snaps[0], snaps[0], snaps[1]};
  CHECK_THROWS_AS(build_sequence_2d(g, dup, 2), std::invalid_argument);
}

TEST_CASE("worked example: one corrupted reading among two consistent neighbors") {
  Worked w;
  const auto snap = w.snapshot({1.5, 0.0});
  const auto seq = build_sequence_1d(w.g, snap, 1);
  REQUIRE(seq.elements.size() == 3);
  CHECK(std::abs(seq.elements[1].value - 1.0) < 1e-14);
  CHECK(std::abs(seq.elements[2].value - 1.0) < 1e-14);

  for (auto rule : {MedianRule::magnitude, MedianRule::vector}) {
    const auto c = kappa_v(seq, rule);
    CHECK(std::abs(c.v_hat - 1.0) < 1e-14);
    CHECK(c.kappa_v == doctest::Approx(0.5).epsilon(1e-12));
  }

  DetectionOptions opt;
  opt.mode = FilterMode::one_d;
  const auto verdict = detect(w.g, std::span(&snap, 1), opt);
  const auto& b1 = verdict.at(1);
  CHECK(b1.suspect);
  CHECK(b1.element_flags[0]);
  CHECK_FALSE(b1.element_flags[1]);
  CHECK(*b1.element_flag(std::nullopt, 1));
}

TEST_CASE("kappa_v is invariant under a common rotation") {
  Rng rng = make_rng(44);
  std::uniform_real_distribution<double> ang(-3.0, 3.0);
  for (int k = 0; k < 100; ++k) {
    MfSequence seq;
    for (int n = 0; n < 5; ++n) seq.elements.push_back({std::polar(1.0 + 0.1 * ang(rng), 0.2 * ang(rng)), {}, 1});
    MfSequence rotated = seq;
    const Phasor r = std::polar(1.0, ang(rng));
    for (auto& e : rotated.elements) e.value *= r;
    for (auto rule : {MedianRule::magnitude, MedianRule::vector}) {
      CHECK(kappa_v(seq, rule).kappa_v == doctest::Approx(kappa_v(rotated, rule).kappa_v).epsilon(1e-9));
    }
  }
}

TEST_CASE("degenerate reference") {
  MfSequence seq;
  seq.elements = {{0.0, {}, 1}, {0.0, 2, 1}, {1.0, 3, 1}};
  CHECK_THROWS_AS(kappa_v(seq, MedianRule::magnitude), DegenerateReferenceError);
}

TEST_CASE("current criteria on a hand-built imbalance") {
  Worked w;
  auto snap = w.snapshot(1.0);
  CHECK(kappa_i_direct(w.g, snap, 1) < 1e-14);
  CHECK(kappa_i_calc(w.g, snap, 1) < 1e-14);
  snap.branch_currents[{1, 2}] += Phasor(0.0, 0.3);
  CHECK(kappa_i_direct(w.g, snap, 1) == doctest::Approx(0.3));
  CHECK(kappa_i_calc(w.g, snap, 1) < 1e-14);
  snap.bus_voltages[2] = {1.01, 0.0};
  // 0.01 / (0.01 + j0.05) pu flows from 2 into bus 1.
  CHECK(kappa_i_calc(w.g, snap, 1) == doctest::Approx(std::abs(0.01 / Phasor(0.01, 0.05))));
}

TEST_CASE("noiseless clean data gives zero criteria everywhere") {
  Rng rng = make_rng(45);
  const auto g = default7_grid();
  for (int k = 0; k < 20; ++k) {
    const auto s = synthesize_true_state(g, 0.05, rng);
    const std::array<TrueState, 3> states{s, s, s};
    const auto snaps = time_series(g, states, NoiseModel(0.0), rng);
    DetectionOptions opt;
    opt.criteria = {true, true, true};
    const auto verdict = detect(g, snaps, opt);
    CHECK(verdict.suspects().empty());
    for (const auto& b : verdict.buses) {
      CHECK(b.criteria.kappa_v < 1e-10);
      CHECK(b.criteria.kappa_i_direct < 1e-10);
      CHECK(b.criteria.kappa_i_calc < 1e-10);
    }
  }
}

TEST_CASE("a stealthy attack is invisible to 1D and visible to 2D") {
  Rng rng = make_rng(46);
  const auto g = default7_grid();
  const auto layout = MeasurementLayout::make(g, LayoutKind::ohmic);
  const auto h = build_h(g, layout);
  const auto states = synthesize_state_series(g, 0.05, 0.1, rng);
  auto snaps = time_series(g, states, NoiseModel(0.0), rng);
  const auto atk = attack_from_shift(h, g, {{5, {0.2, -0.1}}});
  snaps[2] = apply_attack(snaps[2], atk, layout);

  DetectionOptions one;
  one.mode = FilterMode::one_d;
  CHECK(detect(g, std::span(snaps).last(1), one).suspects().empty());

  DetectionOptions two;
  two.criteria = {true, true, true};
  const auto v = detect(g, snaps, two);
  CHECK(v.at(5).voltage_flag);
  CHECK_FALSE(v.at(4).voltage_flag);
  CHECK_FALSE(v.at(6).voltage_flag);
  // The injections are untouched, so the balance at the target breaks.
  CHECK(v.at(5).direct_current_flag);
  CHECK(v.at(5).calculated_current_flag);
  CHECK(v.time_index == 3);
}

TEST_CASE("verdict serialization") {
  Worked w;
  const auto snap = w.snapshot({1.5, 0.0});
  DetectionOptions opt;
  opt.mode = FilterMode::one_d;
  const auto text = write_verdict(detect(w.g, std::span(&snap, 1), opt));
  CHECK(text.rfind("bus,kappa_v,kappa_i,kappa_i_calc,suspect,flagged_elements\n", 0) == 0);
  CHECK(text.find("\n1,0.5") != std::string::npos);
  CHECK(text.find(",1,direct@t1") != std::string::npos);
  const auto clean = w.snapshot(1.0);
  const auto quiet = write_verdict(detect(w.g, std::span(&clean, 1), opt));
  CHECK(quiet.find("\n1,") != std::string::npos);
  CHECK(quiet.find(",0,-\n") != std::string::npos);
  CHECK(quiet.find(",1,") == std::string::npos);
}
