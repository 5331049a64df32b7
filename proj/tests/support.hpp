#pragma once

#include <cmath>
#include <random>

#include "gridmf/grid.hpp"
#include "gridmf/measurement.hpp"
#include "gridmf/rng.hpp"

namespace gridmf::test {

// Three buses in a triangle (or a path when `ring` is false) with random
// but physically plausible parameters.
inline GridTopology random_three_bus(Rng& rng, bool ring = true) {
  std::uniform_real_distribution<double> r(0.005, 0.02);
  std::uniform_real_distribution<double> x(0.03, 0.1);
  std::uniform_real_distribution<double> b(0.0, 0.04);
  GridDescription d;
  d.buses = {{1, "a"}, {2, "b"}, {3, "c"}};
  auto branch = [&](BusId f, BusId t) { return Branch{f, t, {r(rng), x(rng)}, {0.0, b(rng)}}; };
  d.branches = {branch(1, 2), branch(2, 3)};
  if (ring) d.branches.push_back(branch(3, 1));
  return GridTopology(std::move(d));
}

// Two-bus line used by the hand-computed examples.
inline GridTopology two_bus(Phasor z = {0.01, 0.05}, double b = 0.02) {
  GridDescription d;
  d.buses = {{1, ""}, {2, ""}};
  d.branches = {{1, 2, z, {0.0, b}}};
  return GridTopology(std::move(d));
}

inline TrueState flat_state(const GridTopology& topology, Phasor v = 1.0) {
  TrueState s;
  for (const auto& bus : topology.buses()) s.voltages[bus.id] = v;
  return s;
}

}  // namespace gridmf::test
