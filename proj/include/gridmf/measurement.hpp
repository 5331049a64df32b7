// Ground-truth operating states and synthetic PMU snapshots.

#pragma once

#include <array>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridmf/grid.hpp"
#include "gridmf/rng.hpp"

namespace gridmf {

struct TrueState {
  std::map<BusId, Phasor> voltages;
};

/// Key of a branch-end current: (sending bus, receiving bus). I_ij is measured
/// at bus i and is the current leaving i into the branch towards j.
using BranchEnd = std::pair<BusId, BusId>;

struct MeasurementSet {
  int time_index = 0;
  std::map<BusId, Phasor> bus_voltages;
  std::map<BranchEnd, Phasor> branch_currents;
  std::map<BusId, Phasor> injection_currents;

  bool operator==(const MeasurementSet&) const = default;
};

class MissingMeasurementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Phasor voltage_at(const MeasurementSet& set, BusId bus);
Phasor current_at(const MeasurementSet& set, BusId from, BusId to);
Phasor injection_at(const MeasurementSet& set, BusId bus);

/// Independent Gaussian noise on the real and imaginary part of every value.
class NoiseModel {
 public:
  NoiseModel() = default;
  explicit NoiseModel(double sigma);
  double sigma() const noexcept { return sigma_; }

 private:
  double sigma_ = 0.002;
};

/// Magnitudes uniform in [1 - variation, 1 + variation] pu, angles uniform in
/// [-variation, +variation] rad.
TrueState synthesize_true_state(const GridTopology& topology, double variation, Rng& rng);

/// Re-draws every magnitude and angle uniformly within +-spread of `base`.
TrueState drift_state(const TrueState& base, double spread, Rng& rng);

/// States for t1..t3: t1 from synthesize_true_state, t2 and t3 drifted around
/// t1 by drift_fraction * variation.
std::array<TrueState, 3> synthesize_state_series(const GridTopology& topology, double variation,
                                                 double drift_fraction, Rng& rng);

/// Sending-end pi-model current: (V_from - V_to) / Z + V_from * Y / 2.
Phasor branch_current(const TrueState& state, BusId from_bus, const Branch& branch);

inline Phasor branch_current(const GridTopology&, const TrueState& state, BusId from_bus,
                             const Branch& branch) {
  return branch_current(state, from_bus, branch);
}

/// Net current leaving the bus into the network (sum of incident sending-end currents).
Phasor injection_current(const GridTopology& topology, const TrueState& state, BusId bus);

/// Noise-free measurement set for a state.
MeasurementSet exact_measurements(const GridTopology& topology, const TrueState& state,
                                  int time_index);

MeasurementSet snapshot(const GridTopology& topology, const TrueState& state,
                        const NoiseModel& noise, int time_index, Rng& rng);

/// One snapshot per state, time indices 1..3. Throws std::invalid_argument
/// unless exactly three states are given.
std::array<MeasurementSet, 3> time_series(const GridTopology& topology,
                                          std::span<const TrueState> states,
                                          const NoiseModel& noise, Rng& rng);

/// Throws MissingMeasurementError when a voltage, injection or branch-end
/// current required by the topology is absent.
void require_complete(const GridTopology& topology, const MeasurementSet& set);

/// Tabular text: header `time,kind,bus,neighbor,re,im`; kind is V, I or J and
/// neighbor is `-` except for branch currents.
std::string write_measurements(std::span<const MeasurementSet> sets);

/// Inverse of write_measurements, sets ordered by ascending time index.
/// Throws ParseError with the offending line.
std::vector<MeasurementSet> read_measurements(std::string_view text);

}  // namespace gridmf
