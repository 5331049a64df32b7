// Stealthy false-data-injection attacks a = H c.

#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "gridmf/estimation.hpp"
#include "gridmf/rng.hpp"

namespace gridmf {

struct AttackSpec {
  /// Empty means "no attack".
  std::set<BusId> target_buses;
  /// Bounds on |c_i| in pu; the phase of each c_i is uniform in [0, 2pi).
  double magnitude_low = 0.05;
  double magnitude_high = 0.5;
};

struct AttackInstance {
  /// State perturbation, one entry per bus, zero outside the targets.
  std::map<BusId, Phasor> c;
  /// Measurement perturbation in layout order; equals H c.
  ComplexVector a;
  /// Layout rows with |a_k| > touch_floor.
  std::set<std::size_t> touched;
  std::set<BusId> attacked_buses;

  static constexpr double touch_floor = 1e-12;

  bool active() const noexcept { return !attacked_buses.empty(); }
};

enum class AttackRequest { allow_empty, active };

/// Uniformly chosen target set with a size drawn uniformly from [min_count, max_count].
std::set<BusId> choose_targets(const GridTopology& topology, int min_count, int max_count, Rng& rng);

/// Draws c on the target buses and returns a = H c with its touched rows.
/// Throws std::invalid_argument for an empty target set when `request` is
/// active and for bad magnitude bounds; UnknownBusError for unknown targets.
AttackInstance make_attack(const ComplexMatrix& h, const GridTopology& topology,
                           const AttackSpec& spec, Rng& rng,
                           AttackRequest request = AttackRequest::allow_empty);

/// Builds the instance for a given state perturbation (for replay).
AttackInstance attack_from_shift(const ComplexMatrix& h, const GridTopology& topology,
                                 const std::map<BusId, Phasor>& c);

/// z_a = z + a on the layout rows. Throws LayoutError when sizes disagree.
MeasurementSet apply_attack(const MeasurementSet& z, const AttackInstance& instance,
                            const MeasurementLayout& layout);

/// True iff the chi-square statistics of z and z + a agree to within
/// `tolerance` and the test verdict at `alpha` is the same for both.
bool verify_stealth(const ComplexMatrix& h, const Weights& weights, const ComplexVector& z,
                    const ComplexVector& a, double alpha, double tolerance = 1e-9);

inline bool verify_stealth(const ComplexMatrix& h, const Weights& weights, const ComplexVector& z,
                           const AttackInstance& instance, double alpha) {
  return verify_stealth(h, weights, z, instance.a, alpha);
}

/// Tabular text `bus,c_re,c_im`, one row per attacked bus.
std::string write_attack(const AttackInstance& instance);
std::map<BusId, Phasor> read_attack(std::string_view text);

}  // namespace gridmf
