// Stage-1 detector: neighbor voltage reconstruction, spatial (1D) and
// spatio-temporal (2D) median filtering, and the three anomaly criteria.
//
// For every bus i the filter sequence holds the direct measurement V_i and one
// reconstruction V_i(j) per neighbor j, computed only from data measured at j.
// The 2D sequence repeats this for the three snapshots t1..t3.

#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridmf/grid.hpp"
#include "gridmf/measurement.hpp"

namespace gridmf {

enum class ReconstructionForm {
  /// V_i(j) = V_j + Z_ij (V_j Y_ij / 2 - I_ji); exact for pi-model data.
  pi_model,
  /// V_i(j) = (V_j Y_ij / 2 - I_ji) Z_ij, kept for comparison only; it drops
  /// the V_j term and does not reproduce V_i even on clean data.
  printed,
};

/// How a median is selected from complex values. Both rules return an input
/// element; ties go to the lowest index.
enum class MedianRule {
  /// Element whose magnitude is the median magnitude (lower median for even counts).
  magnitude,
  /// Element minimizing the summed distance to all other elements.
  vector,
};

struct MfElement {
  Phasor value;
  /// Neighbor the value was reconstructed from; empty for the direct measurement.
  std::optional<BusId> via;
  int time_index = 0;

  bool direct() const noexcept { return !via.has_value(); }
};

struct MfSequence {
  BusId bus = 0;
  std::vector<MfElement> elements;

  std::vector<Phasor> values() const;
};

struct NodeCriteria {
  double kappa_v = 0.0;
  double kappa_i_direct = 0.0;
  double kappa_i_calc = 0.0;
  Phasor v_hat;
};

class DegenerateReferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Phasor reconstruct_voltage(const Branch& branch, Phasor v_neighbor, Phasor i_from_neighbor,
                           ReconstructionForm form = ReconstructionForm::pi_model);

/// Element with the median magnitude of an odd, non-empty list.
/// Throws std::invalid_argument for even or empty input.
Phasor median_phasor(std::span<const Phasor> values);

/// Index of the median under `rule`; accepts any non-empty list.
std::size_t median_index(std::span<const Phasor> values, MedianRule rule);

/// Direct measurement first, then one reconstruction per neighbor in
/// ascending neighbor id. Throws MissingMeasurementError.
MfSequence build_sequence_1d(const GridTopology& topology, const MeasurementSet& snapshot, BusId bus,
                             ReconstructionForm form = ReconstructionForm::pi_model);

/// Concatenation of the 1D sequences at t1, t2, t3: 3 (1 + degree) elements.
/// Throws std::invalid_argument unless exactly three snapshots are given.
MfSequence build_sequence_2d(const GridTopology& topology, std::span<const MeasurementSet> snapshots,
                             BusId bus, ReconstructionForm form = ReconstructionForm::pi_model);

/// v_hat = median of the sequence and kappa_v = max_n |V_i(n) - v_hat| / |v_hat|.
/// Throws DegenerateReferenceError when |v_hat| < 1e-6 pu.
NodeCriteria kappa_v(const MfSequence& sequence, MedianRule rule = MedianRule::vector);

/// |sum of measured sending-end currents - measured injection|.
double kappa_i_direct(const GridTopology& topology, const MeasurementSet& snapshot, BusId bus);

/// Same balance with every branch current recomputed from measured voltages.
double kappa_i_calc(const GridTopology& topology, const MeasurementSet& snapshot, BusId bus);

enum class FilterMode { one_d, two_d };

struct CriteriaSelection {
  bool voltage = true;
  bool direct_current = false;
  bool calculated_current = false;

  bool any() const noexcept { return voltage || direct_current || calculated_current; }
};

struct Thresholds {
  double voltage = 0.05;
  double current = 0.05;
};

struct DetectionOptions {
  Thresholds thresholds;
  FilterMode mode = FilterMode::two_d;
  CriteriaSelection criteria;
  MedianRule median = MedianRule::vector;
  ReconstructionForm form = ReconstructionForm::pi_model;
};

struct BusVerdict {
  BusId bus = 0;
  NodeCriteria criteria;
  MfSequence sequence;
  /// Parallel to sequence.elements: |V_i(n) - v_hat| / |v_hat| > voltage threshold.
  std::vector<bool> element_flags;
  bool voltage_flag = false;
  bool direct_current_flag = false;
  bool calculated_current_flag = false;
  /// Any enabled criterion above its threshold.
  bool suspect = false;

  /// Flag of the reconstruction via `neighbor` at `time_index`, if present.
  std::optional<bool> element_flag(std::optional<BusId> via, int time_index) const;
  std::optional<Phasor> element_value(std::optional<BusId> via, int time_index) const;
};

struct DetectionVerdict {
  std::vector<BusVerdict> buses;
  DetectionOptions options;
  /// Snapshot used for the current criteria (the latest one).
  int time_index = 0;

  const BusVerdict& at(BusId bus) const;
  std::vector<BusId> suspects() const;
};

/// Runs the enabled criteria on every bus. 1D filters the latest snapshot;
/// 2D requires exactly three. Current criteria always use the latest snapshot.
DetectionVerdict detect(const GridTopology& topology, std::span<const MeasurementSet> snapshots,
                        const DetectionOptions& options);

/// Table `bus,kappa_v,kappa_i,kappa_i_calc,suspect,flagged_elements`. Flagged
/// elements are written as `direct@t3` or `via2@t3`, joined by ';', or `-`.
std::string write_verdict(const DetectionVerdict& verdict);

}  // namespace gridmf
