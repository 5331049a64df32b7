// Stage-2 false-alarm reduction.
//
// A suspect bus is compared with reconstructions from trusted neighbors: a
// neighbor is trusted when its own bus is not suspect and its reconstruction
// of the suspect bus was not flagged at stage 1. If the direct measurement
// agrees with a trusted reconstruction to within epsilon (relative to the
// stage-1 median), the bus is cleared. Cleared buses become trusted in the
// next pass. Medians are not recomputed between passes.

#pragma once

#include <map>
#include <set>
#include <string>

#include "gridmf/detection.hpp"

namespace gridmf {

enum class ClearingRule {
  /// Clear when any trusted reconstruction agrees.
  any,
  /// Clear only when every trusted reconstruction agrees.
  all,
};

struct RefinementOptions {
  double epsilon = 0.05;
  ClearingRule rule = ClearingRule::any;
};

struct RefinementResult {
  std::set<BusId> initial_suspects;
  std::set<BusId> final_suspects;
  /// Cleared bus -> trusted neighbor whose reconstruction cleared it.
  std::map<BusId, BusId> cleared;
  /// Passes that cleared at least one bus.
  int iterations = 0;
  /// Final suspects with every neighbor suspect at termination.
  std::set<BusId> unresolved;
};

/// Throws std::invalid_argument when epsilon <= 0 or when the snapshot is
/// not the one the verdict's current criteria were computed on.
RefinementResult refine(const DetectionVerdict& verdict, const GridTopology& topology,
                        const MeasurementSet& snapshot, const RefinementOptions& options = {});

/// Table `bus,stage1_suspect,stage2_suspect,cleared_by` (cleared_by is `-`
/// when the bus was not cleared).
std::string write_refinement(const RefinementResult& result, const GridTopology& topology);

}  // namespace gridmf
