#include "gridmf/refinement.hpp"

#include <cmath>
#include <sstream>

namespace gridmf {

RefinementResult refine(const DetectionVerdict& verdict, const GridTopology& topology,
                        const MeasurementSet& snapshot, const RefinementOptions& options) {
  if (!(options.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (snapshot.time_index != verdict.time_index) {
    throw std::invalid_argument("snapshot time " + std::to_string(snapshot.time_index) +
                                " does not match the verdict (t" +
                                std::to_string(verdict.time_index) + ")");
  }

  RefinementResult result;
  for (BusId bus : verdict.suspects()) result.initial_suspects.insert(bus);
  std::set<BusId> suspects = result.initial_suspects;

  const int t = snapshot.time_index;
  while (true) {
    // Synchronous pass: decisions use the suspect set from the previous pass.
    std::map<BusId, BusId> clear_now;
    for (BusId bus : suspects) {
      const auto& bv = verdict.at(bus);
      const double reference = std::abs(bv.criteria.v_hat);
      const Phasor direct = voltage_at(snapshot, bus);
      std::optional<BusId> agreeing;
      bool all_agree = true;
      bool any_trusted = false;
      for (const auto& adj : topology.adjacency_of(bus)) {
        if (suspects.count(adj.neighbor)) continue;
        const auto flag = bv.element_flag(adj.neighbor, t);
        if (!flag) throw std::invalid_argument("verdict has no element for the snapshot time");
        if (*flag) continue;
        any_trusted = true;
        const Phasor via = *bv.element_value(adj.neighbor, t);
        if (std::abs(direct - via) / reference <= options.epsilon) {
          if (!agreeing) agreeing = adj.neighbor;
        } else {
          all_agree = false;
        }
      }
      const bool clear = options.rule == ClearingRule::any ? agreeing.has_value()
                                                           : any_trusted && all_agree;
      if (clear) clear_now[bus] = *agreeing;
    }
    if (clear_now.empty()) break;
    for (const auto& [bus, by] : clear_now) {
      suspects.erase(bus);
      result.cleared[bus] = by;
    }
    ++result.iterations;
  }

  result.final_suspects = suspects;
  for (BusId bus : suspects) {
    bool all_neighbors_suspect = true;
    for (const auto& adj : topology.adjacency_of(bus)) {
      if (!suspects.count(adj.neighbor)) all_neighbors_suspect = false;
    }
    if (all_neighbors_suspect) result.unresolved.insert(bus);
  }
  return result;
}

std::string write_refinement(const RefinementResult& result, const GridTopology& topology) {
  std::ostringstream out;
  out << "bus,stage1_suspect,stage2_suspect,cleared_by\n";
  for (const auto& bus : topology.buses()) {
    out << bus.id << ',' << result.initial_suspects.count(bus.id) << ','
        << result.final_suspects.count(bus.id) << ',';
    if (auto it = result.cleared.find(bus.id); it != result.cleared.end()) {
      out << it->second;
    } else {
      out << '-';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace gridmf
