#include "gridmf/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace gridmf {

std::vector<Phasor> MfSequence::values() const {
  std::vector<Phasor> out;
  out.reserve(elements.size());
  for (const auto& e : elements) out.push_back(e.value);
  return out;
}

Phasor reconstruct_voltage(const Branch& branch, Phasor v_neighbor, Phasor i_from_neighbor,
                           ReconstructionForm form) {
  const Phasor drop = (v_neighbor * branch.half_shunt() - i_from_neighbor) * branch.z_series;
  return form == ReconstructionForm::pi_model ? v_neighbor + drop : drop;
}

namespace {

std::size_t magnitude_median_index(std::span<const Phasor> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(values[a]) < std::abs(values[b]);
  });
  const double target = std::abs(values[order[(values.size() - 1) / 2]]);
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (std::abs(values[k]) == target) return k;
  }
  return order[(values.size() - 1) / 2];
}

std::size_t vector_median_index(std::span<const Phasor> values) {
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) {
    double cost = 0.0;
    for (const auto& v : values) cost += std::abs(values[i] - v);
    if (cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  return best;
}

std::vector<MeasurementSet> by_time(std::span<const MeasurementSet> snapshots) {
  std::vector<MeasurementSet> sorted(snapshots.begin(), snapshots.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.time_index < b.time_index;
  });
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    if (sorted[k].time_index == sorted[k - 1].time_index) {
      throw std::invalid_argument("snapshots share time index " +
                                  std::to_string(sorted[k].time_index));
    }
  }
  return sorted;
}

}  // namespace

Phasor median_phasor(std::span<const Phasor> values) {
  if (values.empty() || values.size() % 2 == 0) {
    throw std::invalid_argument("median_phasor needs an odd, non-empty list");
  }
  return values[magnitude_median_index(values)];
}

std::size_t median_index(std::span<const Phasor> values, MedianRule rule) {
  if (values.empty()) throw std::invalid_argument("median of an empty list");
  return rule == MedianRule::magnitude ? magnitude_median_index(values)
                                       : vector_median_index(values);
}

MfSequence build_sequence_1d(const GridTopology& topology, const MeasurementSet& snapshot, BusId bus,
                             ReconstructionForm form) {
  MfSequence seq;
  seq.bus = bus;
  seq.elements.push_back({voltage_at(snapshot, bus), std::nullopt, snapshot.time_index});
  for (const auto& adj : topology.adjacency_of(bus)) {
    const Phasor v_j = voltage_at(snapshot, adj.neighbor);
    const Phasor i_ji = current_at(snapshot, adj.neighbor, bus);
    seq.elements.push_back(
        {reconstruct_voltage(adj.branch, v_j, i_ji, form), adj.neighbor, snapshot.time_index});
  }
  return seq;
}

MfSequence build_sequence_2d(const GridTopology& topology, std::span<const MeasurementSet> snapshots,
                             BusId bus, ReconstructionForm form) {
  if (snapshots.size() != 3) {
    throw std::invalid_argument("2D filtering needs exactly 3 snapshots, got " +
                                std::to_string(snapshots.size()));
  }
  MfSequence seq;
  seq.bus = bus;
  for (const auto& snap : by_time(snapshots)) {
    auto part = build_sequence_1d(topology, snap, bus, form);
    seq.elements.insert(seq.elements.end(), part.elements.begin(), part.elements.end());
  }
  return seq;
}

NodeCriteria kappa_v(const MfSequence& sequence, MedianRule rule) {
  if (sequence.elements.empty()) throw std::invalid_argument("empty filter sequence");
  const auto values = sequence.values();
  NodeCriteria out;
  out.v_hat = values[median_index(values, rule)];
  const double reference = std::abs(out.v_hat);
  if (reference < 1e-6) {
    throw DegenerateReferenceError("median voltage at bus " + std::to_string(sequence.bus) +
                                   " is ~0 pu");
  }
  for (const auto& v : values) out.kappa_v = std::max(out.kappa_v, std::abs(v - out.v_hat) / reference);
  return out;
}

double kappa_i_direct(const GridTopology& topology, const MeasurementSet& snapshot, BusId bus) {
  Phasor balance = -injection_at(snapshot, bus);
  for (const auto& adj : topology.adjacency_of(bus)) balance += current_at(snapshot, bus, adj.neighbor);
  return std::abs(balance);
}

double kappa_i_calc(const GridTopology& topology, const MeasurementSet& snapshot, BusId bus) {
  const Phasor v_i = voltage_at(snapshot, bus);
  Phasor balance = -injection_at(snapshot, bus);
  for (const auto& adj : topology.adjacency_of(bus)) {
    const Phasor v_n = voltage_at(snapshot, adj.neighbor);
    balance += (v_i - v_n) / adj.branch.z_series + v_i * adj.branch.half_shunt();
  }
  return std::abs(balance);
}

std::optional<bool> BusVerdict::element_flag(std::optional<BusId> via, int time_index) const {
  for (std::size_t k = 0; k < sequence.elements.size(); ++k) {
    const auto& e = sequence.elements[k];
    if (e.via == via && e.time_index == time_index) return element_flags[k];
  }
  return std::nullopt;
}

std::optional<Phasor> BusVerdict::element_value(std::optional<BusId> via, int time_index) const {
  for (const auto& e : sequence.elements) {
    if (e.via == via && e.time_index == time_index) return e.value;
  }
  return std::nullopt;
}

const BusVerdict& DetectionVerdict::at(BusId bus) const {
  for (const auto& b : buses) {
    if (b.bus == bus) return b;
  }
  throw UnknownBusError(bus);
}

std::vector<BusId> DetectionVerdict::suspects() const {
  std::vector<BusId> out;
  for (const auto& b : buses) {
    if (b.suspect) out.push_back(b.bus);
  }
  return out;
}

DetectionVerdict detect(const GridTopology& topology, std::span<const MeasurementSet> snapshots,
                        const DetectionOptions& options) {
  if (snapshots.empty()) throw std::invalid_argument("detect needs at least one snapshot");
  if (options.mode == FilterMode::two_d && snapshots.size() != 3) {
    throw std::invalid_argument("2D mode needs exactly 3 snapshots");
  }
  if (!(options.thresholds.voltage > 0.0) || !(options.thresholds.current > 0.0)) {
    throw std::invalid_argument("thresholds must be > 0");
  }
  const auto ordered = by_time(snapshots);
  const MeasurementSet& latest = ordered.back();

  DetectionVerdict verdict;
  verdict.options = options;
  verdict.time_index = latest.time_index;
  for (const auto& bus : topology.buses()) {
    BusVerdict bv;
    bv.bus = bus.id;
    bv.sequence = options.mode == FilterMode::two_d
                      ? build_sequence_2d(topology, ordered, bus.id, options.form)
                      : build_sequence_1d(topology, latest, bus.id, options.form);
    bv.criteria = kappa_v(bv.sequence, options.median);
    bv.criteria.kappa_i_direct = kappa_i_direct(topology, latest, bus.id);
    bv.criteria.kappa_i_calc = kappa_i_calc(topology, latest, bus.id);

    const double reference = std::abs(bv.criteria.v_hat);
    for (const auto& e : bv.sequence.elements) {
      bv.element_flags.push_back(std::abs(e.value - bv.criteria.v_hat) / reference >
                                 options.thresholds.voltage);
    }
    bv.voltage_flag = bv.criteria.kappa_v > options.thresholds.voltage;
    bv.direct_current_flag = bv.criteria.kappa_i_direct > options.thresholds.current;
    bv.calculated_current_flag = bv.criteria.kappa_i_calc > options.thresholds.current;
    const auto& sel = options.criteria;
    bv.suspect = (sel.voltage && bv.voltage_flag) || (sel.direct_current && bv.direct_current_flag) ||
                 (sel.calculated_current && bv.calculated_current_flag);
    verdict.buses.push_back(std::move(bv));
  }
  return verdict;
}

std::string write_verdict(const DetectionVerdict& verdict) {
  std::ostringstream out;
  out.precision(10);
  out << "bus,kappa_v,kappa_i,kappa_i_calc,suspect,flagged_elements\n";
  for (const auto& b : verdict.buses) {
    out << b.bus << ',' << b.criteria.kappa_v << ',' << b.criteria.kappa_i_direct << ','
        << b.criteria.kappa_i_calc << ',' << (b.suspect ? 1 : 0) << ',';
    std::string flagged;
    for (std::size_t k = 0; k < b.sequence.elements.size(); ++k) {
      if (!b.element_flags[k]) continue;
      const auto& e = b.sequence.elements[k];
      if (!flagged.empty()) flagged += ';';
      flagged += e.via ? "via" + std::to_string(*e.via) : std::string("direct");
      flagged += "@t" + std::to_string(e.time_index);
    }
    out << (flagged.empty() ? "-" : flagged) << '\n';
  }
  return out.str();
}

}  // namespace gridmf
