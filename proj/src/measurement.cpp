#include "gridmf/measurement.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace gridmf {

namespace {

Phasor add_noise(Phasor value, std::normal_distribution<double>& gauss, Rng& rng, double sigma) {
  if (sigma == 0.0) return value;
  const double re = gauss(rng);
  const double im = gauss(rng);
  return {value.real() + sigma * re, value.imag() + sigma * im};
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(line_no, std::string("bad ") + what + " '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

Phasor voltage_at(const MeasurementSet& set, BusId bus) {
  auto it = set.bus_voltages.find(bus);
  if (it == set.bus_voltages.end()) {
    throw MissingMeasurementError("missing voltage at bus " + std::to_string(bus));
  }
  return it->second;
}

Phasor current_at(const MeasurementSet& set, BusId from, BusId to) {
  auto it = set.branch_currents.find({from, to});
  if (it == set.branch_currents.end()) {
    throw MissingMeasurementError("missing current " + std::to_string(from) + "->" +
                                  std::to_string(to));
  }
  return it->second;
}

Phasor injection_at(const MeasurementSet& set, BusId bus) {
  auto it = set.injection_currents.find(bus);
  if (it == set.injection_currents.end()) {
    throw MissingMeasurementError("missing injection at bus " + std::to_string(bus));
  }
  return it->second;
}

NoiseModel::NoiseModel(double sigma) : sigma_(sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("noise sigma must be finite and >= 0");
  }
}

TrueState synthesize_true_state(const GridTopology& topology, double variation, Rng& rng) {
  if (!(variation >= 0.0)) throw std::invalid_argument("variation must be >= 0");
  TrueState state;
  if (variation == 0.0) {
    for (const auto& bus : topology.buses()) state.voltages[bus.id] = {1.0, 0.0};
    return state;
  }
  std::uniform_real_distribution<double> offset(-variation, variation);
  for (const auto& bus : topology.buses()) {
    const double magnitude = 1.0 + offset(rng);
    const double angle = offset(rng);
    state.voltages[bus.id] = std::polar(magnitude, angle);
  }
  return state;
}

TrueState drift_state(const TrueState& base, double spread, Rng& rng) {
  if (!(spread >= 0.0)) throw std::invalid_argument("drift spread must be >= 0");
  if (spread == 0.0) return base;
  std::uniform_real_distribution<double> offset(-spread, spread);
  TrueState next;
  for (const auto& [bus, v] : base.voltages) {
    const double magnitude = std::abs(v) + offset(rng);
    const double angle = std::arg(v) + offset(rng);
    next.voltages[bus] = std::polar(magnitude, angle);
  }
  return next;
}

std::array<TrueState, 3> synthesize_state_series(const GridTopology& topology, double variation,
                                                 double drift_fraction, Rng& rng) {
  if (!(drift_fraction >= 0.0)) throw std::invalid_argument("drift fraction must be >= 0");
  std::array<TrueState, 3> states;
  states[0] = synthesize_true_state(topology, variation, rng);
  const double spread = drift_fraction * variation;
  states[1] = drift_state(states[0], spread, rng);
  states[2] = drift_state(states[0], spread, rng);
  return states;
}

Phasor branch_current(const TrueState& state, BusId from_bus, const Branch& branch) {
  if (!branch.incident_to(from_bus)) {
    throw std::invalid_argument("branch not incident to bus " + std::to_string(from_bus));
  }
  const Phasor v_from = state.voltages.at(from_bus);
  const Phasor v_to = state.voltages.at(branch.other_end(from_bus));
  return (v_from - v_to) / branch.z_series + v_from * branch.half_shunt();
}

Phasor injection_current(const GridTopology& topology, const TrueState& state, BusId bus) {
  Phasor total{};
  for (const auto& adj : topology.adjacency_of(bus)) total += branch_current(state, bus, adj.branch);
  return total;
}

MeasurementSet exact_measurements(const GridTopology& topology, const TrueState& state,
                                  int time_index) {
  MeasurementSet set;
  set.time_index = time_index;
  for (const auto& bus : topology.buses()) set.bus_voltages[bus.id] = state.voltages.at(bus.id);
  for (const auto& b : topology.branches()) {
    set.branch_currents[{b.from, b.to}] = branch_current(state, b.from, b);
    set.branch_currents[{b.to, b.from}] = branch_current(state, b.to, b);
  }
  for (const auto& bus : topology.buses()) {
    set.injection_currents[bus.id] = injection_current(topology, state, bus.id);
  }
  return set;
}

MeasurementSet snapshot(const GridTopology& topology, const TrueState& state,
                        const NoiseModel& noise, int time_index, Rng& rng) {
  MeasurementSet set = exact_measurements(topology, state, time_index);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma = noise.sigma();
  // Map iteration order fixes the draw order: voltages, currents, injections.
  for (auto& [bus, v] : set.bus_voltages) v = add_noise(v, gauss, rng, sigma);
  for (auto& [end, i] : set.branch_currents) i = add_noise(i, gauss, rng, sigma);
  for (auto& [bus, j] : set.injection_currents) j = add_noise(j, gauss, rng, sigma);
  return set;
}

std::array<MeasurementSet, 3> time_series(const GridTopology& topology,
                                          std::span<const TrueState> states,
                                          const NoiseModel& noise, Rng& rng) {
  if (states.size() != 3) {
    throw std::invalid_argument("time_series needs exactly 3 states, got " +
                                std::to_string(states.size()));
  }
  std::array<MeasurementSet, 3> out;
  for (int t = 0; t < 3; ++t) out[t] = snapshot(topology, states[t], noise, t + 1, rng);
  return out;
}

void require_complete(const GridTopology& topology, const MeasurementSet& set) {
  for (const auto& bus : topology.buses()) {
    voltage_at(set, bus.id);
    injection_at(set, bus.id);
  }
  for (const auto& b : topology.branches()) {
    current_at(set, b.from, b.to);
    current_at(set, b.to, b.from);
  }
}

std::string write_measurements(std::span<const MeasurementSet> sets) {
  std::ostringstream out;
  out.precision(17);
  out << "time,kind,bus,neighbor,re,im\n";
  for (const auto& set : sets) {
    for (const auto& [bus, v] : set.bus_voltages) {
      out << set.time_index << ",V," << bus << ",-," << v.real() << ',' << v.imag() << '\n';
    }
    for (const auto& [end, i] : set.branch_currents) {
      out << set.time_index << ",I," << end.first << ',' << end.second << ',' << i.real() << ','
          << i.imag() << '\n';
    }
    for (const auto& [bus, j] : set.injection_currents) {
      out << set.time_index << ",J," << bus << ",-," << j.real() << ',' << j.imag() << '\n';
    }
  }
  return out.str();
}

std::vector<MeasurementSet> read_measurements(std::string_view text) {
  std::map<int, MeasurementSet> by_time;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header_seen = false;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "time,kind,bus,neighbor,re,im") throw ParseError(line_no, "bad header");
      header_seen = true;
      continue;
    }
    auto f = split_csv(line);
    if (f.size() != 6) throw ParseError(line_no, "expected 6 fields");
    const int time = parse_number<int>(f[0], line_no, "time");
    const BusId bus = parse_number<int>(f[2], line_no, "bus");
    const Phasor value{parse_number<double>(f[4], line_no, "re"),
                       parse_number<double>(f[5], line_no, "im")};
    if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
      throw ParseError(line_no, "non-finite value");
    }
    auto& set = by_time[time];
    set.time_index = time;
    if (f[1] == "V" || f[1] == "J") {
      if (f[3] != "-") throw ParseError(line_no, "neighbor must be '-' for kind " + std::string(f[1]));
      auto& target = f[1] == "V" ? set.bus_voltages : set.injection_currents;
      if (!target.emplace(bus, value).second) throw ParseError(line_no, "duplicate row");
    } else if (f[1] == "I") {
      const BusId neighbor = parse_number<int>(f[3], line_no, "neighbor");
      if (!set.branch_currents.emplace(BranchEnd{bus, neighbor}, value).second) {
        throw ParseError(line_no, "duplicate row");
      }
    } else {
      throw ParseError(line_no, "unknown kind '" + std::string(f[1]) + "'");
    }
  }
  if (!header_seen) throw ParseError(line_no == 0 ? 1 : line_no, "empty measurement file");
  std::vector<MeasurementSet> sets;
  for (auto& [t, set] : by_time) sets.push_back(std::move(set));
  return sets;
}

}  // namespace gridmf
