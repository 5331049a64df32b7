#include "gridmf/attack.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace gridmf {

std::set<BusId> choose_targets(const GridTopology& topology, int min_count, int max_count,
                               Rng& rng) {
  const int n = static_cast<int>(topology.bus_count());
  if (min_count < 0 || max_count < min_count || max_count > n) {
    throw std::invalid_argument("target count range must satisfy 0 <= min <= max <= bus count");
  }
  std::uniform_int_distribution<int> count_dist(min_count, max_count);
  const int count = count_dist(rng);
  // Partial Fisher-Yates over the bus list.
  std::vector<BusId> ids;
  for (const auto& bus : topology.buses()) ids.push_back(bus.id);
  std::set<BusId> targets;
  for (int k = 0; k < count; ++k) {
    std::uniform_int_distribution<int> pick(k, n - 1);
    std::swap(ids[static_cast<std::size_t>(k)], ids[static_cast<std::size_t>(pick(rng))]);
    targets.insert(ids[static_cast<std::size_t>(k)]);
  }
  return targets;
}

AttackInstance attack_from_shift(const ComplexMatrix& h, const GridTopology& topology,
                                 const std::map<BusId, Phasor>& c) {
  if (static_cast<std::size_t>(h.cols()) != topology.bus_count()) {
    throw LayoutError("H column count does not match topology");
  }
  AttackInstance inst;
  for (const auto& bus : topology.buses()) inst.c[bus.id] = Phasor{};
  for (const auto& [bus, shift] : c) {
    if (!topology.has_bus(bus)) throw UnknownBusError(bus);
    inst.c[bus] = shift;
    if (shift != Phasor{}) inst.attacked_buses.insert(bus);
  }
  inst.a = h * state_vector(topology, inst.c);
  for (Eigen::Index k = 0; k < inst.a.size(); ++k) {
    if (std::abs(inst.a(k)) > AttackInstance::touch_floor) {
      inst.touched.insert(static_cast<std::size_t>(k));
    }
  }
  return inst;
}

AttackInstance make_attack(const ComplexMatrix& h, const GridTopology& topology,
                           const AttackSpec& spec, Rng& rng, AttackRequest request) {
  if (spec.target_buses.empty() && request == AttackRequest::active) {
    throw std::invalid_argument("active attack requested with an empty target set");
  }
  if (!(spec.magnitude_low > 0.0 && spec.magnitude_low <= spec.magnitude_high)) {
    throw std::invalid_argument("attack magnitude bounds must satisfy 0 < low <= high");
  }
  std::uniform_real_distribution<double> magnitude(spec.magnitude_low, spec.magnitude_high);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::map<BusId, Phasor> c;
  for (BusId bus : spec.target_buses) {
    if (!topology.has_bus(bus)) throw UnknownBusError(bus);
    const double r = magnitude(rng);
    c[bus] = std::polar(r, phase(rng));
  }
  return attack_from_shift(h, topology, c);
}

MeasurementSet apply_attack(const MeasurementSet& z, const AttackInstance& instance,
                            const MeasurementLayout& layout) {
  if (static_cast<std::size_t>(instance.a.size()) != layout.size()) {
    throw LayoutError("attack vector length does not match the layout");
  }
  if (!instance.active()) return z;
  return assign_measurements(layout, z, measurement_vector(layout, z) + instance.a);
}

bool verify_stealth(const ComplexMatrix& h, const Weights& weights, const ComplexVector& z,
                    const ComplexVector& a, double alpha, double tolerance) {
  const auto clean = wls_estimate(h, weights, z);
  const auto attacked = wls_estimate(h, weights, z + a);
  const auto t_clean = chi_square_test(clean, alpha);
  const auto t_attacked = chi_square_test(attacked, alpha);
  return std::abs(t_clean.statistic - t_attacked.statistic) <= tolerance &&
         t_clean.passed == t_attacked.passed;
}

std::string write_attack(const AttackInstance& instance) {
  std::ostringstream out;
  out.precision(17);
  out << "bus,c_re,c_im\n";
  for (BusId bus : instance.attacked_buses) {
    const Phasor c = instance.c.at(bus);
    out << bus << ',' << c.real() << ',' << c.imag() << '\n';
  }
  return out.str();
}

std::map<BusId, Phasor> read_attack(std::string_view text) {
  std::map<BusId, Phasor> c;
  std::size_t line_no = 0, start = 0;
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
      if (line != "bus,c_re,c_im") throw ParseError(line_no, "bad attack header");
      header_seen = true;
      continue;
    }
    std::array<std::string_view, 3> f;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      auto comma = line.find(',', pos);
      if ((comma == std::string_view::npos) != (k == 2)) throw ParseError(line_no, "expected 3 fields");
      f[k] = line.substr(pos, comma - pos);
      pos = comma + 1;
    }
    BusId bus = 0;
    double re = 0, im = 0;
    auto ok = [](std::string_view s, auto& v) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      return ec == std::errc{} && p == s.data() + s.size();
    };
    if (!ok(f[0], bus) || !ok(f[1], re) || !ok(f[2], im) || !std::isfinite(re) ||
        !std::isfinite(im)) {
      throw ParseError(line_no, "bad attack row");
    }
    if (!c.emplace(bus, Phasor{re, im}).second) throw ParseError(line_no, "duplicate bus");
  }
  if (!header_seen) throw ParseError(1, "empty attack file");
  return c;
}

}  // namespace gridmf
