#include "gridmf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace gridmf {

namespace {

std::string join_findings(const std::vector<std::string>& findings) {
  std::string out = "invalid grid:";
  for (const auto& f : findings) {
    out += "\n  ";
    out += f;
  }
  return out;
}

bool finite(Phasor p) { return std::isfinite(p.real()) && std::isfinite(p.imag()); }

std::string branch_name(const Branch& b) {
  return "branch " + std::to_string(b.from) + "-" + std::to_string(b.to);
}

std::string_view strip_comment(std::string_view line) {
  if (auto pos = line.find('#'); pos != std::string_view::npos) line = line.substr(0, pos);
  auto first = line.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  auto last = line.find_last_not_of(" \t\r");
  return line.substr(first, last - first + 1);
}

constexpr std::string_view kDefault7 = R"(# Default 7-bus test grid.
#
# Representative per-unit parameters on a common system base. The layout is a
# ring 1-2-3-4-5-6-7-1 with a cross-tie 1-4, so buses 1 and 4 have degree 3 and
# the rest degree 2. Series impedances have |Z| in [0.03, 0.092] pu with
# X/R = 5; line charging b is the total shunt susceptance of each line.

[buses]
1 gen1
2 load2
3 load3
4 hub4
5 load5
6 gen6
7 load7

[branches]
# from to r x b
1 2 0.010 0.050 0.020
2 3 0.008 0.040 0.015
3 4 0.012 0.060 0.025
4 5 0.006 0.030 0.010
5 6 0.015 0.075 0.030
6 7 0.009 0.045 0.018
7 1 0.011 0.055 0.022
1 4 0.018 0.090 0.040
)";

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

ValidationError::ValidationError(std::vector<std::string> findings)
    : std::runtime_error(join_findings(findings)), findings_(std::move(findings)) {}

UnknownBusError::UnknownBusError(BusId bus)
    : std::out_of_range("unknown bus " + std::to_string(bus)) {}

std::vector<std::string> validate(const GridDescription& grid) {
  std::vector<std::string> findings;
  if (grid.buses.empty()) findings.emplace_back("grid has no buses");

  std::set<BusId> ids;
  for (const auto& bus : grid.buses) {
    if (!ids.insert(bus.id).second) findings.push_back("duplicate bus id " + std::to_string(bus.id));
  }

  std::set<std::pair<BusId, BusId>> pairs;
  for (const auto& b : grid.branches) {
    const auto name = branch_name(b);
    if (b.from == b.to) findings.push_back(name + ": self loop");
    if (!ids.count(b.from) || !ids.count(b.to)) findings.push_back(name + ": references unknown bus");
    if (!finite(b.z_series) || !finite(b.y_shunt_total)) {
      findings.push_back(name + ": non-finite parameter");
    } else if (std::abs(b.z_series) == 0.0) {
      findings.push_back(name + ": zero series impedance");
    }
    auto key = std::minmax(b.from, b.to);
    if (!pairs.insert({key.first, key.second}).second) findings.push_back(name + ": duplicate branch");
  }

  // Connectivity over the branches that reference known buses.
  if (!ids.empty()) {
    std::map<BusId, BusId> parent;
    for (BusId id : ids) parent[id] = id;
    auto find = [&](BusId x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& b : grid.branches) {
      if (ids.count(b.from) && ids.count(b.to)) parent[find(b.from)] = find(b.to);
    }
    std::set<BusId> roots;
    for (BusId id : ids) roots.insert(find(id));
    if (roots.size() > 1) {
      findings.push_back("disconnected: " + std::to_string(roots.size()) + " islands");
    }
  }
  return findings;
}

GridTopology::GridTopology(GridDescription grid) : grid_(std::move(grid)) {
  if (auto findings = validate(grid_); !findings.empty()) throw ValidationError(std::move(findings));
  std::sort(grid_.buses.begin(), grid_.buses.end(),
            [](const Bus& a, const Bus& b) { return a.id < b.id; });
  adjacency_.resize(grid_.buses.size());
  for (std::size_t k = 0; k < grid_.branches.size(); ++k) {
    const auto& b = grid_.branches[k];
    adjacency_[column_of(b.from)].push_back({b.to, k, b});
    adjacency_[column_of(b.to)].push_back({b.from, k, b});
  }
  for (auto& list : adjacency_) {
    std::sort(list.begin(), list.end(),
              [](const Adjacent& a, const Adjacent& b) { return a.neighbor < b.neighbor; });
  }
}

bool GridTopology::has_bus(BusId bus) const noexcept {
  return std::binary_search(grid_.buses.begin(), grid_.buses.end(), Bus{bus, {}},
                            [](const Bus& a, const Bus& b) { return a.id < b.id; });
}

std::size_t GridTopology::column_of(BusId bus) const {
  auto it = std::lower_bound(grid_.buses.begin(), grid_.buses.end(), bus,
                             [](const Bus& a, BusId id) { return a.id < id; });
  if (it == grid_.buses.end() || it->id != bus) throw UnknownBusError(bus);
  return static_cast<std::size_t>(it - grid_.buses.begin());
}

std::span<const Adjacent> GridTopology::adjacency_of(BusId bus) const {
  return adjacency_[column_of(bus)];
}

std::size_t GridTopology::find_branch(BusId a, BusId b) const noexcept {
  for (std::size_t k = 0; k < grid_.branches.size(); ++k) {
    const auto& br = grid_.branches[k];
    if ((br.from == a && br.to == b) || (br.from == b && br.to == a)) return k;
  }
  return npos;
}

std::vector<std::string> validate(const GridTopology& topology) {
  auto findings = validate(topology.description());
  // Adjacency symmetry is a construction invariant; re-check it here anyway.
  for (const auto& bus : topology.buses()) {
    for (const auto& adj : topology.adjacency_of(bus.id)) {
      const auto back = topology.adjacency_of(adj.neighbor);
      bool found = std::any_of(back.begin(), back.end(),
                               [&](const Adjacent& a) { return a.neighbor == bus.id; });
      if (!found) {
        findings.push_back("asymmetric adjacency " + std::to_string(bus.id) + "-" +
                           std::to_string(adj.neighbor));
      }
    }
  }
  return findings;
}

GridDescription parse_grid(std::string_view text) {
  enum class Section { none, buses, branches };
  Section section = Section::none;
  GridDescription grid;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    auto line = strip_comment(text.substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line == "[buses]") {
        section = Section::buses;
      } else if (line == "[branches]") {
        section = Section::branches;
      } else {
        throw ParseError(line_no, "unknown section " + std::string(line));
      }
      continue;
    }

    std::istringstream in{std::string(line)};
    if (section == Section::buses) {
      Bus bus;
      if (!(in >> bus.id)) throw ParseError(line_no, "expected integer bus id");
      in >> bus.label;
      std::string extra;
      if (in >> extra) throw ParseError(line_no, "unexpected token '" + extra + "'");
      grid.buses.push_back(std::move(bus));
    } else if (section == Section::branches) {
      Branch b;
      double r = 0, x = 0, susceptance = 0;
      if (!(in >> b.from >> b.to >> r >> x >> susceptance)) {
        throw ParseError(line_no, "expected 'from to r x b'");
      }
      std::string extra;
      if (in >> extra) throw ParseError(line_no, "unexpected token '" + extra + "'");
      b.z_series = {r, x};
      b.y_shunt_total = {0.0, susceptance};
      grid.branches.push_back(b);
    } else {
      throw ParseError(line_no, "data outside of a section");
    }
  }
  return grid;
}

GridTopology load_grid(std::string_view text) { return GridTopology(parse_grid(text)); }

GridTopology load_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_grid(buf.str());
}

std::string serialize_grid(const GridTopology& topology) {
  std::ostringstream out;
  out.precision(17);
  out << "[buses]\n";
  for (const auto& bus : topology.buses()) {
    out << bus.id;
    if (!bus.label.empty()) out << ' ' << bus.label;
    out << '\n';
  }
  out << "[branches]\n";
  for (const auto& b : topology.branches()) {
    if (b.y_shunt_total.real() != 0.0) {
      throw std::invalid_argument(branch_name(b) + ": shunt conductance is not representable");
    }
    out << b.from << ' ' << b.to << ' ' << b.z_series.real() << ' ' << b.z_series.imag() << ' '
        << b.y_shunt_total.imag() << '\n';
  }
  return out.str();
}

std::string_view default7_grid_text() { return kDefault7; }

GridTopology default7_grid() { return load_grid(kDefault7); }

GridTopology resolve_grid(const std::string& source) {
  if (source == "default7") return default7_grid();
  return load_grid_file(source);
}

}  // namespace gridmf
