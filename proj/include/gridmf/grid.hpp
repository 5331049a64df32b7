// Network model: buses, pi-equivalent branches and adjacency.
//
// All quantities are per-unit on one system base. A branch stores the total
// line-charging admittance; each end of the pi-model carries half of it.

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridmf {

using Phasor = std::complex<double>;
using BusId = int;

/// Thrown for malformed grid text. Carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Thrown when a topology violates an invariant; findings lists each violation.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> findings);
  const std::vector<std::string>& findings() const noexcept { return findings_; }

 private:
  std::vector<std::string> findings_;
};

class UnknownBusError : public std::out_of_range {
 public:
  explicit UnknownBusError(BusId bus);
};

struct Bus {
  BusId id = 0;
  std::string label;
};

struct Branch {
  BusId from = 0;
  BusId to = 0;
  Phasor z_series;
  Phasor y_shunt_total;

  bool incident_to(BusId bus) const noexcept { return bus == from || bus == to; }
  BusId other_end(BusId bus) const noexcept { return bus == from ? to : from; }
  Phasor series_admittance() const { return 1.0 / z_series; }
  Phasor half_shunt() const { return 0.5 * y_shunt_total; }
};

struct Adjacent {
  BusId neighbor = 0;
  std::size_t branch_index = 0;
  Branch branch;
};

/// Raw buses and branches before validation.
struct GridDescription {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
};

/// Returns one human-readable finding per violated invariant; empty when valid.
std::vector<std::string> validate(const GridDescription& grid);

/// Immutable validated network. Buses are kept in ascending id order; the
/// position of a bus in that order is its state-vector column.
class GridTopology {
 public:
  /// Throws ValidationError when validate() reports anything.
  explicit GridTopology(GridDescription grid);

  const std::vector<Bus>& buses() const noexcept { return grid_.buses; }
  const std::vector<Branch>& branches() const noexcept { return grid_.branches; }
  const GridDescription& description() const noexcept { return grid_; }

  std::size_t bus_count() const noexcept { return grid_.buses.size(); }
  bool has_bus(BusId bus) const noexcept;
  std::size_t column_of(BusId bus) const;
  std::size_t degree(BusId bus) const { return adjacency_of(bus).size(); }

  /// Neighbors of bus in ascending neighbor id.
  std::span<const Adjacent> adjacency_of(BusId bus) const;

  /// Index of the branch joining a and b, or npos.
  std::size_t find_branch(BusId a, BusId b) const noexcept;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  GridDescription grid_;
  std::vector<std::vector<Adjacent>> adjacency_;
};

std::vector<std::string> validate(const GridTopology& topology);

inline std::span<const Adjacent> adjacency_of(const GridTopology& topology, BusId bus) {
  return topology.adjacency_of(bus);
}

/// Parses the line-oriented grid format:
///
///     [buses]
///     <id> [label]
///     [branches]
///     <from> <to> <r> <x> <b>
///
/// with z_series = r + jx and y_shunt_total = jb. '#' starts a comment.
GridDescription parse_grid(std::string_view text);

/// parse_grid followed by validation. Throws ParseError or ValidationError.
GridTopology load_grid(std::string_view text);
GridTopology load_grid_file(const std::string& path);

/// Writes a grid in the same format, with enough digits to round-trip.
/// Shunt admittances with a nonzero real part cannot be represented and throw.
std::string serialize_grid(const GridTopology& topology);

/// Text of the bundled 7-bus grid (also shipped as data/default7.grid).
std::string_view default7_grid_text();
GridTopology default7_grid();

/// Resolves "default7" to the bundled grid, anything else to a file path.
GridTopology resolve_grid(const std::string& source);

}  // namespace gridmf
