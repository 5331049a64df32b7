// Linear PMU state estimation: measurement matrix, complex weighted least
// squares, and the residual-based bad-data tests.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gridmf/grid.hpp"
#include "gridmf/measurement.hpp"

namespace gridmf {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

enum class MeasurementKind { voltage, current, injection };

struct MeasurementDescriptor {
  MeasurementKind kind = MeasurementKind::voltage;
  BusId bus = 0;
  /// Receiving bus for branch currents; unset otherwise.
  std::optional<BusId> neighbor;

  bool operator==(const MeasurementDescriptor&) const = default;
};

/// Which measurements the estimator processes.
///   ohmic: bus voltages and both branch-end currents (Ohm's law only)
///   full:  ohmic plus bus injection currents
enum class LayoutKind { ohmic, full };

/// Row order shared by H, z, W and the residual vector: voltages by bus id,
/// then for each branch in file order the current at `from` then at `to`,
/// then (full layout) injections by bus id.
class MeasurementLayout {
 public:
  MeasurementLayout() = default;
  explicit MeasurementLayout(std::vector<MeasurementDescriptor> rows);

  static MeasurementLayout make(const GridTopology& topology, LayoutKind kind);

  const std::vector<MeasurementDescriptor>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  const MeasurementDescriptor& operator[](std::size_t k) const { return rows_[k]; }
  std::optional<std::size_t> index_of(const MeasurementDescriptor& d) const;

  bool operator==(const MeasurementLayout&) const = default;

 private:
  std::vector<MeasurementDescriptor> rows_;
};

class LayoutError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ObservabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Complex m x n measurement matrix. Columns follow ascending bus id.
/// Voltage row: 1 at column i. Current row I_ij: 1/Z + Y/2 at i, -1/Z at j.
/// Injection row at i: sum of the current rows of its incident branches.
ComplexMatrix build_h(const GridTopology& topology, const MeasurementLayout& layout);

/// Gathers z in layout order. Throws MissingMeasurementError.
ComplexVector measurement_vector(const MeasurementLayout& layout, const MeasurementSet& set);

/// Returns a copy of `base` with the layout rows overwritten by `z`.
MeasurementSet assign_measurements(const MeasurementLayout& layout, const MeasurementSet& base,
                                   const ComplexVector& z);

/// Measurement weights (inverse variance per complex component).
struct Weights {
  Eigen::VectorXd w;

  static Weights uniform(std::size_t m, double sigma);
};

struct EstimationResult {
  ComplexVector x_hat;
  ComplexVector residuals;
  double chi2 = 0.0;
  int dof = 0;
  /// |r_k| / sqrt(Omega_kk) where Omega = W^-1 - H (H^H W H)^-1 H^H. Zero
  /// for critical measurements (Omega_kk ~ 0).
  Eigen::VectorXd normalized_residuals;
};

std::map<BusId, Phasor> state_by_bus(const GridTopology& topology, const ComplexVector& x);
ComplexVector state_vector(const GridTopology& topology, const std::map<BusId, Phasor>& x);

/// x_hat = (H^H W H)^-1 H^H W z, computed from a column-pivoted QR of
/// sqrt(W) H. Throws ObservabilityError when rank(H) < n.
EstimationResult wls_estimate(const ComplexMatrix& h, const Weights& weights, const ComplexVector& z);

struct ChiSquareOutcome {
  bool passed = true;
  double statistic = 0.0;
  double threshold = 0.0;
  int dof = 0;
};

/// Compares chi2 with the (1 - alpha) quantile of chi-square with 2(m - n)
/// degrees of freedom. Throws std::invalid_argument unless 0 < alpha < 1.
ChiSquareOutcome chi_square_test(const EstimationResult& result, double alpha);

struct LargestResidual {
  std::size_t index = 0;
  double value = 0.0;
};

/// Largest normalized residual, lowest index on ties. Requires m > n.
LargestResidual largest_normalized_residual(const EstimationResult& result);

}  // namespace gridmf
