#include "gridmf/estimation.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>

namespace gridmf {

MeasurementLayout::MeasurementLayout(std::vector<MeasurementDescriptor> rows)
    : rows_(std::move(rows)) {}

MeasurementLayout MeasurementLayout::make(const GridTopology& topology, LayoutKind kind) {
  std::vector<MeasurementDescriptor> rows;
  for (const auto& bus : topology.buses()) rows.push_back({MeasurementKind::voltage, bus.id, {}});
  for (const auto& b : topology.branches()) {
    rows.push_back({MeasurementKind::current, b.from, b.to});
    rows.push_back({MeasurementKind::current, b.to, b.from});
  }
  if (kind == LayoutKind::full) {
    for (const auto& bus : topology.buses()) rows.push_back({MeasurementKind::injection, bus.id, {}});
  }
  return MeasurementLayout(std::move(rows));
}

std::optional<std::size_t> MeasurementLayout::index_of(const MeasurementDescriptor& d) const {
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    if (rows_[k] == d) return k;
  }
  return std::nullopt;
}

namespace {

void add_current_row(ComplexMatrix& h, Eigen::Index row, const GridTopology& topology,
                     BusId from, const Branch& branch) {
  const auto y_series = branch.series_admittance();
  h(row, static_cast<Eigen::Index>(topology.column_of(from))) += y_series + branch.half_shunt();
  h(row, static_cast<Eigen::Index>(topology.column_of(branch.other_end(from)))) -= y_series;
}

}  // namespace

ComplexMatrix build_h(const GridTopology& topology, const MeasurementLayout& layout) {
  const auto m = static_cast<Eigen::Index>(layout.size());
  const auto n = static_cast<Eigen::Index>(topology.bus_count());
  ComplexMatrix h = ComplexMatrix::Zero(m, n);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& d = layout[static_cast<std::size_t>(k)];
    if (!topology.has_bus(d.bus)) {
      throw LayoutError("layout row " + std::to_string(k) + " references unknown bus " +
                        std::to_string(d.bus));
    }
    switch (d.kind) {
      case MeasurementKind::voltage:
        h(k, static_cast<Eigen::Index>(topology.column_of(d.bus))) = 1.0;
        break;
      case MeasurementKind::current: {
        const auto idx = d.neighbor ? topology.find_branch(d.bus, *d.neighbor) : GridTopology::npos;
        if (idx == GridTopology::npos) {
          throw LayoutError("layout row " + std::to_string(k) + " references unknown branch");
        }
        add_current_row(h, k, topology, d.bus, topology.branches()[idx]);
        break;
      }
      case MeasurementKind::injection:
        for (const auto& adj : topology.adjacency_of(d.bus)) {
          add_current_row(h, k, topology, d.bus, adj.branch);
        }
        break;
    }
  }
  return h;
}

ComplexVector measurement_vector(const MeasurementLayout& layout, const MeasurementSet& set) {
  ComplexVector z(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto& d = layout[k];
    const auto row = static_cast<Eigen::Index>(k);
    switch (d.kind) {
      case MeasurementKind::voltage: z(row) = voltage_at(set, d.bus); break;
      case MeasurementKind::current: z(row) = current_at(set, d.bus, d.neighbor.value_or(d.bus)); break;
      case MeasurementKind::injection: z(row) = injection_at(set, d.bus); break;
    }
  }
  return z;
}

MeasurementSet assign_measurements(const MeasurementLayout& layout, const MeasurementSet& base,
                                   const ComplexVector& z) {
  if (static_cast<std::size_t>(z.size()) != layout.size()) {
    throw LayoutError("vector length does not match layout");
  }
  MeasurementSet out = base;
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto& d = layout[k];
    const Phasor value = z(static_cast<Eigen::Index>(k));
    switch (d.kind) {
      case MeasurementKind::voltage:
        voltage_at(out, d.bus);
        out.bus_voltages[d.bus] = value;
        break;
      case MeasurementKind::current: {
        const BranchEnd end{d.bus, d.neighbor.value_or(d.bus)};
        current_at(out, end.first, end.second);
        out.branch_currents[end] = value;
        break;
      }
      case MeasurementKind::injection:
        injection_at(out, d.bus);
        out.injection_currents[d.bus] = value;
        break;
    }
  }
  return out;
}

Weights Weights::uniform(std::size_t m, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("weight sigma must be > 0");
  return {Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / (sigma * sigma))};
}

std::map<BusId, Phasor> state_by_bus(const GridTopology& topology, const ComplexVector& x) {
  std::map<BusId, Phasor> out;
  for (std::size_t c = 0; c < topology.bus_count(); ++c) {
    out[topology.buses()[c].id] = x(static_cast<Eigen::Index>(c));
  }
  return out;
}

ComplexVector state_vector(const GridTopology& topology, const std::map<BusId, Phasor>& x) {
  ComplexVector out(static_cast<Eigen::Index>(topology.bus_count()));
  for (std::size_t c = 0; c < topology.bus_count(); ++c) {
    out(static_cast<Eigen::Index>(c)) = x.at(topology.buses()[c].id);
  }
  return out;
}

EstimationResult wls_estimate(const ComplexMatrix& h, const Weights& weights,
                              const ComplexVector& z) {
  const auto m = h.rows();
  const auto n = h.cols();
  if (z.size() != m || weights.w.size() != m) throw LayoutError("H, W and z sizes disagree");
  if ((weights.w.array() <= 0.0).any()) throw std::invalid_argument("weights must be positive");
  if (m < n) throw ObservabilityError("fewer measurements than states");

  const Eigen::VectorXd sqrt_w = weights.w.cwiseSqrt();
  const ComplexMatrix a = sqrt_w.asDiagonal() * h;
  const ComplexVector b = sqrt_w.asDiagonal() * z;

  Eigen::ColPivHouseholderQR<ComplexMatrix> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < n) {
    throw ObservabilityError("measurement matrix has rank " + std::to_string(qr.rank()) +
                             " < " + std::to_string(n));
  }

  EstimationResult result;
  result.x_hat = qr.solve(b);
  result.residuals = z - h * result.x_hat;
  result.chi2 = (weights.w.array() * result.residuals.array().abs2()).sum();
  result.dof = static_cast<int>(2 * (m - n));

  // Weighted hat matrix diagonal from the thin Q factor.
  const ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(m, n);
  const Eigen::VectorXd leverage = q.rowwise().squaredNorm();
  result.normalized_residuals.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double omega = (1.0 - leverage(k)) / weights.w(k);
    const double scale = 1.0 / weights.w(k);
    result.normalized_residuals(k) =
        omega > 1e-12 * scale ? std::abs(result.residuals(k)) / std::sqrt(omega) : 0.0;
  }
  return result;
}

ChiSquareOutcome chi_square_test(const EstimationResult& result, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  ChiSquareOutcome out;
  out.statistic = result.chi2;
  out.dof = result.dof;
  if (result.dof <= 0) {
    // No redundancy: the residual is identically zero and nothing is testable.
    out.threshold = 0.0;
    out.passed = true;
    return out;
  }
  boost::math::chi_squared dist(static_cast<double>(result.dof));
  out.threshold = boost::math::quantile(dist, 1.0 - alpha);
  out.passed = out.statistic <= out.threshold;
  return out;
}

LargestResidual largest_normalized_residual(const EstimationResult& result) {
  if (result.dof <= 0) throw std::invalid_argument("largest normalized residual needs m > n");
  LargestResidual best;
  const auto& r = result.normalized_residuals;
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    if (r(k) > best.value) best = {static_cast<std::size_t>(k), r(k)};
  }
  return best;
}

}  // namespace gridmf
