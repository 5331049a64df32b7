// Monte Carlo experiment driver and confusion statistics.
//
// Each trial draws three operating states (t1..t3), takes noisy PMU
// snapshots, injects a stealthy attack at t3 and runs the detectors. Truth
// for the voltage tables is "the voltage measurement of this bus was touched
// by a". False alarms count only not-attacked measurements inside trials
// where the system is under attack.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gridmf/attack.hpp"
#include "gridmf/detection.hpp"
#include "gridmf/estimation.hpp"
#include "gridmf/refinement.hpp"

namespace gridmf {

struct TrialConfig {
  std::string grid = "default7";
  double sigma = 0.002;
  double variation = 0.05;
  double drift_fraction = 0.1;

  bool attack_enabled = true;
  int min_targets = 1;
  int max_targets = 3;
  double magnitude_low = 0.05;
  double magnitude_high = 0.5;

  Thresholds thresholds;
  double epsilon = 0.05;
  FilterMode mode = FilterMode::two_d;
  CriteriaSelection criteria;
  MedianRule median = MedianRule::vector;
  bool refine = false;
  ClearingRule clearing = ClearingRule::any;

  LayoutKind estimator_layout = LayoutKind::ohmic;
  double alpha = 0.05;

  int trials = 1000;
  std::uint64_t seed = 42;
  int threads = 1;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

/// Per-run shared, read-only data.
struct TrialContext {
  GridTopology topology;
  MeasurementLayout layout;
  ComplexMatrix h;
  Weights weights;

  static TrialContext make(const TrialConfig& config);
};

struct BusOutcome {
  BusId bus = 0;
  bool voltage_attacked = false;
  /// Any current measured at this bus (branch ends, and the injection when the
  /// estimator processes it) was touched.
  bool current_attacked = false;

  double kappa_v_1d = 0.0;
  double kappa_v_2d = 0.0;
  double kappa_i = 0.0;
  double kappa_i_calc = 0.0;

  bool flag_1d = false;
  bool flag_2d = false;
  bool flag_dci = false;
  bool flag_cci = false;
  /// Configured pipeline before and after refinement.
  bool stage1 = false;
  bool predicted = false;
  /// Cleared by refinement although its voltage was attacked.
  bool falsely_cleared = false;
};

struct TrialOutcome {
  int trial_index = 0;
  bool attack_active = false;
  bool stealth_verified = false;
  std::vector<BusOutcome> buses;
};

class StealthViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic in (config.seed, trial_index). Throws StealthViolation when
/// the generated attack changes the chi-square statistic.
TrialOutcome run_trial(const TrialConfig& config, const TrialContext& context, int trial_index);
TrialOutcome run_trial(const TrialConfig& config, int trial_index);

struct ConfusionCounts {
  long detected = 0;      // attacked and flagged
  long missed = 0;        // attacked, not flagged
  long clean_passed = 0;  // not attacked, not flagged
  long false_alarms = 0;  // not attacked, flagged

  long attacked() const noexcept { return detected + missed; }
  long not_attacked() const noexcept { return clean_passed + false_alarms; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
  bool operator==(const ConfusionCounts&) const = default;
};

/// Percentages with per-bus ranges. Undefined ratios (no attacked or no
/// clean measurements) are NaN.
struct MetricRange {
  double aggregate = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct ColumnSummary {
  std::string key;  // csv prefix, e.g. "2d_mf"
  std::string title;
  MetricRange detected_attacks_pct;
  MetricRange not_detected_pct;
  MetricRange detected_absence_pct;
  MetricRange false_alarms_pct;
  MetricRange attacked_measurements;
  MetricRange not_attacked_measurements;
};

struct ColumnStats {
  std::string key;
  std::string title;
  std::map<BusId, ConfusionCounts> per_bus;

  ConfusionCounts aggregate() const;
  ColumnSummary summary() const;
};

struct ConfusionStats {
  int trials = 0;
  /// Voltage-measurement columns: 1D MF, 2D MF, DCI, CCI for the enabled
  /// criteria, then the configured pipeline.
  std::vector<ColumnStats> columns;
  /// Current measurements judged by the direct current imbalance.
  ColumnStats currents;
  long false_clearings = 0;

  const ColumnStats& column(std::string_view key) const;
};

/// Aggregates outcomes into per-column statistics for `config`.
ConfusionStats aggregate_outcomes(const TrialConfig& config, std::span<const TrialOutcome> outcomes);

/// Runs config.trials trials on config.threads workers. The result does not
/// depend on the thread count.
ConfusionStats run_montecarlo(const TrialConfig& config);

/// Summaries as stored and reloaded by the `report` command.
struct StatsSummary {
  int trials = 0;
  long false_clearings = 0;
  std::vector<ColumnSummary> columns;
};

StatsSummary summarize(const ConfusionStats& stats);

enum class ReportFormat { table, csv };

/// csv: header `metric,aggregate,min,max`, rows `<column>.<metric>`.
/// table: the four-row detection/false-alarm layout plus per-bus ranges.
std::string report(const StatsSummary& summary, ReportFormat format);
inline std::string report(const ConfusionStats& stats, ReportFormat format) {
  return report(summarize(stats), format);
}
ReportFormat parse_report_format(std::string_view name);

/// Parses the csv produced by report(..., csv). Throws ParseError.
StatsSummary read_stats_csv(std::string_view text);

}  // namespace gridmf
