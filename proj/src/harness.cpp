#include "gridmf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace gridmf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double pct(long part, long whole) {
  return whole == 0 ? kNaN : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

std::string format_number(double v, int decimals) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

bool touched_any(const AttackInstance& inst, const MeasurementLayout& layout, BusId bus,
                 bool currents) {
  for (std::size_t k : inst.touched) {
    const auto& d = layout[k];
    if (d.bus != bus) continue;
    if (!currents && d.kind == MeasurementKind::voltage) return true;
    if (currents && d.kind != MeasurementKind::voltage) return true;
  }
  return false;
}

}  // namespace

void TrialConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(trials >= 1, "trial count must be >= 1");
  require(threads >= 1, "thread count must be >= 1");
  require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be >= 0");
  require(variation >= 0.0 && variation < 0.5, "variation must lie in [0, 0.5)");
  require(drift_fraction >= 0.0, "drift fraction must be >= 0");
  require(thresholds.voltage > 0.0 && thresholds.current > 0.0 && epsilon > 0.0,
          "thresholds and epsilon must be > 0");
  require(min_targets >= 0 && min_targets <= max_targets, "target count range is invalid");
  require(magnitude_low > 0.0 && magnitude_low <= magnitude_high, "magnitude range is invalid");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(criteria.any(), "at least one criterion must be enabled");
}

TrialContext TrialContext::make(const TrialConfig& config) {
  auto topology = resolve_grid(config.grid);
  auto layout = MeasurementLayout::make(topology, config.estimator_layout);
  auto h = build_h(topology, layout);
  // Noise-free runs still need finite weights; their scale does not move x_hat.
  const double weight_sigma = config.sigma > 0.0 ? config.sigma : 0.002;
  auto weights = Weights::uniform(layout.size(), weight_sigma);
  if (config.max_targets > static_cast<int>(topology.bus_count())) {
    throw std::invalid_argument("max targets exceeds the bus count");
  }
  return {std::move(topology), std::move(layout), std::move(h), std::move(weights)};
}

TrialOutcome run_trial(const TrialConfig& config, const TrialContext& ctx, int trial_index) {
  const auto& topology = ctx.topology;
  Rng rng = make_rng(derive_seed(config.seed, static_cast<std::uint64_t>(trial_index)));

  const auto states =
      synthesize_state_series(topology, config.variation, config.drift_fraction, rng);
  auto snaps = time_series(topology, states, NoiseModel(config.sigma), rng);

  AttackInstance attack;
  if (config.attack_enabled) {
    AttackSpec spec;
    spec.target_buses = choose_targets(topology, config.min_targets, config.max_targets, rng);
    spec.magnitude_low = config.magnitude_low;
    spec.magnitude_high = config.magnitude_high;
    attack = make_attack(ctx.h, topology, spec, rng);
  } else {
    attack = attack_from_shift(ctx.h, topology, {});
  }

  TrialOutcome outcome;
  outcome.trial_index = trial_index;
  outcome.attack_active = attack.active();
  const ComplexVector z3 = measurement_vector(ctx.layout, snaps[2]);
  outcome.stealth_verified = verify_stealth(ctx.h, ctx.weights, z3, attack, config.alpha);
  if (!outcome.stealth_verified) {
    throw StealthViolation("trial " + std::to_string(trial_index) +
                           ": attack changed the chi-square statistic");
  }
  snaps[2] = apply_attack(snaps[2], attack, ctx.layout);

  DetectionOptions opts;
  opts.thresholds = config.thresholds;
  opts.criteria = config.criteria;
  opts.median = config.median;
  opts.mode = FilterMode::one_d;
  const auto v1d = detect(topology, std::span(snaps).last(1), opts);
  opts.mode = FilterMode::two_d;
  const auto v2d = detect(topology, snaps, opts);
  const auto& pipeline = config.mode == FilterMode::two_d ? v2d : v1d;

  RefinementResult refined;
  if (config.refine) {
    refined = refine(pipeline, topology, snaps[2], {config.epsilon, config.clearing});
  }

  for (const auto& bus : topology.buses()) {
    BusOutcome b;
    b.bus = bus.id;
    b.voltage_attacked = touched_any(attack, ctx.layout, bus.id, false);
    b.current_attacked = touched_any(attack, ctx.layout, bus.id, true);
    const auto& one = v1d.at(bus.id);
    const auto& two = v2d.at(bus.id);
    b.kappa_v_1d = one.criteria.kappa_v;
    b.kappa_v_2d = two.criteria.kappa_v;
    b.kappa_i = two.criteria.kappa_i_direct;
    b.kappa_i_calc = two.criteria.kappa_i_calc;
    b.flag_1d = one.voltage_flag;
    b.flag_2d = two.voltage_flag;
    b.flag_dci = two.direct_current_flag;
    b.flag_cci = two.calculated_current_flag;
    b.stage1 = pipeline.at(bus.id).suspect;
    b.predicted = config.refine ? refined.final_suspects.count(bus.id) > 0 : b.stage1;
    b.falsely_cleared = b.voltage_attacked && b.stage1 && !b.predicted;
    outcome.buses.push_back(b);
  }
  return outcome;
}

TrialOutcome run_trial(const TrialConfig& config, int trial_index) {
  config.validate();
  return run_trial(config, TrialContext::make(config), trial_index);
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
  detected += o.detected;
  missed += o.missed;
  clean_passed += o.clean_passed;
  false_alarms += o.false_alarms;
  return *this;
}

ConfusionCounts ColumnStats::aggregate() const {
  ConfusionCounts total;
  for (const auto& [bus, c] : per_bus) total += c;
  return total;
}

ColumnSummary ColumnStats::summary() const {
  ColumnSummary s;
  s.key = key;
  s.title = title;
  const auto total = aggregate();

  auto range = [&](auto value_of, double aggregate_value) {
    MetricRange r{aggregate_value, kNaN, kNaN};
    for (const auto& [bus, c] : per_bus) {
      const double v = value_of(c);
      if (std::isnan(v)) continue;
      r.min = std::isnan(r.min) ? v : std::min(r.min, v);
      r.max = std::isnan(r.max) ? v : std::max(r.max, v);
    }
    return r;
  };
  auto detected = [](const ConfusionCounts& c) { return pct(c.detected, c.attacked()); };
  auto not_detected = [&](const ConfusionCounts& c) { return 100.0 - detected(c); };
  auto absence = [](const ConfusionCounts& c) { return pct(c.clean_passed, c.not_attacked()); };
  auto false_alarm = [&](const ConfusionCounts& c) { return 100.0 - absence(c); };

  s.detected_attacks_pct = range(detected, detected(total));
  s.not_detected_pct = range(not_detected, not_detected(total));
  s.detected_absence_pct = range(absence, absence(total));
  s.false_alarms_pct = range(false_alarm, false_alarm(total));
  s.attacked_measurements = range(
      [](const ConfusionCounts& c) { return static_cast<double>(c.attacked()); },
      static_cast<double>(total.attacked()));
  s.not_attacked_measurements = range(
      [](const ConfusionCounts& c) { return static_cast<double>(c.not_attacked()); },
      static_cast<double>(total.not_attacked()));
  return s;
}

const ColumnStats& ConfusionStats::column(std::string_view key) const {
  for (const auto& c : columns) {
    if (c.key == key) return c;
  }
  if (currents.key == key) return currents;
  throw std::out_of_range("no statistics column " + std::string(key));
}

ConfusionStats aggregate_outcomes(const TrialConfig& config, std::span<const TrialOutcome> outcomes) {
  ConfusionStats stats;
  using Pick = bool (*)(const BusOutcome&);
  struct Spec {
    const char* key;
    const char* title;
    Pick pick;
  };
  std::vector<Spec> specs;
  if (config.criteria.voltage) {
    specs.push_back({"1d_mf", "1D MF", [](const BusOutcome& b) { return b.flag_1d; }});
    specs.push_back({"2d_mf", "2D MF", [](const BusOutcome& b) { return b.flag_2d; }});
  }
  if (config.criteria.direct_current) {
    specs.push_back({"dci", "DCI", [](const BusOutcome& b) { return b.flag_dci; }});
  }
  if (config.criteria.calculated_current) {
    specs.push_back({"cci", "CCI", [](const BusOutcome& b) { return b.flag_cci; }});
  }
  if (config.refine) {
    specs.push_back({"stage1", "Stage 1", [](const BusOutcome& b) { return b.stage1; }});
  }
  specs.push_back({"pipeline", "Pipeline", [](const BusOutcome& b) { return b.predicted; }});

  for (const auto& spec : specs) stats.columns.push_back({spec.key, spec.title, {}});
  stats.currents = {"currents", "DCI (currents)", {}};

  auto tally = [](ConfusionCounts& c, bool truth, bool predicted) {
    if (truth) {
      (predicted ? c.detected : c.missed) += 1;
    } else {
      (predicted ? c.false_alarms : c.clean_passed) += 1;
    }
  };

  for (const auto& outcome : outcomes) {
    // False alarms are judged inside attacked-system trials; a run with the
    // attack disabled is a clean-system run and counts every trial.
    if (config.attack_enabled && !outcome.attack_active) continue;
    ++stats.trials;
    for (const auto& b : outcome.buses) {
      for (std::size_t k = 0; k < specs.size(); ++k) {
        tally(stats.columns[k].per_bus[b.bus], b.voltage_attacked, specs[k].pick(b));
      }
      tally(stats.currents.per_bus[b.bus], b.current_attacked, b.flag_dci);
      stats.false_clearings += b.falsely_cleared ? 1 : 0;
    }
  }
  return stats;
}

ConfusionStats run_montecarlo(const TrialConfig& config) {
  config.validate();
  const TrialContext ctx = TrialContext::make(config);
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(config.trials));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int k = next++; k < config.trials; k = next++) {
      try {
        outcomes[static_cast<std::size_t>(k)] = run_trial(config, ctx, k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.trials;
      }
    }
  };
  if (config.threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < config.threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return aggregate_outcomes(config, outcomes);
}

StatsSummary summarize(const ConfusionStats& stats) {
  StatsSummary s;
  s.trials = stats.trials;
  s.false_clearings = stats.false_clearings;
  for (const auto& c : stats.columns) s.columns.push_back(c.summary());
  s.columns.push_back(stats.currents.summary());
  return s;
}

namespace {

struct MetricField {
  const char* name;
  const char* label;
  MetricRange ColumnSummary::*field;
};

constexpr MetricField kMetrics[] = {
    {"attacked_measurements", "Attacked measurements", &ColumnSummary::attacked_measurements},
    {"not_attacked_measurements", "Not attacked measurements",
     &ColumnSummary::not_attacked_measurements},
    {"detected_attacks_pct", "Detected attacks, %", &ColumnSummary::detected_attacks_pct},
    {"not_detected_pct", "Not detected attacks, %", &ColumnSummary::not_detected_pct},
    {"detected_absence_pct", "Detected absence of attacks, %",
     &ColumnSummary::detected_absence_pct},
    {"false_alarms_pct", "False alarms, %", &ColumnSummary::false_alarms_pct},
};

const std::map<std::string, std::string>& column_titles() {
  static const std::map<std::string, std::string> titles = {
      {"1d_mf", "1D MF"}, {"2d_mf", "2D MF"},       {"dci", "DCI"},
      {"cci", "CCI"},     {"stage1", "Stage 1"},    {"pipeline", "Pipeline"},
      {"currents", "DCI (currents)"}};
  return titles;
}

std::string pad(std::string s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

std::string range_text(const MetricRange& r, int decimals) {
  if (std::isnan(r.min)) return "n/a";
  if (r.min == r.max) return format_number(r.min, decimals);
  return format_number(r.min, decimals) + "--" + format_number(r.max, decimals);
}

void write_table_block(std::ostringstream& out, const std::vector<const ColumnSummary*>& cols) {
  constexpr std::size_t label_w = 32, col_w = 15;
  out << pad("Criteria", label_w, true);
  for (const auto* c : cols) out << pad(c->title, col_w);
  out << '\n';
  for (const auto& m : kMetrics) {
    const bool count = std::string_view(m.name).ends_with("measurements");
    out << pad(m.label, label_w, true);
    for (const auto* c : cols) out << pad(format_number((c->*m.field).aggregate, count ? 0 : 2), col_w);
    out << '\n';
  }
  out << "Per-bus range\n";
  for (const auto& m : kMetrics) {
    if (std::string_view(m.name).ends_with("measurements")) continue;
    out << pad(m.label, label_w, true);
    for (const auto* c : cols) out << pad(range_text(c->*m.field, 2), col_w);
    out << '\n';
  }
}

}  // namespace

std::string report(const StatsSummary& summary, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::csv) {
    out << "metric,aggregate,min,max\n";
    out << "trials," << summary.trials << ',' << summary.trials << ',' << summary.trials << '\n';
    out << "false_clearings," << summary.false_clearings << ',' << summary.false_clearings << ','
        << summary.false_clearings << '\n';
    for (const auto& c : summary.columns) {
      for (const auto& m : kMetrics) {
        const auto& r = c.*m.field;
        out << c.key << '.' << m.name << ',' << format_number(r.aggregate, 6) << ','
            << format_number(r.min, 6) << ',' << format_number(r.max, 6) << '\n';
      }
    }
    return out.str();
  }

  out << "Voltage measurements, " << summary.trials << " attacked-system trials\n\n";
  std::vector<const ColumnSummary*> voltage_cols;
  const ColumnSummary* currents = nullptr;
  for (const auto& c : summary.columns) {
    if (c.key == "currents") {
      currents = &c;
    } else {
      voltage_cols.push_back(&c);
    }
  }
  write_table_block(out, voltage_cols);
  if (currents) {
    out << "\nCurrent measurements\n\n";
    write_table_block(out, {currents});
  }
  out << "\nAttacked voltages cleared by refinement: " << summary.false_clearings << '\n';
  return out.str();
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "table") return ReportFormat::table;
  if (name == "csv") return ReportFormat::csv;
  throw std::invalid_argument("unknown report format '" + std::string(name) + "'");
}

StatsSummary read_stats_csv(std::string_view text) {
  StatsSummary s;
  std::map<std::string, ColumnSummary> by_key;
  std::vector<std::string> order;
  std::size_t line_no = 0, start = 0;
  bool header_seen = false;

  auto number = [&](std::string_view f) {
    double v = 0;
    if (f == "nan") return kNaN;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc{} || p != f.data() + f.size()) {
      throw ParseError(line_no, "bad number '" + std::string(f) + "'");
    }
    return v;
  };

  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "metric,aggregate,min,max") throw ParseError(line_no, "bad stats header");
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> f;
    std::size_t pos = 0;
    while (true) {
      auto comma = line.find(',', pos);
      f.push_back(line.substr(pos, comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (f.size() != 4) throw ParseError(line_no, "expected 4 fields");
    const MetricRange r{number(f[1]), number(f[2]), number(f[3])};
    if (f[0] == "trials") {
      s.trials = static_cast<int>(r.aggregate);
      continue;
    }
    if (f[0] == "false_clearings") {
      s.false_clearings = static_cast<long>(r.aggregate);
      continue;
    }
    const auto dot = f[0].find('.');
    if (dot == std::string_view::npos) throw ParseError(line_no, "bad metric name");
    const std::string key(f[0].substr(0, dot));
    const auto metric = f[0].substr(dot + 1);
    const auto title = column_titles().find(key);
    if (title == column_titles().end()) throw ParseError(line_no, "unknown column '" + key + "'");
    const auto* field = std::find_if(std::begin(kMetrics), std::end(kMetrics),
                                     [&](const MetricField& m) { return metric == m.name; });
    if (field == std::end(kMetrics)) throw ParseError(line_no, "unknown metric");
    auto [it, inserted] = by_key.try_emplace(key);
    if (inserted) {
      it->second.key = key;
      it->second.title = title->second;
      order.push_back(key);
    }
    it->second.*(field->field) = r;
  }
  if (!header_seen) throw ParseError(1, "empty stats file");
  for (const auto& key : order) s.columns.push_back(by_key[key]);
  return s;
}

}  // namespace gridmf
