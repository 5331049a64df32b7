#include "gridmf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gridmf/harness.hpp"

namespace gridmf {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CliOptions {
  std::string grid = "default7";
  int trials = 1000;
  std::uint64_t seed = 42;
  double sigma = 0.002;
  double variation = 0.05;
  double drift = 0.1;
  double threshold = 0.05;
  double current_threshold = 0.05;
  double epsilon = 0.05;
  std::string mode = "2d";
  std::string criteria = "v";
  std::string median = "vector";
  std::string layout = "ohmic";
  bool refine = false;
  bool no_attack = false;
  int min_targets = 1;
  int max_targets = 3;
  int threads = 1;
  std::string format = "table";
  std::string out;
  std::string in;
  std::string attack_out;
  std::string replay;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path);
  file << text;
}

FilterMode parse_mode(const std::string& s) {
  if (s == "1d") return FilterMode::one_d;
  if (s == "2d") return FilterMode::two_d;
  throw UsageError("--mode must be 1d or 2d");
}

CriteriaSelection parse_criteria(const std::string& s) {
  CriteriaSelection sel{false, false, false};
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "v") {
      sel.voltage = true;
    } else if (item == "dci") {
      sel.direct_current = true;
    } else if (item == "cci") {
      sel.calculated_current = true;
    } else {
      throw UsageError("unknown criterion '" + item + "' (expected v, dci, cci)");
    }
  }
  if (!sel.any()) throw UsageError("--criteria selects nothing");
  return sel;
}

MedianRule parse_median(const std::string& s) {
  if (s == "magnitude") return MedianRule::magnitude;
  if (s == "vector") return MedianRule::vector;
  throw UsageError("--median must be magnitude or vector");
}

LayoutKind parse_layout(const std::string& s) {
  if (s == "ohmic") return LayoutKind::ohmic;
  if (s == "full") return LayoutKind::full;
  throw UsageError("--estimator must be ohmic or full");
}

ReportFormat parse_format(const std::string& s) {
  try {
    return parse_report_format(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

TrialConfig to_config(const CliOptions& o) {
  TrialConfig c;
  c.grid = o.grid;
  c.trials = o.trials;
  c.seed = o.seed;
  c.sigma = o.sigma;
  c.variation = o.variation;
  c.drift_fraction = o.drift;
  c.thresholds = {o.threshold, o.current_threshold};
  c.epsilon = o.epsilon;
  c.mode = parse_mode(o.mode);
  c.criteria = parse_criteria(o.criteria);
  c.median = parse_median(o.median);
  c.estimator_layout = parse_layout(o.layout);
  c.refine = o.refine;
  c.attack_enabled = !o.no_attack;
  c.min_targets = o.min_targets;
  c.max_targets = o.max_targets;
  c.threads = o.threads;
  return c;
}

void add_grid(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--grid", o.grid, "grid file, or 'default7' for the bundled 7-bus grid");
}

void add_detection(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--threshold", o.threshold, "voltage anomaly threshold")->check(CLI::PositiveNumber);
  cmd->add_option("--current-threshold", o.current_threshold, "current imbalance threshold (pu)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--epsilon", o.epsilon, "refinement tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--mode", o.mode, "1d or 2d");
  cmd->add_option("--criteria", o.criteria, "comma list of v, dci, cci");
  cmd->add_option("--median", o.median, "magnitude or vector");
  cmd->add_flag("--refine", o.refine, "run the false-alarm refinement stage");
}

int run_simulate(const CliOptions& o, std::ostream& out) {
  const auto topology = resolve_grid(o.grid);
  Rng rng = make_rng(o.seed);
  const auto states = synthesize_state_series(topology, o.variation, o.drift, rng);
  const auto snaps = time_series(topology, states, NoiseModel(o.sigma), rng);
  emit(o.out, write_measurements(snaps), out);
  return 0;
}

int run_attack(const CliOptions& o, std::ostream& out) {
  if (o.in.empty()) throw UsageError("attack needs --in SNAPSHOTS");
  const auto topology = resolve_grid(o.grid);
  auto snaps = read_measurements(read_file(o.in));
  if (snaps.empty()) throw std::runtime_error("no snapshots in " + o.in);
  auto& target = snaps.back();
  require_complete(topology, target);

  const auto layout = MeasurementLayout::make(topology, parse_layout(o.layout));
  const auto h = build_h(topology, layout);
  AttackInstance attack;
  if (!o.replay.empty()) {
    attack = attack_from_shift(h, topology, read_attack(read_file(o.replay)));
  } else {
    Rng rng = make_rng(o.seed);
    AttackSpec spec;
    spec.target_buses = choose_targets(topology, o.min_targets, o.max_targets, rng);
    attack = make_attack(h, topology, spec, rng);
  }
  const auto weights = Weights::uniform(layout.size(), o.sigma > 0.0 ? o.sigma : 0.002);
  if (!verify_stealth(h, weights, measurement_vector(layout, target), attack, 0.05)) {
    throw std::runtime_error("attack is not stealthy against the estimator");
  }
  target = apply_attack(target, attack, layout);
  emit(o.out, write_measurements(snaps), out);
  if (!o.attack_out.empty()) emit(o.attack_out, write_attack(attack), out);
  return 0;
}

int run_detect(const CliOptions& o, std::ostream& out) {
  if (o.in.empty()) throw UsageError("detect needs --in SNAPSHOTS");
  const auto topology = resolve_grid(o.grid);
  auto snaps = read_measurements(read_file(o.in));
  if (snaps.empty()) throw std::runtime_error("no snapshots in " + o.in);
  for (const auto& s : snaps) require_complete(topology, s);

  DetectionOptions opts;
  opts.thresholds = {o.threshold, o.current_threshold};
  opts.mode = parse_mode(o.mode);
  opts.criteria = parse_criteria(o.criteria);
  opts.median = parse_median(o.median);
  std::span<const MeasurementSet> input(snaps);
  if (opts.mode == FilterMode::one_d) {
    input = input.last(1);
  } else if (snaps.size() != 3) {
    throw std::runtime_error("2d detection needs exactly 3 snapshots, file has " +
                             std::to_string(snaps.size()));
  }
  const auto verdict = detect(topology, input, opts);
  std::string text = write_verdict(verdict);
  if (o.refine) {
    const auto refined = refine(verdict, topology, snaps.back(), {o.epsilon, ClearingRule::any});
    text += '\n' + write_refinement(refined, topology);
  }
  emit(o.out, text, out);
  return 0;
}

int run_montecarlo_cmd(const CliOptions& o, std::ostream& out) {
  const auto config = to_config(o);
  config.validate();
  const auto stats = run_montecarlo(config);
  if (!o.out.empty()) emit(o.out, report(stats, ReportFormat::csv), out);
  out << report(stats, parse_format(o.format));
  return 0;
}

int run_report(const CliOptions& o, std::ostream& out) {
  if (o.in.empty()) throw UsageError("report needs --in STATS");
  const auto summary = read_stats_csv(read_file(o.in));
  emit(o.out, report(summary, parse_format(o.format)), out);
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Median-filter detection of false data injection in PMU state estimation", "gridmf"};
  app.require_subcommand(1);
  CliOptions o;

  auto* simulate = app.add_subcommand("simulate", "write noisy snapshots for t1..t3");
  add_grid(simulate, o);
  simulate->add_option("--seed", o.seed);
  simulate->add_option("--sigma", o.sigma, "PMU noise per component (pu)")->check(CLI::NonNegativeNumber);
  simulate->add_option("--variation", o.variation)->check(CLI::Range(0.0, 0.49));
  simulate->add_option("--drift", o.drift, "t2/t3 drift as a fraction of the variation")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--out", o.out);

  auto* attack = app.add_subcommand("attack", "inject a stealthy attack into the latest snapshot");
  add_grid(attack, o);
  attack->add_option("--in", o.in, "snapshot file")->required();
  attack->add_option("--seed", o.seed);
  attack->add_option("--sigma", o.sigma, "noise level used for estimator weights")
      ->check(CLI::NonNegativeNumber);
  attack->add_option("--min-targets", o.min_targets)->check(CLI::PositiveNumber);
  attack->add_option("--max-targets", o.max_targets)->check(CLI::PositiveNumber);
  attack->add_option("--estimator", o.layout, "ohmic or full");
  attack->add_option("--replay", o.replay, "attack instance file to replay");
  attack->add_option("--out", o.out, "attacked snapshots");
  attack->add_option("--attack-out", o.attack_out, "attack instance");

  auto* detect_cmd = app.add_subcommand("detect", "run the detector on stored snapshots");
  add_grid(detect_cmd, o);
  add_detection(detect_cmd, o);
  detect_cmd->add_option("--in", o.in, "snapshot file")->required();
  detect_cmd->add_option("--out", o.out);

  auto* mc = app.add_subcommand("montecarlo", "run the full Monte Carlo experiment");
  add_grid(mc, o);
  add_detection(mc, o);
  mc->add_option("--trials", o.trials)->check(CLI::PositiveNumber);
  mc->add_option("--seed", o.seed);
  mc->add_option("--sigma", o.sigma)->check(CLI::NonNegativeNumber);
  mc->add_option("--variation", o.variation)->check(CLI::Range(0.0, 0.49));
  mc->add_option("--drift", o.drift)->check(CLI::NonNegativeNumber);
  mc->add_option("--min-targets", o.min_targets)->check(CLI::NonNegativeNumber);
  mc->add_option("--max-targets", o.max_targets)->check(CLI::PositiveNumber);
  mc->add_option("--estimator", o.layout, "ohmic or full");
  mc->add_flag("--no-attack", o.no_attack, "clean-system run");
  mc->add_option("--threads", o.threads)->check(CLI::PositiveNumber);
  mc->add_option("--format", o.format, "table or csv");
  mc->add_option("--out", o.out, "statistics csv");

  auto* rep = app.add_subcommand("report", "reformat stored statistics");
  rep->add_option("--in", o.in, "statistics csv")->required();
  rep->add_option("--format", o.format, "table or csv");
  rep->add_option("--out", o.out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) return run_simulate(o, out);
    if (attack->parsed()) return run_attack(o, out);
    if (detect_cmd->parsed()) return run_detect(o, out);
    if (mc->parsed()) return run_montecarlo_cmd(o, out);
    if (rep->parsed()) return run_report(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace gridmf
