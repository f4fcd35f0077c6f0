// tbsim: time-bin entanglement receiver simulator.
//
// Subcommands map the library onto reproducible file recipes:
//   jti        analytic or Monte Carlo joint temporal intensities
//   gen        timetag stream generation (TTAG binary)
//   correlate  coincidence histograms / folded JTIs / CAR from tag files
//   bell       phase sweep, fringe fit, CHSH violation report
//
// Exit codes: 0 ok, 2 config error, 3 I/O error, 4 data integrity error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "timebin/analysis.hpp"
#include "timebin/analytic.hpp"
#include "timebin/config.hpp"
#include "timebin/correlator.hpp"
#include "timebin/errors.hpp"
#include "timebin/io.hpp"

namespace fs = std::filesystem;
using namespace timebin;

namespace {

using Json = nlohmann::ordered_json;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> mode_override;
};

ExperimentConfig load_config(const CommonOpts& opts) {
  ExperimentConfig cfg =
      opts.config_path.empty() ? default_config() : ExperimentConfig::load(opts.config_path);
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  if (opts.mode_override) {
    if (*opts.mode_override == "active")
      cfg.mode = DeviceMode::active;
    else if (*opts.mode_override == "passive")
      cfg.mode = DeviceMode::passive;
    else
      throw ConfigError("--mode: expected active|passive");
  }
  cfg.validate();
  return cfg;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw IoError("failed writing: " + path);
}

void print_warnings(const PropagationResult& result) {
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_jti(const CommonOpts& opts, const std::string& stage, const std::string& method,
            std::uint64_t pulses, bool no_smear) {
  ExperimentConfig cfg = load_config(opts);
  ensure_out_dir(opts.out_dir);

  const double sigma = cfg.device.pulse_sigma_ps();
  const double jitter =
      0.5 * (cfg.detector_signal.jitter_fwhm_ps + cfg.detector_idler.jitter_fwhm_ps);
  GridSpec grid;
  grid.bin_ps = cfg.correlator.jti_bin_ps;
  grid.min_ps = -cfg.correlator.pump_period_ps / 2.0;
  grid.n_bins =
      static_cast<int>(std::ceil(cfg.correlator.pump_period_ps / cfg.correlator.jti_bin_ps));

  Json summary;
  summary["config_digest"] = cfg.digest();
  summary["stage"] = stage;
  summary["method"] = method;

  LobeSet lobes;
  if (stage == "input") {
    lobes = input_state_lobes(TimeBinState::bell(cfg.phi_p_rad), cfg.device.t_s_ps, sigma);
  } else {
    DeviceMode mode = stage == "active" ? DeviceMode::active : DeviceMode::passive;
    PropagationResult result = propagate(TimeBinState::bell(cfg.phi_p_rad), cfg.device, mode,
                                         cfg.phases(), cfg.topology);
    print_warnings(result);
    lobes = result.port(cfg.detector_signal.monitor_port, cfg.detector_idler.monitor_port);
    summary["total_probability_all_ports"] = result.total_probability();
  }
  summary["lobe_count"] = lobes.lobes.size();
  summary["port_probability"] = lobes.total_probability();
  summary["schmidt_number"] = schmidt_number(lobes);

  if (method == "analytic") {
    Jti jti = rasterize_jti(lobes, grid);
    if (!no_smear) jti = smear(jti, jitter);
    write_csv((fs::path(opts.out_dir) / "jti.csv").string(), jti);
    GridSpec dgrid = GridSpec::cover_delay(lobes, 8.0 + jitter, cfg.correlator.bin_ps);
    DelayHistogram hist = project_delay(lobes, dgrid);
    if (!no_smear) hist = smear(hist, jitter);
    write_csv((fs::path(opts.out_dir) / "delay.csv").string(), hist);
  } else {
    if (stage == "input") throw ConfigError("montecarlo JTI needs a device stage");
    DeviceMode mode = stage == "active" ? DeviceMode::active : DeviceMode::passive;
    PropagationResult dist = propagate(TimeBinState::bell(cfg.phi_p_rad), cfg.device, mode,
                                       cfg.phases(), cfg.topology);
    PairBatch batch = sample_pairs(pulses, cfg.source, dist, cfg.seed, 4);
    TimeTagStream tags = detect(batch, cfg.effective_detector(cfg.detector_signal),
                                cfg.effective_detector(cfg.detector_idler), cfg.seed);
    std::vector<std::int64_t> ch_s = tags.channel_times(0);
    std::vector<std::int64_t> ch_i = tags.channel_times(1);
    TriggerSpec trig{cfg.correlator.pump_period_ps, 0.5 * cfg.correlator.pump_period_ps};
    Jti2dCounts counts = fold_jti(ch_s, ch_i, trig, cfg.correlator);
    write_csv((fs::path(opts.out_dir) / "jti_counts.csv").string(), counts);
    summary["pulses"] = pulses;
    summary["coincidences"] = counts.coincidences;
    summary["tags_signal"] = counts.tags_s;
    summary["tags_idler"] = counts.tags_i;
  }
  write_json((fs::path(opts.out_dir) / "jti_summary.json").string(), summary);
  return 0;
}

int cmd_gen(const CommonOpts& opts, std::uint64_t pulses, const std::string& out_file,
            bool csv) {
  ExperimentConfig cfg = load_config(opts);
  PropagationResult dist = propagate(TimeBinState::bell(cfg.phi_p_rad), cfg.device, cfg.mode,
                                     cfg.phases(), cfg.topology);
  print_warnings(dist);

  DistributionRebuild rebuild;
  if (cfg.source.pump_phase_jitter_rms_rad > 0.0) {
    rebuild = [&cfg](double dphi) {
      PhaseSettings ph = cfg.phases();
      ph.phi_p += dphi;
      return propagate(TimeBinState::bell(ph.phi_p), cfg.device, cfg.mode, ph, cfg.topology);
    };
  }
  PairBatch batch = sample_pairs(pulses, cfg.source, dist, cfg.seed, 4, rebuild);
  TimeTagStream tags = detect(batch, cfg.effective_detector(cfg.detector_signal),
                              cfg.effective_detector(cfg.detector_idler), cfg.seed);
  tags.header.params_digest = cfg.digest();

  fs::path out(out_file);
  if (out.has_parent_path()) ensure_out_dir(out.parent_path().string());
  if (csv)
    write_tags_csv(out_file, tags);
  else
    write_ttag(out_file, tags);
  std::fprintf(stderr, "wrote %zu tags from %llu pulses to %s\n", tags.events.size(),
               static_cast<unsigned long long>(pulses), out_file.c_str());
  return 0;
}

int cmd_correlate(const std::vector<std::string>& tag_files, const CommonOpts& opts,
                  std::optional<double> window, std::optional<double> bin, bool want_jti) {
  ExperimentConfig cfg = load_config(opts);
  CoincidenceConfig ccfg = cfg.correlator;
  if (window) ccfg.window_ps = *window;
  if (bin) ccfg.bin_ps = *bin;
  ensure_out_dir(opts.out_dir);

  TimeTagStream merged;
  for (const std::string& file : tag_files) {
    TimeTagStream part = file.size() > 4 && file.substr(file.size() - 4) == ".csv"
                             ? read_tags_csv(file)
                             : read_ttag(file);
    if (merged.events.empty()) merged.header = part.header;
    merged.events.insert(merged.events.end(), part.events.begin(), part.events.end());
  }
  std::vector<std::int64_t> ch_s = merged.channel_times(0);
  std::vector<std::int64_t> ch_i = merged.channel_times(1);

  CoincidenceResult res = coincide(ch_s, ch_i, ccfg);
  write_csv((fs::path(opts.out_dir) / "histogram.csv").string(), res.to_histogram());

  AccidentalEstimate acc = estimate_accidentals(ch_s, ch_i, ccfg);

  Json summary;
  summary["tags_signal"] = ch_s.size();
  summary["tags_idler"] = ch_i.size();
  summary["pairs_in_window"] = res.pairs_in_window;
  summary["accidental_counts"] = acc.accidental_counts;
  if (acc.infinite) {
    summary["car_ratio"] = nullptr;
    summary["car_excess"] = nullptr;
  } else {
    summary["car_ratio"] = acc.car_ratio;
    summary["car_excess"] = acc.car_excess;
  }
  summary["window_ps"] = ccfg.window_ps;
  summary["bin_ps"] = ccfg.bin_ps;
  summary["range_ps"] = ccfg.range_ps;
  summary["accidental_offset_periods"] = ccfg.accidental_offset_periods;
  summary["duration_ps"] = merged.header.duration_ps;
  if (merged.header.duration_ps > 0.0) {
    double seconds = merged.header.duration_ps * 1e-12;
    summary["singles_rate_signal_hz"] = ch_s.size() / seconds;
    summary["singles_rate_idler_hz"] = ch_i.size() / seconds;
    summary["coincidence_rate_hz"] = res.pairs_in_window / seconds;
  }
  summary["params_digest"] = merged.header.params_digest;

  if (want_jti) {
    TriggerSpec trig{ccfg.pump_period_ps, 0.5 * ccfg.pump_period_ps};
    Jti2dCounts counts = fold_jti(ch_s, ch_i, trig, ccfg);
    write_csv((fs::path(opts.out_dir) / "jti_counts.csv").string(), counts);
    summary["jti_coincidences"] = counts.coincidences;
  }
  write_json((fs::path(opts.out_dir) / "correlate_summary.json").string(), summary);
  return 0;
}

int cmd_bell(const CommonOpts& opts, int phases, std::uint64_t pulses_per_point,
             const std::string& method, bool subtract, std::optional<double> window) {
  ExperimentConfig cfg = load_config(opts);
  ensure_out_dir(opts.out_dir);

  SweepPath path = method == "analytic" ? SweepPath::analytic : SweepPath::montecarlo;
  BellCurve curve = run_bell_sweep(cfg, phases, pulses_per_point, path, window);
  write_csv((fs::path(opts.out_dir) / "bell_curve.csv").string(), curve);

  FringeFit fit = fit_fringe(curve, subtract);
  ViolationReport report = violation_sigmas(fit);

  Json out;
  out["config_digest"] = cfg.digest();
  out["mode"] = cfg.mode == DeviceMode::active ? "active" : "passive";
  out["method"] = method;
  out["subtract_accidentals"] = subtract;
  out["n_points"] = fit.n_points;
  out["offset"] = fit.offset;
  out["offset_err"] = fit.offset_err;
  out["visibility"] = fit.visibility;
  out["visibility_err"] = fit.visibility_err;
  out["phase_rad"] = fit.phase_rad;
  out["phase_err"] = fit.phase_err;
  out["chi2_dof"] = fit.chi2_dof;
  out["s_value"] = report.s_value;
  out["s_err"] = report.s_err;
  out["violation_sigmas"] = report.sigmas;
  write_json((fs::path(opts.out_dir) / "fit.json").string(), out);

  std::printf("V = %.4f +- %.4f  S = %.4f +- %.4f  violation = %.1f sigma\n", fit.visibility,
              fit.visibility_err, report.s_value, report.s_err, report.sigmas);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-bin entanglement receiver simulator"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string stage = "passive", method = "analytic";
  std::uint64_t pulses = 1000000;
  bool no_smear = false, csv = false, want_jti = false, subtract = false;
  std::string out_file = "tags.ttag";
  std::vector<std::string> tag_files;
  std::optional<double> window, bin, central_window;
  int phases = 16;
  std::uint64_t pulses_per_point = 200000;

  auto add_common = [&](CLI::App* sub, bool with_mode) {
    sub->add_option("--config", opts.config_path, "experiment config JSON");
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { opts.seed_override = v; },
        "seed override");
    if (with_mode)
      sub->add_option_function<std::string>(
          "--mode", [&](const std::string& v) { opts.mode_override = v; },
          "active|passive override");
  };

  CLI::App* jti = app.add_subcommand("jti", "joint temporal intensity maps");
  add_common(jti, false);
  jti->add_option("--stage", stage, "input|passive|active")->default_str("passive");
  jti->add_option("--method", method, "analytic|montecarlo")->default_str("analytic");
  jti->add_option("--pulses", pulses, "pump pulses (montecarlo)");
  jti->add_flag("--no-smear", no_smear, "skip detector-jitter smearing (analytic)");

  CLI::App* gen = app.add_subcommand("gen", "generate a timetag stream");
  add_common(gen, true);
  gen->add_option("--pulses", pulses, "pump pulses");
  gen->add_option("--out-file", out_file, "output tag file (.ttag or .csv)");
  gen->add_flag("--csv", csv, "write CSV instead of TTAG binary");

  CLI::App* corr = app.add_subcommand("correlate", "coincidence analysis of tag files");
  add_common(corr, false);
  corr->add_option("files", tag_files, "tag files (.ttag or .csv)")->required();
  corr->add_option_function<double>(
      "--window", [&](const double& v) { window = v; }, "coincidence window (ps)");
  corr->add_option_function<double>(
      "--bin", [&](const double& v) { bin = v; }, "histogram bin (ps)");
  corr->add_flag("--jti", want_jti, "also write the trigger-folded JTI counts");

  CLI::App* bell = app.add_subcommand("bell", "phase sweep + fringe fit");
  add_common(bell, true);
  bell->add_option("--phases", phases, "number of phase points");
  bell->add_option("--pulses-per-point", pulses_per_point, "pump pulses per phase point");
  bell->add_option("--method", method, "analytic|montecarlo")->default_str("analytic");
  bell->add_flag("--subtract-accidentals", subtract, "subtract accidentals before fitting");
  bell->add_option_function<double>(
      "--central-window", [&](const double& v) { central_window = v; },
      "post-selected coincidence window (ps) for comparison runs");

  try {
    app.parse(argc, argv);
    if (stage != "input" && stage != "passive" && stage != "active")
      throw ConfigError("--stage: expected input|passive|active");
    if (method != "analytic" && method != "montecarlo")
      throw ConfigError("--method: expected analytic|montecarlo");

    if (jti->parsed()) return cmd_jti(opts, stage, method, pulses, no_smear);
    if (gen->parsed()) return cmd_gen(opts, pulses, out_file, csv);
    if (corr->parsed()) return cmd_correlate(tag_files, opts, window, bin, want_jti);
    if (bell->parsed())
      return cmd_bell(opts, phases, pulses_per_point, method, subtract, central_window);
    return 2;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
