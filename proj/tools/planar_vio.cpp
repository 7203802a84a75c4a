#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pvio/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

int log_level() {
  const char* v = std::getenv("PLANAR_VIO_LOG");
  return v ? std::atoi(v) : 0;
}

void logmsg(int level, const std::string& msg) {
  if (log_level() >= level) std::cerr << "[planar_vio] " << msg << "\n";
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw pvio::ParseError("no such file: " + path);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw pvio::ParseError("cannot open " + path.string() + " for writing");
  return f;
}

void write_innovation_log(const fs::path& path, const std::vector<pvio::FrameLog>& frames) {
  auto f = open_out(path);
  f << "t,nis,accepted,i1,i2,i3,i4,i5,i6,i7,i8\n";
  char buf[64];
  for (const auto& r : frames) {
    std::snprintf(buf, sizeof(buf), "%.9f,%.17g,%d", r.t, r.nis, r.accepted ? 1 : 0);
    f << buf;
    for (int i = 0; i < 8; ++i) {
      std::snprintf(buf, sizeof(buf), ",%.17g", r.innovation(i));
      f << buf;
    }
    f << '\n';
  }
}

void write_latency_csv(const fs::path& path, const std::vector<pvio::LatencyRecord>& recs) {
  auto f = open_out(path);
  f << "visual_ms,propagation_ms,update_ms,total_ms\n";
  char buf[160];
  for (const auto& r : recs) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f\n", r.visual_ms, r.propagation_ms,
                  r.update_ms, r.total_ms());
    f << buf;
  }
}

int cmd_simulate(const std::string& scenario_path, const std::string& config_path,
                 const std::string& out_dir, long long seed, bool has_seed) {
  require_file(scenario_path);
  require_file(config_path);
  const pvio::FilterConfig cfg = pvio::read_filter_config(config_path);
  pvio::ScenarioSpec sc = pvio::read_scenario(scenario_path);
  if (has_seed) {
    sc.trajectory.seed = static_cast<uint64_t>(seed);
    sc.noise.seed = static_cast<uint64_t>(seed) ^ 0x7f4a7c15ULL;
  }

  logmsg(1, "generating dataset into " + out_dir);
  const pvio::Dataset ds = pvio::generate_dataset(sc, cfg, false);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  pvio::write_imu_csv((dir / "imu.csv").string(), ds.imu.samples);
  std::vector<pvio::FlowMeasurement> meas;
  std::vector<pvio::ErrorVariancePair> errvar;
  for (const auto& m : ds.measurements) {
    meas.push_back(m.meas);
    for (int i = 0; i < 8; ++i) {
      errvar.push_back({std::abs(m.meas.flow(i) - m.true_flow_px(i)),
                        m.meas.r_net.matrix()(i, i)});
    }
  }
  pvio::write_measurement_csv((dir / "meas.csv").string(), meas);
  pvio::write_tum((dir / "gt.tum").string(), ds.ground_truth);
  pvio::write_error_variance_csv((dir / "errvar.csv").string(), errvar);

  pvio::InitialState init;
  init.t = ds.frame_t.front();
  init.state = pvio::truth_state(sc.trajectory, init.t);
  pvio::write_initial_state((dir / "initial_state.txt").string(), init);
  pvio::write_scenario((dir / "scenario.txt").string(), sc);

  auto manifest = open_out(dir / "manifest.txt");
  manifest << "mode simulate\nscenario " << scenario_path << "\nconfig " << config_path
           << "\nseed " << sc.trajectory.seed << "\nimu_rows " << ds.imu.samples.size() << "\nmeasurement_rows " << meas.size()
           << "\nfiles imu.csv meas.csv gt.tum errvar.csv initial_state.txt scenario.txt\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& imu_path,
            const std::string& meas_path, const std::string& out_dir,
            const std::string& init_path, const std::string& scenario_path, double height,
            bool use_prior, bool gate, long long seed) {
  require_file(config_path);
  require_file(imu_path);
  require_file(meas_path);
  pvio::FilterConfig cfg = pvio::read_filter_config(config_path);
  if (gate) cfg.gate = true;

  const std::vector<pvio::ImuSample> imu = pvio::read_imu_csv(imu_path);
  std::vector<pvio::FlowMeasurement> meas = pvio::read_measurement_csv(meas_path);

  pvio::RunOptions opts;
  opts.initial_height = height;
  if (!init_path.empty()) {
    require_file(init_path);
    opts.init = pvio::read_initial_state(init_path);
  }

  logmsg(1, "running filter over " + std::to_string(meas.size()) + " frames");
  pvio::RunResult res;
  if (use_prior) {
    // the frontend is re-simulated online so residuals are taken against the
    // filter's own flow prior
    if (scenario_path.empty()) {
      throw pvio::ParseError("--use-prior needs --scenario to re-simulate the frontend");
    }
    require_file(scenario_path);
    const pvio::ScenarioSpec sc = pvio::read_scenario(scenario_path);
    const pvio::Dataset ds = pvio::generate_dataset(sc, cfg, false);
    res = pvio::run_simulated_frontend(cfg, ds, true, static_cast<uint64_t>(seed), opts);
  } else {
    res = pvio::run_filter(cfg, imu, meas, opts);
  }

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  pvio::write_tum((dir / "est.tum").string(), res.trajectory);
  write_innovation_log(dir / "innovations.csv", res.frames);
  write_latency_csv(dir / "latency.csv", res.latency);

  if (res.diverged) {
    std::cerr << "filter diverged; last good timestamp " << res.last_good_time << "\n";
    return 3;
  }
  return 0;
}

int cmd_evaluate(const std::string& est_path, const std::string& gt_path,
                 const std::vector<double>& lengths, const std::string& errvar_path,
                 const std::string& out_dir) {
  require_file(est_path);
  require_file(gt_path);
  const pvio::Trajectory est = pvio::read_tum(est_path);
  const pvio::Trajectory gt = pvio::read_tum(gt_path);

  const pvio::Alignment al = pvio::align_posyaw(est, gt);
  const double ate = pvio::ate_rmse(al.aligned, gt);
  std::printf("alignment yaw_rad %.9f translation %.6f %.6f %.6f\n", al.yaw, al.translation.x(),
              al.translation.y(), al.translation.z());
  std::printf("ate_rmse_m %.9f\n", ate);

  std::vector<pvio::ErrorDistribution> rel;
  if (!lengths.empty()) {
    rel = pvio::relative_translation_errors(al.aligned, gt, lengths);
    std::printf("length_m count min q1 median q3 max\n");
    for (const auto& d : rel) {
      std::printf("%.3f %zu %.6f %.6f %.6f %.6f %.6f\n", d.length, d.count, d.min, d.q1,
                  d.median, d.q3, d.max);
    }
  }

  double ause_val = 0.0, inside = 0.0;
  bool have_errvar = false;
  if (!errvar_path.empty()) {
    require_file(errvar_path);
    const auto pairs = pvio::read_error_variance_csv(errvar_path);
    ause_val = pvio::ause(pairs, 10);
    inside = pvio::inside_rate(pairs, 3.0);
    have_errvar = true;
    std::printf("ause %.9f\ninside_rate_3sigma_pct %.4f\n", ause_val, inside);
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    auto f = open_out(dir / "metrics.csv");
    f << "metric,value\n";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "ate_rmse_m,%.17g\n", ate);
    f << buf;
    std::snprintf(buf, sizeof(buf), "yaw_rad,%.17g\n", al.yaw);
    f << buf;
    for (int i = 0; i < 3; ++i) {
      std::snprintf(buf, sizeof(buf), "translation_%c,%.17g\n", "xyz"[i], al.translation(i));
      f << buf;
    }
    if (have_errvar) {
      std::snprintf(buf, sizeof(buf), "ause,%.17g\n", ause_val);
      f << buf;
      std::snprintf(buf, sizeof(buf), "inside_rate_3sigma_pct,%.17g\n", inside);
      f << buf;
    }
    if (!rel.empty()) {
      auto g = open_out(dir / "relative_errors.csv");
      g << "length_m,count,min,q1,median,q3,max\n";
      for (const auto& d : rel) {
        std::snprintf(buf, sizeof(buf), "%.17g,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", d.length,
                      d.count, d.min, d.q1, d.median, d.q3, d.max);
        g << buf;
      }
    }
  }
  return 0;
}

int cmd_montecarlo(const std::string& scenario_path, const std::string& config_path, int runs,
                   long long seed, const std::string& out_dir) {
  require_file(scenario_path);
  require_file(config_path);
  const pvio::FilterConfig cfg = pvio::read_filter_config(config_path);
  const pvio::ScenarioSpec sc = pvio::read_scenario(scenario_path);

  logmsg(1, "monte carlo, " + std::to_string(runs) + " runs");
  const pvio::ConsistencyResult mc =
      pvio::monte_carlo(sc, cfg, runs, static_cast<uint64_t>(seed));

  double ate_mean = 0.0;
  for (double a : mc.ate) ate_mean += a;
  if (!mc.ate.empty()) ate_mean /= static_cast<double>(mc.ate.size());

  std::printf("runs %zu failed %zu\n", mc.runs, mc.failed_runs);
  std::printf("nees_bounds %.6f %.6f\n", mc.lower_bound, mc.upper_bound);
  std::printf("fraction_within %.4f\nfraction_above %.4f\n", mc.fraction_within,
              mc.fraction_above);
  std::printf("ate_rmse_mean_m %.9f\n", ate_mean);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto f = open_out(fs::path(out_dir) / "nees.csv");
    f << "t,average_nees,lower,upper\n";
    char buf[160];
    for (size_t k = 0; k < mc.frame_t.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.9f,%.17g,%.17g,%.17g\n", mc.frame_t[k],
                    mc.average_nees[k], mc.lower_bound, mc.upper_bound);
      f << buf;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar-homography visual-inertial odometry tools"};
  app.require_subcommand(1);

  std::string scenario_path, config_path, imu_path, meas_path, est_path, gt_path, out_dir,
      init_path, errvar_path;
  long long seed = 0;
  bool has_seed = false;
  bool use_prior = false, gate = false;
  double height = 1.0;
  int runs = 2;
  std::vector<double> lengths;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim->add_option("--scenario", scenario_path, "scenario file")->required();
  sim->add_option("--config", config_path, "filter config file")->required();
  sim->add_option("--out", out_dir, "output directory")->required();
  sim->add_option("--seed", seed, "override the scenario seed")
      ->each([&](const std::string&) { has_seed = true; });

  auto* run = app.add_subcommand("run", "run the filter over a dataset");
  run->add_option("--config", config_path, "filter config file")->required();
  run->add_option("--imu", imu_path, "IMU csv")->required();
  run->add_option("--meas", meas_path, "measurement csv")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--init", init_path, "initial state file (else stationary initialization)");
  run->add_option("--height", height, "initial height for stationary initialization");
  run->add_option("--scenario", scenario_path, "scenario file, needed with --use-prior");
  run->add_option("--seed", seed, "frontend noise seed with --use-prior");
  run->add_flag("--use-prior", use_prior, "residual measurements against the filter's prior");
  run->add_flag("--gate", gate, "enable the innovation gate");

  auto* ev = app.add_subcommand("evaluate", "trajectory metrics");
  ev->add_option("--est", est_path, "estimated trajectory (tum)")->required();
  ev->add_option("--gt", gt_path, "ground-truth trajectory (tum)")->required();
  ev->add_option("--lengths", lengths, "sub-trajectory lengths in meters");
  ev->add_option("--errvar", errvar_path, "error/variance csv for AUSE and inside rate");
  ev->add_option("--out", out_dir, "output directory for metric csvs");

  auto* mc = app.add_subcommand("montecarlo", "filter consistency study");
  mc->add_option("--scenario", scenario_path, "scenario file")->required();
  mc->add_option("--config", config_path, "filter config file")->required();
  mc->add_option("--runs", runs, "number of runs")->required();
  mc->add_option("--seed", seed, "base seed");
  mc->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(scenario_path, config_path, out_dir, seed, has_seed);
    }
    if (run->parsed()) {
      return cmd_run(config_path, imu_path, meas_path, out_dir, init_path, scenario_path,
                     height, use_prior, gate, seed);
    }
    if (ev->parsed()) return cmd_evaluate(est_path, gt_path, lengths, errvar_path, out_dir);
    if (mc->parsed()) {
      return cmd_montecarlo(scenario_path, config_path, runs, seed, out_dir);
    }
  } catch (const pvio::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pvio::Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
