#include "pvio/pipeline.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Dense>

namespace pvio {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

ErrorCovariance initial_covariance(const FilterConfig& cfg) {
  ErrorCovariance p = ErrorCovariance::Zero();
  p.block<3, 3>(kIdxP, kIdxP) = cfg.init_sigma_p * cfg.init_sigma_p * Eigen::Matrix3d::Identity();
  p.block<3, 3>(kIdxTheta, kIdxTheta) =
      cfg.init_sigma_theta * cfg.init_sigma_theta * Eigen::Matrix3d::Identity();
  p.block<3, 3>(kIdxV, kIdxV) = cfg.init_sigma_v * cfg.init_sigma_v * Eigen::Matrix3d::Identity();
  p.block<3, 3>(kIdxBa, kIdxBa) =
      cfg.init_sigma_ba * cfg.init_sigma_ba * Eigen::Matrix3d::Identity();
  p.block<3, 3>(kIdxBg, kIdxBg) =
      cfg.init_sigma_bg * cfg.init_sigma_bg * Eigen::Matrix3d::Identity();
  p.block<8, 8>(kIdxF, kIdxF) = 1e-12 * Eigen::Matrix<double, 8, 8>::Identity();
  return p;
}

TrajectoryPoint to_point(double t, const EkfState& s) {
  TrajectoryPoint p;
  p.t = t;
  p.position = s.position_world();
  p.attitude = s.q;
  return p;
}

}  // namespace

Dataset generate_dataset(const ScenarioSpec& scenario, const FilterConfig& cfg, bool use_prior,
                         bool imu_noise) {
  Dataset ds;
  ds.scenario = scenario;
  ds.use_prior = use_prior;
  ds.imu = synthesize_imu_detailed(scenario.trajectory, cfg, scenario.imu_rate, imu_noise);
  ds.frame_t = frame_times(scenario.trajectory, scenario.fps, scenario.noise);
  if (use_prior) {
    const std::vector<CornerFlow> priors =
        dead_reckoned_priors(scenario.trajectory, cfg, ds.imu.samples, ds.frame_t);
    ds.measurements = synthesize_measurements(scenario.trajectory, cfg, scenario.fps,
                                              scenario.noise, &priors);
  } else {
    ds.measurements =
        synthesize_measurements(scenario.trajectory, cfg, scenario.fps, scenario.noise);
  }
  for (double t : ds.frame_t) {
    const TruthSample s = sample_truth(scenario.trajectory, t);
    TrajectoryPoint p;
    p.t = t;
    p.position = s.position_world;
    p.attitude = s.attitude;
    ds.ground_truth.push_back(p);
  }
  return ds;
}

InitialState read_initial_state(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  InitialState init;
  Eigen::Vector3d p_w = Eigen::Vector3d::Zero();
  bool have_pw = false;
  std::string line;
  int ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    auto want = [&](int n, double* out) {
      for (int i = 0; i < n; ++i) {
        if (!(ss >> out[i])) {
          throw ParseError(path + ":" + std::to_string(ln) + ": bad values for " + key);
        }
      }
    };
    if (key == "t0") {
      want(1, &init.t);
    } else if (key == "p_w") {
      want(3, p_w.data());
      have_pw = true;
    } else if (key == "q_wi") {
      double q[4];
      want(4, q);
      init.state.q = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized();
    } else if (key == "v_b") {
      want(3, init.state.v.data());
    } else if (key == "ba") {
      want(3, init.state.ba.data());
    } else if (key == "bg") {
      want(3, init.state.bg.data());
    } else {
      throw ParseError(path + ":" + std::to_string(ln) + ": unknown key '" + key + "'");
    }
  }
  if (have_pw) init.state.p = init.state.q.toRotationMatrix().transpose() * p_w;
  return init;
}

void write_initial_state(const std::string& path, const InitialState& init) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open " + path + " for writing");
  const Eigen::Vector3d p_w = init.state.position_world();
  f.precision(17);
  f << "t0 " << init.t << "\n";
  f << "p_w " << p_w.x() << ' ' << p_w.y() << ' ' << p_w.z() << "\n";
  f << "q_wi " << init.state.q.w() << ' ' << init.state.q.x() << ' ' << init.state.q.y() << ' '
    << init.state.q.z() << "\n";
  f << "v_b " << init.state.v.x() << ' ' << init.state.v.y() << ' ' << init.state.v.z() << "\n";
  f << "ba " << init.state.ba.x() << ' ' << init.state.ba.y() << ' ' << init.state.ba.z()
    << "\n";
  f << "bg " << init.state.bg.x() << ' ' << init.state.bg.y() << ' ' << init.state.bg.z()
    << "\n";
}

RunResult run_filter(const FilterConfig& cfg, const std::vector<ImuSample>& imu,
                     const std::vector<FlowMeasurement>& meas, const RunOptions& opts) {
  if (imu.empty()) throw EmptyInput("run_filter: no IMU samples");

  EkfState x0;
  ErrorCovariance p0 = initial_covariance(cfg);
  double t0 = imu.front().t;
  size_t imu_start = 0;
  if (opts.init) {
    x0 = opts.init->state;
    t0 = opts.init->t;
  } else {
    std::vector<ImuSample> window;
    for (const auto& s : imu) {
      if (s.t - imu.front().t > opts.stationary_window) break;
      window.push_back(s);
    }
    const Propagated init = initialize(window, opts.initial_height, cfg);
    x0 = init.state;
    p0 = init.cov;
    t0 = window.back().t;
  }
  while (imu_start < imu.size() && imu[imu_start].t <= t0) ++imu_start;

  RunResult out;
  Filter filter(cfg, x0, p0, t0);
  // seed the held reading so propagation before the first remaining sample works
  if (imu_start > 0) filter.process_imu(ImuSample{t0, imu[imu_start - 1].accel,
                                                  imu[imu_start - 1].gyro});
  out.trajectory.push_back(to_point(t0, filter.state()));
  out.last_good_time = t0;

  size_t i = imu_start;
  double prop_ms = 0.0;
  try {
    for (const auto& m : meas) {
      if (m.t <= t0) continue;
      while (i < imu.size() && imu[i].t <= m.t) {
        const auto tic = Clock::now();
        filter.process_imu(imu[i]);
        prop_ms += ms_since(tic);
        ++i;
      }
      const auto tic = Clock::now();
      const UpdateResult r = filter.process_measurement(m);
      const double upd_ms = ms_since(tic);

      out.frames.push_back({m.t, r.innovation, r.nis, r.accepted});
      out.latency.push_back({0.0, prop_ms, upd_ms});
      prop_ms = 0.0;
      out.trajectory.push_back(to_point(m.t, filter.state()));
      out.last_good_time = m.t;
    }
  } catch (const Error&) {
    out.diverged = true;
  }
  return out;
}

RunResult run_simulated_frontend(const FilterConfig& cfg, const Dataset& ds, bool use_prior,
                                 uint64_t seed, const RunOptions& opts) {
  if (!use_prior) {
    std::vector<FlowMeasurement> meas;
    meas.reserve(ds.measurements.size());
    for (const auto& m : ds.measurements) meas.push_back(m.meas);
    return run_filter(cfg, ds.imu.samples, meas, opts);
  }

  if (!opts.init) throw EmptyInput("run_simulated_frontend: prior mode needs an exact start");
  const FrontendNoiseModel& model = ds.scenario.noise;
  std::mt19937_64 rng(seed ^ 0xa0761d6478bd642fULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto corners = cfg.intrinsics.pixel_corners();

  RunResult out;
  Filter filter(cfg, opts.init->state, initial_covariance(cfg), opts.init->t);
  out.trajectory.push_back(to_point(opts.init->t, filter.state()));
  out.last_good_time = opts.init->t;

  size_t i = 0;
  try {
    for (const auto& sm : ds.measurements) {
      const double t = sm.meas.t;
      while (i < ds.imu.samples.size() && ds.imu.samples[i].t <= t) {
        filter.process_imu(ds.imu.samples[i]);
        ++i;
      }
      filter.advance_to(t);

      // the frontend sees images pre-warped by the filter's own prior
      const Homography h_prior = flow_to_homography(prior_flow(filter.state(), cfg),
                                                    cfg.intrinsics);
      const Homography h_prior_inv = h_prior.inverse();
      FlowMeasurement m;
      m.t = t;
      m.used_prior = true;
      Eigen::Matrix<double, 8, 1> reported;
      for (int j = 0; j < 4; ++j) {
        const Eigen::Vector2d total = sm.true_flow_px.segment<2>(2 * j);
        const Eigen::Vector2d residual =
            transfer_point(h_prior_inv, corners[j] + total).point - corners[j];
        const double sigma = model.base_sigma + model.flow_scale * residual.norm();
        double var = sigma * sigma;
        Eigen::Vector2d noise(sigma * gauss(rng), sigma * gauss(rng));
        if (model.outlier_prob > 0.0 && uni(rng) < model.outlier_prob) {
          noise += Eigen::Vector2d(model.outlier_sigma * gauss(rng),
                                   model.outlier_sigma * gauss(rng));
          var += model.outlier_sigma * model.outlier_sigma;
        }
        m.flow.segment<2>(2 * j) = residual + noise;
        const double rep = var * model.variance_fidelity + 1e-10;
        reported.segment<2>(2 * j) << rep, rep;
      }
      m.r_net = FlowCovariance::FromDiagonal(reported);

      const UpdateResult r = filter.process_measurement(m);
      out.frames.push_back({t, r.innovation, r.nis, r.accepted});
      out.trajectory.push_back(to_point(t, filter.state()));
      out.last_good_time = t;
    }
  } catch (const Error&) {
    out.diverged = true;
  }
  return out;
}

Trajectory dead_reckon_trajectory(const FilterConfig& cfg, const std::vector<ImuSample>& imu,
                                  const InitialState& init, const std::vector<double>& sample_t) {
  Filter filter(cfg, init.state, ErrorCovariance::Zero(), init.t);
  Trajectory out;
  size_t i = 0;
  while (i < imu.size() && imu[i].t <= init.t) ++i;
  if (i > 0) filter.process_imu(ImuSample{init.t, imu[i - 1].accel, imu[i - 1].gyro});
  for (double t : sample_t) {
    if (t < init.t) continue;
    while (i < imu.size() && imu[i].t <= t) {
      filter.process_imu(imu[i]);
      ++i;
    }
    if (t > filter.time()) {
      if (i < imu.size()) {
        filter.process_imu(ImuSample{t, imu[i].accel, imu[i].gyro});
      } else {
        filter.process_imu(ImuSample{t, imu.back().accel, imu.back().gyro});
      }
    }
    out.push_back(to_point(t, filter.state()));
  }
  return out;
}

ConsistencyResult monte_carlo(const ScenarioSpec& scenario, const FilterConfig& cfg, int runs,
                              uint64_t base_seed) {
  if (runs < 2) throw EmptyInput("monte_carlo: need at least 2 runs");

  ConsistencyResult out;
  out.runs = static_cast<size_t>(runs);
  std::vector<std::vector<double>> nees_per_run;

  for (int r = 0; r < runs; ++r) {
    ScenarioSpec sc = scenario;
    sc.trajectory.seed = base_seed + 1000003ULL * static_cast<uint64_t>(r);
    sc.noise.seed = sc.trajectory.seed ^ 0x5bd1e995u;
    sc.noise.frame_drop_prob = 0.0;  // a shared frame grid across runs

    try {
      const Dataset ds = generate_dataset(sc, cfg, false, true);
      if (out.frame_t.empty()) {
        out.frame_t.assign(ds.frame_t.begin() + 1, ds.frame_t.end());
        nees_per_run.assign(static_cast<size_t>(runs),
                            std::vector<double>(out.frame_t.size(), 0.0));
      }

      // truth perturbed by a draw from the initial covariance
      std::mt19937_64 rng(sc.trajectory.seed ^ 0x94d049bb133111ebULL);
      std::normal_distribution<double> gauss(0.0, 1.0);
      auto draw3 = [&](double sd) -> Eigen::Vector3d {
        return sd * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
      };
      EkfState x = truth_state(sc.trajectory, 0.0);
      x.p += draw3(cfg.init_sigma_p);
      const Eigen::Vector3d dth = draw3(cfg.init_sigma_theta);
      x.q = (x.q * Eigen::Quaterniond(Eigen::AngleAxisd(
                       dth.norm(), dth.norm() > 0 ? dth.normalized()
                                                  : Eigen::Vector3d::UnitX())))
                .normalized();
      x.v += draw3(cfg.init_sigma_v);
      x.ba += draw3(cfg.init_sigma_ba);
      x.bg += draw3(cfg.init_sigma_bg);

      Filter filter(cfg, x, initial_covariance(cfg), 0.0);
      Trajectory est;
      est.push_back(to_point(0.0, filter.state()));

      size_t i = 0;
      for (size_t k = 0; k < out.frame_t.size(); ++k) {
        const double t = out.frame_t[k];
        while (i < ds.imu.samples.size() && ds.imu.samples[i].t <= t) {
          filter.process_imu(ds.imu.samples[i]);
          ++i;
        }
        if (t > filter.time()) {
          const ImuSample& hold = i < ds.imu.samples.size() ? ds.imu.samples[i]
                                                            : ds.imu.samples.back();
          filter.process_imu(ImuSample{t, hold.accel, hold.gyro});
        }

        // score the error against the pre-update covariance
        const EkfState truth = truth_state(sc.trajectory, t);
        const size_t bi = std::min(
            static_cast<size_t>(std::llround(t * sc.imu_rate)), ds.imu.true_ba.size() - 1);
        Eigen::Matrix<double, kErrorDim, 1> e;
        e.segment<3>(kIdxP) = filter.state().p - truth.p;
        const Eigen::Quaterniond dq = truth.q.conjugate() * filter.state().q;
        const Eigen::AngleAxisd aa(dq);
        e.segment<3>(kIdxTheta) = aa.angle() * aa.axis();
        e.segment<3>(kIdxV) = filter.state().v - truth.v;
        e.segment<3>(kIdxBa) = filter.state().ba - ds.imu.true_ba[bi];
        e.segment<3>(kIdxBg) = filter.state().bg - ds.imu.true_bg[bi];
        Vector8d true_flow_n;
        for (int j = 0; j < 4; ++j) {
          true_flow_n(2 * j) = ds.measurements[k].true_flow_px(2 * j) / cfg.intrinsics.fx;
          true_flow_n(2 * j + 1) =
              ds.measurements[k].true_flow_px(2 * j + 1) / cfg.intrinsics.fy;
        }
        e.segment<8>(kIdxF) = filter.state().flow - true_flow_n;

        const Eigen::LDLT<ErrorCovariance> ldlt(filter.cov());
        nees_per_run[static_cast<size_t>(r)][k] = e.dot(ldlt.solve(e));

        filter.process_measurement(ds.measurements[k].meas);
        est.push_back(to_point(t, filter.state()));
      }

      const Alignment al = align_posyaw(est, ds.ground_truth);
      out.ate.push_back(ate_rmse(al.aligned, ds.ground_truth));
    } catch (const Error&) {
      ++out.failed_runs;
      if (!nees_per_run.empty()) {
        std::fill(nees_per_run[static_cast<size_t>(r)].begin(),
                  nees_per_run[static_cast<size_t>(r)].end(),
                  std::numeric_limits<double>::quiet_NaN());
      }
    }
  }

  const size_t good = out.runs - out.failed_runs;
  if (good < 2 || out.frame_t.empty()) {
    throw EmptyInput("monte_carlo: fewer than 2 successful runs");
  }

  out.average_nees.resize(out.frame_t.size(), 0.0);
  for (size_t k = 0; k < out.frame_t.size(); ++k) {
    double acc = 0.0;
    for (int r = 0; r < runs; ++r) {
      const double v = nees_per_run[static_cast<size_t>(r)][k];
      if (std::isfinite(v)) acc += v;
    }
    out.average_nees[k] = acc / static_cast<double>(good);
  }

  const boost::math::chi_squared dist(static_cast<double>(good) * kErrorDim);
  out.lower_bound = boost::math::quantile(dist, 0.025) / static_cast<double>(good);
  out.upper_bound = boost::math::quantile(dist, 0.975) / static_cast<double>(good);
  size_t within = 0, above = 0;
  for (double v : out.average_nees) {
    if (v > out.upper_bound) ++above;
    else if (v >= out.lower_bound) ++within;
  }
  out.fraction_within = static_cast<double>(within) / static_cast<double>(out.average_nees.size());
  out.fraction_above = static_cast<double>(above) / static_cast<double>(out.average_nees.size());
  return out;
}

}  // namespace pvio
