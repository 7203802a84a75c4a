#include "pvio/simulator.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pvio {

namespace {

constexpr double kReportedVarianceFloor = 1e-10;  // px^2

struct Kinematics {
  Eigen::Vector3d p, v, a;
};

// planar position profiles; z is constant at -height (z-axis down, plane at
// z = 0)
Kinematics planar_kinematics(const TrajectorySpec& spec, double t) {
  const double w = 2.0 * std::numbers::pi / spec.period;
  const double amp = spec.amplitude;
  Kinematics k{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
  switch (spec.kind) {
    case TrajectoryKind::Hover:
      break;
    case TrajectoryKind::Line:
      k.p.x() = amp * std::sin(w * t);
      k.v.x() = amp * w * std::cos(w * t);
      k.a.x() = -amp * w * w * std::sin(w * t);
      break;
    case TrajectoryKind::Circle:
      k.p << amp * std::cos(w * t), amp * std::sin(w * t), 0;
      k.v << -amp * w * std::sin(w * t), amp * w * std::cos(w * t), 0;
      k.a << -amp * w * w * std::cos(w * t), -amp * w * w * std::sin(w * t), 0;
      break;
    case TrajectoryKind::FigureEight:
      k.p << amp * std::sin(w * t), 0.5 * amp * std::sin(2 * w * t), 0;
      k.v << amp * w * std::cos(w * t), amp * w * std::cos(2 * w * t), 0;
      k.a << -amp * w * w * std::sin(w * t), -2 * amp * w * w * std::sin(2 * w * t), 0;
      break;
    case TrajectoryKind::Shuttle:
      k.p.x() = 0.5 * amp * (1.0 - std::cos(w * t));
      k.v.x() = 0.5 * amp * w * std::sin(w * t);
      k.a.x() = 0.5 * amp * w * w * std::cos(w * t);
      break;
  }
  k.p.z() = -spec.height;
  return k;
}

}  // namespace

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "hover") return TrajectoryKind::Hover;
  if (s == "line") return TrajectoryKind::Line;
  if (s == "circle") return TrajectoryKind::Circle;
  if (s == "figure-eight" || s == "figure8") return TrajectoryKind::FigureEight;
  if (s == "shuttle") return TrajectoryKind::Shuttle;
  throw ParseError("unknown trajectory kind: " + s);
}

TruthSample sample_truth(const TrajectorySpec& spec, double t) {
  if (t < 0.0 || t > spec.duration) {
    throw OutOfRange("sample_truth: time outside trajectory duration");
  }
  const Kinematics k = planar_kinematics(spec, t);
  TruthSample s;
  s.position_world = k.p;
  s.velocity_world = k.v;
  s.acceleration_world = k.a;
  const double yaw = spec.yaw_rate * t;
  s.attitude = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
  s.angular_rate_body =
      s.attitude.toRotationMatrix().transpose() * Eigen::Vector3d(0, 0, spec.yaw_rate);
  return s;
}

EkfState truth_state(const TrajectorySpec& spec, double t) {
  const TruthSample s = sample_truth(spec, t);
  EkfState x;
  x.q = s.attitude;
  const Eigen::Matrix3d rt = s.attitude.toRotationMatrix().transpose();
  x.p = rt * s.position_world;
  x.v = rt * s.velocity_world;
  return x;
}

SyntheticImu synthesize_imu_detailed(const TrajectorySpec& spec, const FilterConfig& cfg,
                                     double rate_hz, bool noise) {
  if (rate_hz < 50.0 || rate_hz > 1000.0) {
    throw OutOfRange("synthesize_imu: rate outside [50, 1000] Hz");
  }
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double dt = 1.0 / rate_hz;
  const double sd_a = cfg.sigma_a * std::sqrt(rate_hz);
  const double sd_g = cfg.sigma_g * std::sqrt(rate_hz);
  const double walk_a = cfg.sigma_ba * std::sqrt(dt);
  const double walk_g = cfg.sigma_bg * std::sqrt(dt);
  const Eigen::Vector3d g_w = cfg.gravity_world();

  SyntheticImu out;
  // samples on [0, duration): row count = duration * rate
  const auto n = static_cast<size_t>(std::floor(spec.duration * rate_hz));
  out.samples.reserve(n);
  out.true_ba.reserve(n);
  out.true_bg.reserve(n);
  Eigen::Vector3d ba = Eigen::Vector3d::Zero();
  Eigen::Vector3d bg = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const TruthSample s = sample_truth(spec, std::min(t, spec.duration));
    const Eigen::Matrix3d rt = s.attitude.toRotationMatrix().transpose();
    ImuSample m;
    m.t = t;
    m.accel = rt * (s.acceleration_world - g_w);
    m.gyro = s.angular_rate_body;
    out.true_ba.push_back(ba);
    out.true_bg.push_back(bg);
    if (noise) {
      m.accel += ba + sd_a * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
      m.gyro += bg + sd_g * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
      ba += walk_a * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
      bg += walk_g * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    }
    out.samples.push_back(m);
  }
  return out;
}

std::vector<ImuSample> synthesize_imu(const TrajectorySpec& spec, const FilterConfig& cfg,
                                      double rate_hz, bool noise) {
  return synthesize_imu_detailed(spec, cfg, rate_hz, noise).samples;
}

Homography true_homography(const TrajectorySpec& spec, const FilterConfig& cfg, double t_prev,
                           double t_curr) {
  const TruthSample s1 = sample_truth(spec, t_prev);
  const TruthSample s2 = sample_truth(spec, t_curr);
  const Eigen::Matrix3d r_ic = cfg.rotation_ci().transpose();
  const Eigen::Matrix3d r_wc1 = s1.attitude.toRotationMatrix() * r_ic;
  const Eigen::Matrix3d r_wc2 = s2.attitude.toRotationMatrix() * r_ic;
  const Eigen::Vector3d p_c1 = s1.position_world + s1.attitude.toRotationMatrix() * cfg.t_IC;
  const Eigen::Vector3d p_c2 = s2.position_world + s2.attitude.toRotationMatrix() * cfg.t_IC;

  const Eigen::Matrix3d r21 = r_wc2.transpose() * r_wc1;
  const Eigen::Vector3d t21 = r_wc2.transpose() * (p_c1 - p_c2);
  const Eigen::Vector3d n1 = r_wc1.transpose() * Eigen::Vector3d::UnitZ();
  const double d1 = -p_c1.z();
  return homography_from_relative_pose(r21, t21, n1, d1, cfg.intrinsics);
}

std::vector<double> frame_times(const TrajectorySpec& spec, double fps,
                                const FrontendNoiseModel& model) {
  if (!(fps > 0.0)) throw OutOfRange("frame_times: fps must be positive");
  std::mt19937_64 rng(model.seed ^ 0xda3e39cb94b95bdbULL);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> out;
  const auto n = static_cast<size_t>(std::floor(spec.duration * fps));
  for (size_t k = 0; k < n; ++k) {
    const bool drop = k > 0 && model.frame_drop_prob > 0.0 && uni(rng) < model.frame_drop_prob;
    if (!drop) out.push_back(static_cast<double>(k) / fps);
  }
  return out;
}

std::vector<SyntheticMeasurement> synthesize_measurements(
    const TrajectorySpec& spec, const FilterConfig& cfg, double fps,
    const FrontendNoiseModel& model, const std::vector<CornerFlow>* priors_px) {
  const std::vector<double> times = frame_times(spec, fps, model);
  std::mt19937_64 rng(model.seed ^ 0xc2b2ae3d27d4eb4fULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::vector<SyntheticMeasurement> out;
  out.reserve(times.size());
  const auto corners = cfg.intrinsics.pixel_corners();
  for (size_t k = 1; k < times.size(); ++k) {
    const Homography h_total = true_homography(spec, cfg, times[k - 1], times[k]);
    const CornerFlow f_total = homography_to_flow(h_total, cfg.intrinsics);

    CornerFlow f_emit = f_total;
    if (priors_px != nullptr) {
      const CornerFlow& prior = (*priors_px)[k - 1];
      const Homography h_prior = flow_to_homography(prior, cfg.intrinsics);
      const Homography h_prior_inv = h_prior.inverse();
      for (int j = 0; j < 4; ++j) {
        f_emit.f[j] =
            transfer_point(h_prior_inv, corners[j] + f_total.f[j]).point - corners[j];
      }
    }

    SyntheticMeasurement m;
    m.meas.t = times[k];
    m.meas.used_prior = priors_px != nullptr;
    m.true_flow_px = f_total.as_vector();
    m.clean_flow_px = f_emit.as_vector();
    Eigen::Matrix<double, 8, 1> reported;
    for (int j = 0; j < 4; ++j) {
      const double sigma = model.base_sigma + model.flow_scale * f_emit.f[j].norm();
      double var = sigma * sigma;
      Eigen::Vector2d noise(sigma * gauss(rng), sigma * gauss(rng));
      if (model.outlier_prob > 0.0 && uni(rng) < model.outlier_prob) {
        // the inflated spread is part of the reported variance: the frontend
        // knows when it is unsure
        noise += Eigen::Vector2d(model.outlier_sigma * gauss(rng),
                                 model.outlier_sigma * gauss(rng));
        var += model.outlier_sigma * model.outlier_sigma;
      }
      m.meas.flow.segment<2>(2 * j) = f_emit.f[j] + noise;
      m.true_sigma2_px.segment<2>(2 * j) << var, var;
      const double rep = var * model.variance_fidelity + kReportedVarianceFloor;
      reported.segment<2>(2 * j) << rep, rep;
    }
    m.meas.r_net = FlowCovariance::FromDiagonal(reported);
    out.push_back(m);
  }
  return out;
}

std::vector<CornerFlow> dead_reckoned_priors(const TrajectorySpec& spec,
                                             const FilterConfig& cfg,
                                             const std::vector<ImuSample>& imu,
                                             const std::vector<double>& times) {
  std::vector<CornerFlow> out;
  out.reserve(times.size() > 0 ? times.size() - 1 : 0);
  for (size_t k = 1; k < times.size(); ++k) {
    EkfState state = truth_state(spec, times[k - 1]);
    ErrorCovariance cov = ErrorCovariance::Zero();
    double t = times[k - 1];
    // hold the most recent IMU reading over each sub-interval
    size_t i = 0;
    while (i + 1 < imu.size() && imu[i + 1].t <= t) ++i;
    while (t < times[k] - 1e-12) {
      double next = times[k];
      if (i + 1 < imu.size() && imu[i + 1].t < next && imu[i + 1].t > t) next = imu[i + 1].t;
      Propagated p = propagate(state, cov, imu[i], next - t, cfg);
      state = p.state;
      cov = p.cov;
      t = next;
      if (i + 1 < imu.size() && imu[i + 1].t <= t + 1e-12) ++i;
    }
    out.push_back(prior_flow(state, cfg));
  }
  return out;
}

}  // namespace pvio
