#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pvio/ekf.hpp"
#include "pvio/geometry.hpp"

namespace pvio {

enum class TrajectoryKind { Hover, Line, Circle, FigureEight, Shuttle };

TrajectoryKind trajectory_kind_from_string(const std::string& s);

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Hover;
  double amplitude = 1.0;  // m
  double period = 10.0;    // s
  double height = 1.0;     // m above the plane
  double yaw_rate = 0.0;   // rad/s
  double duration = 10.0;  // s
  uint64_t seed = 0;
};

struct FrontendNoiseModel {
  double base_sigma = 0.0;        // px
  double flow_scale = 0.0;        // extra px of sigma per px of flow magnitude
  double outlier_prob = 0.0;
  double outlier_sigma = 0.0;     // px
  double variance_fidelity = 1.0; // reported variance = true variance * fidelity
  double frame_drop_prob = 0.0;
  uint64_t seed = 0;
};

struct TruthSample {
  Eigen::Vector3d position_world;
  Eigen::Quaterniond attitude;       // world <- IMU
  Eigen::Vector3d velocity_world;
  Eigen::Vector3d acceleration_world;
  Eigen::Vector3d angular_rate_body;

  Eigen::Vector3d velocity_body() const {
    return attitude.toRotationMatrix().transpose() * velocity_world;
  }
};

/// Analytic ground truth with closed-form derivatives.
TruthSample sample_truth(const TrajectorySpec& spec, double t);

/// Ground-truth EkfState (IMU-frame position/velocity, zero biases,
/// zero accumulated flow).
EkfState truth_state(const TrajectorySpec& spec, double t);

/// IMU stream per the additive bias + white noise model; biases follow random
/// walks driven by the config densities. Deterministic for a fixed seed.
std::vector<ImuSample> synthesize_imu(const TrajectorySpec& spec, const FilterConfig& cfg,
                                      double rate_hz, bool noise);

/// Same stream plus the realized bias random walks at each sample time.
struct SyntheticImu {
  std::vector<ImuSample> samples;
  std::vector<Eigen::Vector3d> true_ba;
  std::vector<Eigen::Vector3d> true_bg;
};
SyntheticImu synthesize_imu_detailed(const TrajectorySpec& spec, const FilterConfig& cfg,
                                     double rate_hz, bool noise);

struct SyntheticMeasurement {
  FlowMeasurement meas;
  Eigen::Matrix<double, 8, 1> true_flow_px;   // noiseless total flow, pixels
  Eigen::Matrix<double, 8, 1> clean_flow_px;  // noiseless emitted flow (residual when priors)
  Eigen::Matrix<double, 8, 1> true_sigma2_px; // noise variance actually applied
};

/// Per frame pair, ground-truth homography flow plus frontend noise whose
/// sigma grows with the flow magnitude. When priors are supplied (one per
/// frame interval), residual flows against the prior are emitted instead and
/// the noise scales with the residual magnitude.
std::vector<SyntheticMeasurement> synthesize_measurements(
    const TrajectorySpec& spec, const FilterConfig& cfg, double fps,
    const FrontendNoiseModel& model,
    const std::vector<CornerFlow>* priors_px = nullptr);

/// True pixel-frame homography of the camera between two trajectory times.
Homography true_homography(const TrajectorySpec& spec, const FilterConfig& cfg, double t_prev,
                           double t_curr);

/// Frame timestamps for the given rate, honoring frame drops from the model
/// seed. The first frame is at t = 0.
std::vector<double> frame_times(const TrajectorySpec& spec, double fps,
                                const FrontendNoiseModel& model);

/// Dead-reckoned per-frame flow priors (pixels) computed by propagating the
/// supplied IMU stream from the true state at each previous frame.
std::vector<CornerFlow> dead_reckoned_priors(const TrajectorySpec& spec,
                                             const FilterConfig& cfg,
                                             const std::vector<ImuSample>& imu,
                                             const std::vector<double>& frame_times);

}  // namespace pvio
