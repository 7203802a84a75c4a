#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

#include "pvio/geometry.hpp"
#include "pvio/uncertainty.hpp"

namespace pvio {

struct ImuSample {
  double t = 0.0;           // s
  Eigen::Vector3d accel;    // specific force, m/s^2
  Eigen::Vector3d gyro;     // rad/s
};

struct FlowMeasurement {
  double t = 0.0;
  Eigen::Matrix<double, 8, 1> flow;  // pixels
  FlowCovariance r_net;              // pixels^2
  bool used_prior = false;           // flow is a residual against the a-priori flow
};

struct FilterConfig {
  CameraIntrinsics intrinsics;
  Eigen::Quaterniond q_CI = Eigen::Quaterniond::Identity();  // camera <- IMU
  Eigen::Vector3d t_IC = Eigen::Vector3d::Zero();            // lever arm, IMU frame
  double gravity = 9.81;
  bool z_axis_up = false;

  // continuous-time noise densities
  double sigma_a = 0.0;    // m/s^2/sqrt(Hz)
  double sigma_g = 0.0;    // rad/s/sqrt(Hz)
  double sigma_ba = 0.0;   // m/s^3/sqrt(Hz)
  double sigma_bg = 0.0;   // rad/s^2/sqrt(Hz)
  double sigma_p = 0.0;    // m/sqrt(Hz), position integration noise

  double k_var = 1.0;
  bool gate = false;  // chi-squared(8) innovation gate

  // initialization
  double init_sigma_p = 0.1;          // m
  double init_sigma_theta = 0.02;     // rad
  double init_sigma_v = 0.1;          // m/s
  double init_sigma_ba = 0.1;         // m/s^2
  double init_sigma_bg = 0.01;        // rad/s
  double init_accel_var_limit = 0.5;  // (m/s^2)^2 per axis, stationarity check

  Eigen::Matrix3d rotation_ci() const { return q_CI.toRotationMatrix(); }
  /// Gravity vector in the world frame.
  Eigen::Vector3d gravity_world() const {
    return Eigen::Vector3d(0, 0, z_axis_up ? -gravity : gravity);
  }
};

/// Error-state layout: dp 3, dtheta 3, dv 3, dba 3, dbg 3, df 8.
inline constexpr int kErrorDim = 23;
inline constexpr int kIdxP = 0;
inline constexpr int kIdxTheta = 3;
inline constexpr int kIdxV = 6;
inline constexpr int kIdxBa = 9;
inline constexpr int kIdxBg = 12;
inline constexpr int kIdxF = 15;

using ErrorCovariance = Eigen::Matrix<double, kErrorDim, kErrorDim>;
using Vector8d = Eigen::Matrix<double, 8, 1>;

struct EkfState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();   // IMU position, IMU frame
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();  // world <- IMU
  Eigen::Vector3d v = Eigen::Vector3d::Zero();   // IMU velocity, IMU frame
  Eigen::Vector3d ba = Eigen::Vector3d::Zero();
  Eigen::Vector3d bg = Eigen::Vector3d::Zero();
  Vector8d flow = Vector8d::Zero();              // normalized frame, since last frame

  Eigen::Vector3d position_world() const { return q.toRotationMatrix() * p; }
  CornerFlow corner_flow() const { return CornerFlow::from_vector(flow, Frame::Normalized); }
};

/// Continuous homography matrix H = [w_c]x + v_c mu_c^T / d_c for the current
/// state and bias-corrected angular rate. Throws PlaneCollision when the
/// camera reaches the plane.
Eigen::Matrix3d continuous_homography(const EkfState& state, const Eigen::Vector3d& w_hat,
                                      const FilterConfig& cfg);

/// Time derivative of the full state under bias-corrected IMU inputs.
struct StateDerivative {
  Eigen::Vector3d p_dot;
  Eigen::Vector4d q_dot;  // (w, x, y, z)
  Eigen::Vector3d v_dot;
  Vector8d flow_dot;
};
StateDerivative state_derivative(const EkfState& state, const Eigen::Vector3d& a_hat,
                                 const Eigen::Vector3d& w_hat, const FilterConfig& cfg);

/// Analytic Jacobian of the error-state dynamics (23x23), including the flow
/// rows through the continuous homography.
ErrorCovariance error_dynamics_jacobian(const EkfState& state, const Eigen::Vector3d& a_hat,
                                        const Eigen::Vector3d& w_hat, const FilterConfig& cfg);

struct Propagated {
  EkfState state;
  ErrorCovariance cov;
};

/// Mean by RK4 (substeps of at most 5 ms), covariance by Phi = I + F dt per
/// substep with zero-order-hold discrete noise.
Propagated propagate(const EkfState& state, const ErrorCovariance& cov, const ImuSample& imu,
                     double dt, const FilterConfig& cfg);

/// Accumulated a-priori flow converted to pixels.
CornerFlow prior_flow(const EkfState& state, const FilterConfig& cfg);

struct UpdateResult {
  EkfState state;
  ErrorCovariance cov;
  Vector8d innovation = Vector8d::Zero();  // normalized frame
  double nis = 0.0;                        // innovation chi-squared statistic
  bool accepted = true;
};

/// Corner-flow measurement update (Joseph form) followed by a flow reset.
/// When meas.used_prior, the measurement is first composed with the a-priori
/// flow and its covariance transferred through the prior homography. With the
/// gate enabled, an innovation failing the chi-squared(8) 0.999 test rejects
/// the update; the flow state still resets.
UpdateResult update(const EkfState& state, const ErrorCovariance& cov,
                    const FlowMeasurement& meas, const FilterConfig& cfg);

/// f <- 0; flow error rows/columns cleared and the diagonal re-seeded with a
/// small prior.
Propagated reset_flow(const EkfState& state, const ErrorCovariance& cov);

/// Attitude and gyro bias from a stationary IMU window; position from the
/// initial height above the plane.
Propagated initialize(const std::vector<ImuSample>& window, double initial_height,
                      const FilterConfig& cfg);

/// Sequential driver: owns the filter value and handles IMU/measurement
/// interleaving, including propagation to measurement time by linear IMU
/// interpolation.
class Filter {
 public:
  Filter(const FilterConfig& cfg, const EkfState& state, const ErrorCovariance& cov,
         double start_time);

  /// Propagate up to imu.t using the previous sample's reading held over the
  /// interval.
  void process_imu(const ImuSample& imu);
  /// Propagate to meas.t (interpolating the IMU stream) and update.
  UpdateResult process_measurement(const FlowMeasurement& meas);
  /// Propagate to t with the held IMU reading, without an update.
  void advance_to(double t) { propagate_to(t); }

  const EkfState& state() const { return state_; }
  const ErrorCovariance& cov() const { return cov_; }
  double time() const { return time_; }
  const FilterConfig& config() const { return cfg_; }

 private:
  void propagate_to(double t);

  FilterConfig cfg_;
  EkfState state_;
  ErrorCovariance cov_;
  double time_;
  ImuSample last_imu_;
  bool has_imu_ = false;
};

}  // namespace pvio
