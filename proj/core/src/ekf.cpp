#include "pvio/ekf.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace pvio {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

constexpr double kMaxSubstep = 0.005;
constexpr double kFlowResetPrior = 1e-12;
constexpr double kChi2Gate8_999 = 26.124481558376136;  // chi2 inv(0.999, 8 dof)

Eigen::Vector4d quat_coeffs(const Eigen::Quaterniond& q) {
  return {q.w(), q.x(), q.y(), q.z()};
}

// q_dot = 1/2 q (x) (0, w), on raw coefficients (w, x, y, z)
Eigen::Vector4d quat_derivative(const Eigen::Vector4d& q, const Eigen::Vector3d& w) {
  const double qw = q(0), qx = q(1), qy = q(2), qz = q(3);
  return 0.5 * Eigen::Vector4d(-qx * w.x() - qy * w.y() - qz * w.z(),
                               qw * w.x() + qy * w.z() - qz * w.y(),
                               qw * w.y() - qx * w.z() + qz * w.x(),
                               qw * w.z() + qx * w.y() - qy * w.x());
}

struct RawState {
  Eigen::Vector3d p, v;
  Eigen::Vector4d q;
  Vector8d flow;
};

RawState to_raw(const EkfState& s) {
  return {s.p, s.v, quat_coeffs(s.q), s.flow};
}

EkfState from_raw(const RawState& r, const EkfState& base) {
  EkfState s = base;
  s.p = r.p;
  s.v = r.v;
  s.q = Eigen::Quaterniond(r.q(0), r.q(1), r.q(2), r.q(3)).normalized();
  s.flow = r.flow;
  return s;
}

struct RawDerivative {
  Eigen::Vector3d p, v;
  Eigen::Vector4d q;
  Vector8d flow;
};

RawDerivative derivative_at(const RawState& r, const EkfState& base,
                            const Eigen::Vector3d& a_hat, const Eigen::Vector3d& w_hat,
                            const FilterConfig& cfg) {
  EkfState s = base;
  s.p = r.p;
  s.v = r.v;
  // mid-step quaternions are used unnormalized; the rotation matrix is scaled
  // consistently by normalizing here
  s.q = Eigen::Quaterniond(r.q(0), r.q(1), r.q(2), r.q(3)).normalized();
  s.flow = r.flow;
  StateDerivative d = state_derivative(s, a_hat, w_hat, cfg);
  return {d.p_dot, d.v_dot, quat_derivative(r.q, w_hat), d.flow_dot};
}

RawState advance(const RawState& r, const RawDerivative& d, double h) {
  return {r.p + h * d.p, r.v + h * d.v, r.q + h * d.q, r.flow + h * d.flow};
}

}  // namespace

Eigen::Matrix3d continuous_homography(const EkfState& state, const Eigen::Vector3d& w_hat,
                                      const FilterConfig& cfg) {
  const Eigen::Matrix3d rci = cfg.rotation_ci();
  const Eigen::Matrix3d r = state.q.toRotationMatrix();
  const double sgn = cfg.z_axis_up ? -1.0 : 1.0;
  const Eigen::Vector3d w_c = rci * w_hat;
  const Eigen::Vector3d v_c = rci * (state.v + w_hat.cross(cfg.t_IC));
  const Eigen::Vector3d mu_c = sgn * rci * (r.transpose() * Eigen::Vector3d::UnitZ());
  const double d_c = -sgn * Eigen::Vector3d::UnitZ().dot(r * (state.p + cfg.t_IC));
  if (std::abs(d_c) < 1e-6) {
    throw PlaneCollision("camera distance to plane below 1e-6 m");
  }
  return skew(w_c) + v_c * mu_c.transpose() / d_c;
}

StateDerivative state_derivative(const EkfState& state, const Eigen::Vector3d& a_hat,
                                 const Eigen::Vector3d& w_hat, const FilterConfig& cfg) {
  StateDerivative d;
  const Eigen::Matrix3d r = state.q.toRotationMatrix();
  d.p_dot = -w_hat.cross(state.p) + state.v;
  d.v_dot = -w_hat.cross(state.v) + a_hat + r.transpose() * cfg.gravity_world();
  d.q_dot = quat_derivative(quat_coeffs(state.q), w_hat);

  const Eigen::Matrix3d h = continuous_homography(state, w_hat, cfg);
  const auto corners = cfg.intrinsics.normalized_corners();
  for (int j = 0; j < 4; ++j) {
    const Eigen::Vector2d e = corners[j] + state.flow.segment<2>(2 * j);
    const Eigen::Vector3d y(e.x(), e.y(), 1.0);
    const Eigen::Vector3d hy = h * y;
    const Eigen::Vector3d fdot3 = -(hy - y * hy.z());
    d.flow_dot.segment<2>(2 * j) = fdot3.head<2>();
  }
  return d;
}

ErrorCovariance error_dynamics_jacobian(const EkfState& state, const Eigen::Vector3d& a_hat,
                                        const Eigen::Vector3d& w_hat, const FilterConfig& cfg) {
  (void)a_hat;
  ErrorCovariance f = ErrorCovariance::Zero();
  const Eigen::Matrix3d w = skew(w_hat);
  const Eigen::Matrix3d r = state.q.toRotationMatrix();
  const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();

  f.block<3, 3>(kIdxP, kIdxP) = -w;
  f.block<3, 3>(kIdxP, kIdxV) = i3;
  f.block<3, 3>(kIdxP, kIdxBg) = -skew(state.p);

  f.block<3, 3>(kIdxTheta, kIdxTheta) = -w;
  f.block<3, 3>(kIdxTheta, kIdxBg) = -i3;

  f.block<3, 3>(kIdxV, kIdxTheta) = skew(r.transpose() * cfg.gravity_world());
  f.block<3, 3>(kIdxV, kIdxV) = -w;
  f.block<3, 3>(kIdxV, kIdxBa) = -i3;
  f.block<3, 3>(kIdxV, kIdxBg) = -skew(state.v);

  // flow rows, through the continuous homography
  const Eigen::Matrix3d rci = cfg.rotation_ci();
  const double sgn = cfg.z_axis_up ? -1.0 : 1.0;
  const Eigen::Vector3d ez = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d v_c = rci * (state.v + w_hat.cross(cfg.t_IC));
  const Eigen::Vector3d mu_c = sgn * rci * (r.transpose() * ez);
  const double d_c = -sgn * ez.dot(r * (state.p + cfg.t_IC));
  if (std::abs(d_c) < 1e-6) {
    throw PlaneCollision("camera distance to plane below 1e-6 m");
  }
  const Eigen::Matrix3d h = continuous_homography(state, w_hat, cfg);
  const Eigen::RowVector3d h3 = h.row(2);

  // channel sensitivities of the continuous homography ingredients
  const Eigen::Matrix3d wc_bg = -rci;                       // d omega_c / d delta_bg
  const Eigen::Matrix3d vc_bg = rci * skew(cfg.t_IC);       // d v_c / d delta_bg
  const Eigen::Matrix3d vc_v = rci;                         // d v_c / d delta_v
  const Eigen::Matrix3d mu_th = sgn * rci * skew(r.transpose() * ez);
  const Eigen::RowVector3d d_th = sgn * ez.transpose() * r * skew(state.p + cfg.t_IC);
  const Eigen::RowVector3d d_p = -sgn * ez.transpose() * r;

  const auto corners = cfg.intrinsics.normalized_corners();
  for (int j = 0; j < 4; ++j) {
    const int row = kIdxF + 2 * j;
    const Eigen::Vector2d e = corners[j] + state.flow.segment<2>(2 * j);
    const Eigen::Vector3d y(e.x(), e.y(), 1.0);
    const Eigen::Matrix3d a = Eigen::Matrix3d::Identity() - y * ez.transpose();
    const double muty = mu_c.dot(y);
    const Eigen::Vector3d av = a * v_c;

    // d fdot / d f_j
    const Eigen::Matrix3d m = -(h - (h3 * y)(0) * Eigen::Matrix3d::Identity() -
                                y * h3);
    f.block<2, 2>(row, row) = m.topLeftCorner<2, 2>();

    const Eigen::Matrix3d j_bg = -(-a * skew(y) * wc_bg + (muty / d_c) * a * vc_bg);
    const Eigen::Matrix3d j_v = -((muty / d_c) * a * vc_v);
    const Eigen::Matrix3d j_th =
        -((1.0 / d_c) * av * (y.transpose() * mu_th) - (muty / (d_c * d_c)) * av * d_th);
    const Eigen::Matrix3d j_p = (muty / (d_c * d_c)) * av * d_p;

    f.block<2, 3>(row, kIdxBg) = j_bg.topRows<2>();
    f.block<2, 3>(row, kIdxV) = j_v.topRows<2>();
    f.block<2, 3>(row, kIdxTheta) = j_th.topRows<2>();
    f.block<2, 3>(row, kIdxP) = j_p.topRows<2>();
  }
  return f;
}

Propagated propagate(const EkfState& state, const ErrorCovariance& cov, const ImuSample& imu,
                     double dt, const FilterConfig& cfg) {
  if (dt <= 0.0) throw NonMonotoneTime("propagate: dt <= 0");
  if (dt > 0.05) throw OutOfRange("propagate: dt > 0.05 s");

  Propagated out{state, cov};
  const int n = static_cast<int>(std::ceil(dt / kMaxSubstep));
  const double h = dt / n;

  Eigen::Matrix<double, 15, 15> qc = Eigen::Matrix<double, 15, 15>::Zero();
  qc.block<3, 3>(0, 0) = cfg.sigma_p * cfg.sigma_p * Eigen::Matrix3d::Identity();
  qc.block<3, 3>(3, 3) = cfg.sigma_a * cfg.sigma_a * Eigen::Matrix3d::Identity();
  qc.block<3, 3>(6, 6) = cfg.sigma_g * cfg.sigma_g * Eigen::Matrix3d::Identity();
  qc.block<3, 3>(9, 9) = cfg.sigma_ba * cfg.sigma_ba * Eigen::Matrix3d::Identity();
  qc.block<3, 3>(12, 12) = cfg.sigma_bg * cfg.sigma_bg * Eigen::Matrix3d::Identity();

  for (int step = 0; step < n; ++step) {
    const Eigen::Vector3d a_hat = imu.accel - out.state.ba;
    const Eigen::Vector3d w_hat = imu.gyro - out.state.bg;

    const ErrorCovariance f = error_dynamics_jacobian(out.state, a_hat, w_hat, cfg);
    const ErrorCovariance phi = ErrorCovariance::Identity() + f * h;

    // white accel/gyro noise enters exactly where the bias errors do
    Eigen::Matrix<double, kErrorDim, 15> g = Eigen::Matrix<double, kErrorDim, 15>::Zero();
    g.block<3, 3>(kIdxP, 0) = Eigen::Matrix3d::Identity();
    g.block<kErrorDim, 3>(0, 3) = f.block<kErrorDim, 3>(0, kIdxBa);
    g.block<kErrorDim, 3>(0, 6) = f.block<kErrorDim, 3>(0, kIdxBg);
    g.block<3, 3>(kIdxBa, 9) = Eigen::Matrix3d::Identity();
    g.block<3, 3>(kIdxBg, 12) = Eigen::Matrix3d::Identity();

    out.cov = phi * out.cov * phi.transpose() + g * qc * g.transpose() * h;
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();

    // RK4 on the mean
    const RawState r0 = to_raw(out.state);
    const RawDerivative k1 = derivative_at(r0, out.state, a_hat, w_hat, cfg);
    const RawDerivative k2 = derivative_at(advance(r0, k1, h / 2), out.state, a_hat, w_hat, cfg);
    const RawDerivative k3 = derivative_at(advance(r0, k2, h / 2), out.state, a_hat, w_hat, cfg);
    const RawDerivative k4 = derivative_at(advance(r0, k3, h), out.state, a_hat, w_hat, cfg);
    RawState r1;
    r1.p = r0.p + h / 6.0 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p);
    r1.v = r0.v + h / 6.0 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
    r1.q = r0.q + h / 6.0 * (k1.q + 2 * k2.q + 2 * k3.q + k4.q);
    r1.flow = r0.flow + h / 6.0 * (k1.flow + 2 * k2.flow + 2 * k3.flow + k4.flow);
    out.state = from_raw(r1, out.state);
  }
  return out;
}

CornerFlow prior_flow(const EkfState& state, const FilterConfig& cfg) {
  CornerFlow fn = state.corner_flow();
  CornerFlow fp;
  fp.frame = Frame::Pixel;
  for (int j = 0; j < 4; ++j) {
    fp.f[j] = {fn.f[j].x() * cfg.intrinsics.fx, fn.f[j].y() * cfg.intrinsics.fy};
  }
  return fp;
}

UpdateResult update(const EkfState& state, const ErrorCovariance& cov,
                    const FlowMeasurement& meas, const FilterConfig& cfg) {
  const CameraIntrinsics& k = cfg.intrinsics;

  CornerFlow z_px = CornerFlow::from_vector(meas.flow, Frame::Pixel);
  FlowCovariance r_px = meas.r_net;
  if (meas.used_prior) {
    const Homography h_prior = flow_to_homography(prior_flow(state, cfg), k);
    const ComposedFlow composed = compose_total_flow(h_prior, z_px, k);
    r_px = propagate_flow_variance(h_prior, r_px, composed.lambdas);
    z_px = composed.flow;
  }
  auto [z_n, r_n] = pixels_to_normalized(z_px, r_px, k);
  const Eigen::Matrix<double, 8, 8> r_meas =
      scale_measurement_covariance(r_n, cfg.k_var).matrix();

  const Vector8d innovation = z_n.as_vector() - state.flow;
  const Eigen::Matrix<double, 8, 8> p_ff = cov.block<8, 8>(kIdxF, kIdxF);
  const Eigen::Matrix<double, 8, 8> s = p_ff + r_meas;
  const Eigen::LDLT<Eigen::Matrix<double, 8, 8>> s_ldlt(s);
  const double nis = innovation.dot(s_ldlt.solve(innovation));

  UpdateResult out;
  out.innovation = innovation;
  out.nis = nis;

  if (cfg.gate && nis > kChi2Gate8_999) {
    out.accepted = false;
    Propagated reset = reset_flow(state, cov);
    out.state = reset.state;
    out.cov = reset.cov;
    return out;
  }

  const Eigen::Matrix<double, kErrorDim, 8> pht = cov.block<kErrorDim, 8>(0, kIdxF);
  const Eigen::Matrix<double, kErrorDim, 8> gain = s_ldlt.solve(pht.transpose()).transpose();
  const Eigen::Matrix<double, kErrorDim, 1> dx = gain * innovation;

  EkfState st = state;
  st.p += dx.segment<3>(kIdxP);
  const Eigen::Vector3d dth = dx.segment<3>(kIdxTheta);
  Eigen::Quaterniond dq(Eigen::AngleAxisd(dth.norm(), dth.norm() > 0 ? dth.normalized()
                                                                     : Eigen::Vector3d::UnitX()));
  st.q = (st.q * dq).normalized();
  st.v += dx.segment<3>(kIdxV);
  st.ba += dx.segment<3>(kIdxBa);
  st.bg += dx.segment<3>(kIdxBg);
  st.flow += dx.segment<8>(kIdxF);

  // Joseph form, H = [0 | I8]
  ErrorCovariance a = ErrorCovariance::Identity();
  a.block<kErrorDim, 8>(0, kIdxF) -= gain;
  ErrorCovariance p_new = a * cov * a.transpose() + gain * r_meas * gain.transpose();
  p_new = 0.5 * (p_new + p_new.transpose()).eval();
  if (p_new.diagonal().minCoeff() < -1e-8) {
    throw NotPositiveSemiDefinite("update: covariance diagonal went negative");
  }

  Propagated reset = reset_flow(st, p_new);
  out.state = reset.state;
  out.cov = reset.cov;
  return out;
}

Propagated reset_flow(const EkfState& state, const ErrorCovariance& cov) {
  Propagated out{state, cov};
  out.state.flow.setZero();
  out.cov.block<8, kErrorDim>(kIdxF, 0).setZero();
  out.cov.block<kErrorDim, 8>(0, kIdxF).setZero();
  out.cov.block<8, 8>(kIdxF, kIdxF) =
      kFlowResetPrior * Eigen::Matrix<double, 8, 8>::Identity();
  return out;
}

Propagated initialize(const std::vector<ImuSample>& window, double initial_height,
                      const FilterConfig& cfg) {
  if (window.size() < 2) throw NotStationary("initialize: IMU window too short");
  Eigen::Vector3d mean_a = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean_g = Eigen::Vector3d::Zero();
  for (const auto& s : window) {
    mean_a += s.accel;
    mean_g += s.gyro;
  }
  mean_a /= static_cast<double>(window.size());
  mean_g /= static_cast<double>(window.size());
  Eigen::Vector3d var_a = Eigen::Vector3d::Zero();
  for (const auto& s : window) var_a += (s.accel - mean_a).cwiseAbs2();
  var_a /= static_cast<double>(window.size());
  if (var_a.maxCoeff() > cfg.init_accel_var_limit) {
    throw NotStationary("initialize: accelerometer variance above stationarity limit");
  }

  // roll/pitch from gravity alignment, yaw = 0
  const double sgn = cfg.z_axis_up ? 1.0 : -1.0;
  const Eigen::Vector3d u = sgn * mean_a.normalized();  // R^T e_z
  const double pitch = std::asin(std::clamp(-u.x(), -1.0, 1.0));
  const double roll = std::atan2(u.y(), u.z());
  Eigen::Quaterniond q = Eigen::Quaterniond(Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY())) *
                         Eigen::Quaterniond(Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()));

  Propagated out;
  out.state.q = q.normalized();
  out.state.v.setZero();
  out.state.ba.setZero();
  out.state.bg = mean_g;
  const Eigen::Vector3d p_world(0, 0, cfg.z_axis_up ? initial_height : -initial_height);
  out.state.p = out.state.q.toRotationMatrix().transpose() * p_world;
  out.state.flow.setZero();

  out.cov.setZero();
  out.cov.block<3, 3>(kIdxP, kIdxP) =
      cfg.init_sigma_p * cfg.init_sigma_p * Eigen::Matrix3d::Identity();
  out.cov.block<3, 3>(kIdxTheta, kIdxTheta) =
      cfg.init_sigma_theta * cfg.init_sigma_theta * Eigen::Matrix3d::Identity();
  out.cov.block<3, 3>(kIdxV, kIdxV) =
      cfg.init_sigma_v * cfg.init_sigma_v * Eigen::Matrix3d::Identity();
  out.cov.block<3, 3>(kIdxBa, kIdxBa) =
      cfg.init_sigma_ba * cfg.init_sigma_ba * Eigen::Matrix3d::Identity();
  out.cov.block<3, 3>(kIdxBg, kIdxBg) =
      cfg.init_sigma_bg * cfg.init_sigma_bg * Eigen::Matrix3d::Identity();
  out.cov.block<8, 8>(kIdxF, kIdxF) =
      kFlowResetPrior * Eigen::Matrix<double, 8, 8>::Identity();
  return out;
}

Filter::Filter(const FilterConfig& cfg, const EkfState& state, const ErrorCovariance& cov,
               double start_time)
    : cfg_(cfg), state_(state), cov_(cov), time_(start_time) {}

void Filter::propagate_to(double t) {
  const double dt = t - time_;
  if (dt < -1e-9) throw NonMonotoneTime("filter driven backwards in time");
  if (dt <= 1e-12) return;
  if (!has_imu_) throw Error("no IMU sample available for propagation");
  Propagated p = propagate(state_, cov_, last_imu_, dt, cfg_);
  state_ = p.state;
  cov_ = p.cov;
  time_ = t;
}

void Filter::process_imu(const ImuSample& imu) {
  if (!has_imu_) {
    last_imu_ = imu;
    has_imu_ = true;
  }
  // trapezoidal reading over the interval; a zero-order hold leaves a
  // systematic jerk * dt / 2 acceleration bias
  ImuSample held = last_imu_;
  held.accel = 0.5 * (last_imu_.accel + imu.accel);
  held.gyro = 0.5 * (last_imu_.gyro + imu.gyro);
  const ImuSample saved = last_imu_;
  last_imu_ = held;
  try {
    propagate_to(imu.t);
  } catch (...) {
    last_imu_ = saved;
    throw;
  }
  last_imu_ = imu;
}

UpdateResult Filter::process_measurement(const FlowMeasurement& meas) {
  propagate_to(meas.t);
  if (std::abs(meas.t - time_) > 1e-6) {
    throw NonMonotoneTime("measurement timestamp does not match filter time");
  }
  UpdateResult r = update(state_, cov_, meas, cfg_);
  state_ = r.state;
  cov_ = r.cov;
  return r;
}

}  // namespace pvio
