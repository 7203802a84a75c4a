#include "pvio/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

namespace pvio {

namespace {

Eigen::Matrix3d canonicalize(const Eigen::Matrix3d& m) {
  double n = m.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DegenerateConfiguration("homography matrix has zero or non-finite norm");
  }
  Eigen::Matrix3d out = m / n;
  if (out(2, 2) < 0.0) out = -out;
  return out;
}

}  // namespace

std::array<Eigen::Vector2d, 4> CameraIntrinsics::pixel_corners() const {
  const double w = static_cast<double>(width - 1);
  const double h = static_cast<double>(height - 1);
  return {Eigen::Vector2d(0, 0), Eigen::Vector2d(0, h), Eigen::Vector2d(w, h),
          Eigen::Vector2d(w, 0)};
}

std::array<Eigen::Vector2d, 4> CameraIntrinsics::normalized_corners() const {
  auto px = pixel_corners();
  std::array<Eigen::Vector2d, 4> out;
  for (int j = 0; j < 4; ++j) out[j] = pixel_to_normalized(px[j]);
  return out;
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

Homography::Homography(const Eigen::Matrix3d& m, Frame frame)
    : m_(canonicalize(m)), frame_(frame) {
  if (std::abs(m_.determinant()) <= 1e-12) {
    throw DegenerateConfiguration("homography is singular after normalization");
  }
}

Homography Homography::operator*(const Homography& rhs) const {
  return Homography(m_ * rhs.m_, frame_);
}

double Homography::distance(const Homography& other) const {
  return (m_ - other.m_).norm();
}

Eigen::Matrix<double, 8, 1> CornerFlow::as_vector() const {
  Eigen::Matrix<double, 8, 1> v;
  for (int j = 0; j < 4; ++j) v.segment<2>(2 * j) = f[j];
  return v;
}

CornerFlow CornerFlow::from_vector(const Eigen::Matrix<double, 8, 1>& v, Frame frame) {
  CornerFlow out;
  out.frame = frame;
  for (int j = 0; j < 4; ++j) out.f[j] = v.segment<2>(2 * j);
  return out;
}

void FlowCovariance::check_psd(double tol) const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 8, 8>> es(m_);
  if (es.eigenvalues().minCoeff() < -tol) {
    throw NotPositiveSemiDefinite("flow covariance has eigenvalue below tolerance");
  }
}

TransferResult transfer_point(const Homography& h, const Eigen::Vector2d& p) {
  Eigen::Vector3d q = h.matrix() * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (std::abs(q.z()) < 1e-12) {
    throw DegenerateTransfer("point transfer lambda underflow");
  }
  return {q.head<2>() / q.z(), q.z()};
}

namespace {

const std::array<Eigen::Vector2d, 4>& corners_for(const CameraIntrinsics& k, Frame frame,
                                                  std::array<Eigen::Vector2d, 4>& storage) {
  storage = (frame == Frame::Pixel) ? k.pixel_corners() : k.normalized_corners();
  return storage;
}

// Hartley isotropic normalization: centroid to origin, mean distance sqrt(2).
Eigen::Matrix3d hartley_transform(const std::array<Eigen::Vector2d, 4>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= 4.0;
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= 4.0;
  double s = (mean_dist > 1e-15) ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 0) = s;
  t(1, 1) = s;
  t(0, 2) = -s * centroid.x();
  t(1, 2) = -s * centroid.y();
  return t;
}

}  // namespace

Homography flow_to_homography(const CornerFlow& f, const CameraIntrinsics& k) {
  std::array<Eigen::Vector2d, 4> storage;
  const auto& c = corners_for(k, f.frame, storage);

  std::array<Eigen::Vector2d, 4> src = c;
  std::array<Eigen::Vector2d, 4> dst;
  for (int j = 0; j < 4; ++j) dst[j] = c[j] + f.f[j];

  const Eigen::Matrix3d ts = hartley_transform(src);
  const Eigen::Matrix3d td = hartley_transform(dst);

  Eigen::Matrix<double, 8, 9> a;
  for (int j = 0; j < 4; ++j) {
    Eigen::Vector3d ps = ts * Eigen::Vector3d(src[j].x(), src[j].y(), 1.0);
    Eigen::Vector3d pd = td * Eigen::Vector3d(dst[j].x(), dst[j].y(), 1.0);
    const double x = ps.x(), y = ps.y(), w = ps.z();
    const double u = pd.x() / pd.z(), v = pd.y() / pd.z();
    a.row(2 * j) << -x, -y, -w, 0, 0, 0, u * x, u * y, u * w;
    a.row(2 * j + 1) << 0, 0, 0, -x, -y, -w, v * x, v * y, v * w;
  }

  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // rank deficiency of the 8x9 system: smallest singular value vanishes
  // relative to the next one
  if (sv(7) < 1e-6 * sv(6)) {
    throw DegenerateConfiguration("DLT system is rank-deficient (collinear corners)");
  }
  Eigen::Matrix<double, 9, 1> hvec = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << hvec(0), hvec(1), hvec(2), hvec(3), hvec(4), hvec(5), hvec(6), hvec(7), hvec(8);
  Eigen::Matrix3d h = td.inverse() * hn * ts;
  return Homography(h, f.frame);
}

CornerFlow homography_to_flow(const Homography& h, const CameraIntrinsics& k) {
  std::array<Eigen::Vector2d, 4> storage;
  const auto& c = corners_for(k, h.frame(), storage);
  CornerFlow out;
  out.frame = h.frame();
  for (int j = 0; j < 4; ++j) out.f[j] = transfer_point(h, c[j]).point - c[j];
  return out;
}

ComposedFlow compose_total_flow(const Homography& h_prior, const CornerFlow& f_delta,
                                const CameraIntrinsics& k) {
  if (h_prior.frame() != f_delta.frame) {
    throw DegenerateConfiguration("compose_total_flow: frame mismatch");
  }
  std::array<Eigen::Vector2d, 4> storage;
  const auto& c = corners_for(k, f_delta.frame, storage);
  ComposedFlow out;
  out.flow.frame = f_delta.frame;
  for (int j = 0; j < 4; ++j) {
    TransferResult r = transfer_point(h_prior, c[j] + f_delta.f[j]);
    out.flow.f[j] = r.point - c[j];
    out.lambdas[j] = r.lambda;
  }
  return out;
}

FlowCovariance propagate_flow_variance(const Homography& h, const FlowCovariance& sigma4,
                                       const std::array<double, 4>& lambdas) {
  const Eigen::Matrix3d& m = h.matrix();
  FlowCovariance out;
  for (int j = 0; j < 4; ++j) {
    Eigen::Matrix3d s3 = Eigen::Matrix3d::Zero();
    s3.topLeftCorner<2, 2>() = sigma4.corner_block(j);
    Eigen::Matrix3d t = m * s3 * m.transpose() / (lambdas[j] * lambdas[j]);
    out.set_corner_block(j, t.topLeftCorner<2, 2>());
  }
  out.check_psd();
  return out;
}

std::pair<CornerFlow, FlowCovariance> pixels_to_normalized(const CornerFlow& f,
                                                           const FlowCovariance& cov,
                                                           const CameraIntrinsics& k) {
  CornerFlow fn;
  fn.frame = Frame::Normalized;
  for (int j = 0; j < 4; ++j) fn.f[j] = {f.f[j].x() / k.fx, f.f[j].y() / k.fy};
  Eigen::Matrix<double, 8, 1> s;
  for (int j = 0; j < 4; ++j) s.segment<2>(2 * j) << 1.0 / k.fx, 1.0 / k.fy;
  FlowCovariance cn(s.asDiagonal() * cov.matrix() * s.asDiagonal());
  return {fn, cn};
}

std::pair<CornerFlow, FlowCovariance> normalized_to_pixels(const CornerFlow& f,
                                                           const FlowCovariance& cov,
                                                           const CameraIntrinsics& k) {
  CornerFlow fp;
  fp.frame = Frame::Pixel;
  for (int j = 0; j < 4; ++j) fp.f[j] = {f.f[j].x() * k.fx, f.f[j].y() * k.fy};
  Eigen::Matrix<double, 8, 1> s;
  for (int j = 0; j < 4; ++j) s.segment<2>(2 * j) << k.fx, k.fy;
  FlowCovariance cp(s.asDiagonal() * cov.matrix() * s.asDiagonal());
  return {fp, cp};
}

Homography convert_frame(const Homography& h, const CameraIntrinsics& k, Frame target) {
  if (h.frame() == target) return h;
  const Eigen::Matrix3d kk = k.matrix();
  if (target == Frame::Pixel) {
    return Homography(kk * h.matrix() * kk.inverse(), Frame::Pixel);
  }
  return Homography(kk.inverse() * h.matrix() * kk, Frame::Normalized);
}

Homography homography_from_relative_pose(const Eigen::Matrix3d& rotation,
                                         const Eigen::Vector3d& translation,
                                         const Eigen::Vector3d& plane_normal, double distance,
                                         const CameraIntrinsics& k) {
  if (distance < 1e-9) {
    throw CameraOnPlane("plane distance below tolerance");
  }
  Eigen::Matrix3d hn = rotation + translation * plane_normal.transpose() / distance;
  return convert_frame(Homography(hn, Frame::Normalized), k, Frame::Pixel);
}

}  // namespace pvio
