#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <utility>

#include "pvio/errors.hpp"

namespace pvio {

/// Coordinate frame a homography or corner flow lives in.
/// Pixel: image pixel coordinates. Normalized: z=1 plane of the camera frame.
enum class Frame { Pixel, Normalized };

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// The four image corners (ul, bl, br, ur) in pixels.
  std::array<Eigen::Vector2d, 4> pixel_corners() const;
  /// The same corners on the z=1 plane of the camera frame.
  std::array<Eigen::Vector2d, 4> normalized_corners() const;

  Eigen::Vector2d pixel_to_normalized(const Eigen::Vector2d& px) const {
    return {(px.x() - cx) / fx, (px.y() - cy) / fy};
  }
  Eigen::Vector2d normalized_to_pixel(const Eigen::Vector2d& n) const {
    return {n.x() * fx + cx, n.y() * fy + cy};
  }
  Eigen::Matrix3d matrix() const;  // K
};

/// 3x3 projective map between two views of a plane.
/// Canonical scale: unit Frobenius norm with m(2,2) >= 0.
class Homography {
 public:
  Homography(const Eigen::Matrix3d& m, Frame frame);

  static Homography Identity(Frame frame) {
    return Homography(Eigen::Matrix3d::Identity(), frame);
  }

  const Eigen::Matrix3d& matrix() const { return m_; }
  Frame frame() const { return frame_; }

  Homography inverse() const { return Homography(m_.inverse(), frame_); }
  Homography operator*(const Homography& rhs) const;

  /// Frobenius distance between canonical forms.
  double distance(const Homography& other) const;

 private:
  Eigen::Matrix3d m_;
  Frame frame_;
};

/// Four corner displacement vectors, ordered (ul, bl, br, ur).
struct CornerFlow {
  std::array<Eigen::Vector2d, 4> f{};
  Frame frame = Frame::Pixel;

  static CornerFlow Zero(Frame frame) {
    CornerFlow out;
    out.frame = frame;
    for (auto& v : out.f) v.setZero();
    return out;
  }

  Eigen::Matrix<double, 8, 1> as_vector() const;
  static CornerFlow from_vector(const Eigen::Matrix<double, 8, 1>& v, Frame frame);
};

/// 8x8 covariance of a corner flow; per-corner 2x2 blocks on the diagonal,
/// cross-corner blocks kept as well.
class FlowCovariance {
 public:
  FlowCovariance() { m_.setZero(); }
  explicit FlowCovariance(const Eigen::Matrix<double, 8, 8>& m) : m_(m) {}

  static FlowCovariance FromDiagonal(const Eigen::Matrix<double, 8, 1>& d) {
    return FlowCovariance(Eigen::Matrix<double, 8, 8>(d.asDiagonal()));
  }

  const Eigen::Matrix<double, 8, 8>& matrix() const { return m_; }
  Eigen::Matrix<double, 8, 8>& matrix() { return m_; }

  Eigen::Matrix2d corner_block(int j) const { return m_.block<2, 2>(2 * j, 2 * j); }
  void set_corner_block(int j, const Eigen::Matrix2d& b) { m_.block<2, 2>(2 * j, 2 * j) = b; }

  /// Off-diagonal elements dropped.
  FlowCovariance diagonal_only() const {
    return FromDiagonal(m_.diagonal());
  }

  /// Throws NotPositiveSemiDefinite if an eigenvalue is below -tol.
  void check_psd(double tol = 1e-10) const;

 private:
  Eigen::Matrix<double, 8, 8> m_;
};

struct TransferResult {
  Eigen::Vector2d point;
  double lambda = 0.0;  // third homogeneous component
};

/// Point transfer p -> dehomog(h * [p; 1]). Throws DegenerateTransfer when the
/// third homogeneous component underflows.
TransferResult transfer_point(const Homography& h, const Eigen::Vector2d& p);

/// DLT solver: homography mapping corner c_j to c_j + f_j, with Hartley
/// isotropic normalization of both point sets.
Homography flow_to_homography(const CornerFlow& f, const CameraIntrinsics& k);

/// f_j = transfer_point(h, c_j) - c_j.
CornerFlow homography_to_flow(const Homography& h, const CameraIntrinsics& k);

struct ComposedFlow {
  CornerFlow flow;
  std::array<double, 4> lambdas{};  // per-corner third homogeneous component
};

/// Total flow: lambda (f_total_j + c_j) = h_prior * (f_delta_j + c_j).
ComposedFlow compose_total_flow(const Homography& h_prior, const CornerFlow& f_delta,
                                const CameraIntrinsics& k);

/// First-order variance transfer through a homography: per corner the 2x2
/// block is embedded in a 3x3 diagonal with zero third element, pushed through
/// H S H^T / lambda^2, and the leading 2x2 block is returned. Cross terms are
/// kept in the result; use diagonal_only() to drop them.
FlowCovariance propagate_flow_variance(const Homography& h, const FlowCovariance& sigma4,
                                       const std::array<double, 4>& lambdas);

std::pair<CornerFlow, FlowCovariance> pixels_to_normalized(const CornerFlow& f,
                                                           const FlowCovariance& cov,
                                                           const CameraIntrinsics& k);
std::pair<CornerFlow, FlowCovariance> normalized_to_pixels(const CornerFlow& f,
                                                           const FlowCovariance& cov,
                                                           const CameraIntrinsics& k);

/// Convert a homography between pixel and normalized frames (K H K^-1).
Homography convert_frame(const Homography& h, const CameraIntrinsics& k, Frame target);

/// Discrete two-view homography of a plane: pixel-frame conjugation of
/// R + t n^T / d. `rotation` maps previous-camera coordinates to
/// current-camera, `translation` is the previous-camera origin expressed in
/// the current camera frame, `plane_normal` and `distance` describe the plane
/// in the previous camera frame.
Homography homography_from_relative_pose(const Eigen::Matrix3d& rotation,
                                         const Eigen::Vector3d& translation,
                                         const Eigen::Vector3d& plane_normal, double distance,
                                         const CameraIntrinsics& k);

}  // namespace pvio
