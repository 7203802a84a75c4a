#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

#include "pvio/errors.hpp"

namespace pvio {

struct TrajectoryPoint {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // world frame, m
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();
};

/// Timestamped poses with strictly increasing t.
struct Trajectory {
  std::vector<TrajectoryPoint> points;

  void push_back(const TrajectoryPoint& p);
  size_t size() const { return points.size(); }
};

struct Alignment {
  Trajectory aligned;
  double yaw = 0.0;                                       // rad
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // applied after the yaw
};

/// Yaw-plus-translation least-squares alignment of est onto gt. Timestamps are
/// associated nearest-neighbor within 10 ms; at least two matched pairs
/// required, else InsufficientOverlap. No scale correction.
Alignment align_posyaw(const Trajectory& est, const Trajectory& gt);

/// RMSE of per-pair position errors over the associated timestamps.
double ate_rmse(const Trajectory& est, const Trajectory& gt);

struct ErrorDistribution {
  double length = 0.0;  // sub-trajectory path length, m
  size_t count = 0;     // windows evaluated
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Endpoint translation error over every window whose ground-truth path length
/// first reaches each requested length.
std::vector<ErrorDistribution> relative_translation_errors(const Trajectory& est,
                                                           const Trajectory& gt,
                                                           const std::vector<double>& lengths);

struct LatencyRecord {
  double visual_ms = 0.0;
  double propagation_ms = 0.0;
  double update_ms = 0.0;

  double total_ms() const { return visual_ms + propagation_ms + update_ms; }
};

struct LatencySummary {
  double mean_ms = 0.0;
  double variance_ms2 = 0.0;
  double long_frame_ratio = 0.0;  // percent of frames with total > frame interval
  size_t count = 0;
};

LatencySummary latency_report(const std::vector<LatencyRecord>& records, double frame_interval_ms);

}  // namespace pvio
