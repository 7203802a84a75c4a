#include "pvio/eval.hpp"

#include <algorithm>
#include <cmath>

namespace pvio {

namespace {

constexpr double kAssocGate = 0.010;  // s

// index pairs (est, gt) matched nearest-neighbor within the gate
std::vector<std::pair<size_t, size_t>> associate(const Trajectory& est, const Trajectory& gt) {
  std::vector<std::pair<size_t, size_t>> out;
  size_t j = 0;
  for (size_t i = 0; i < est.points.size(); ++i) {
    const double t = est.points[i].t;
    while (j + 1 < gt.points.size() &&
           std::abs(gt.points[j + 1].t - t) <= std::abs(gt.points[j].t - t)) {
      ++j;
    }
    if (j < gt.points.size() && std::abs(gt.points[j].t - t) <= kAssocGate) {
      out.emplace_back(i, j);
    }
  }
  return out;
}

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.size() == 1) return v.front();
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

void Trajectory::push_back(const TrajectoryPoint& p) {
  if (!points.empty() && p.t <= points.back().t) {
    throw NonMonotoneTime("Trajectory: timestamps must strictly increase");
  }
  points.push_back(p);
}

Alignment align_posyaw(const Trajectory& est, const Trajectory& gt) {
  const auto pairs = associate(est, gt);
  if (pairs.size() < 2) throw InsufficientOverlap("align_posyaw: fewer than 2 matched pairs");

  Eigen::Vector3d ce = Eigen::Vector3d::Zero();
  Eigen::Vector3d cg = Eigen::Vector3d::Zero();
  for (const auto& [i, j] : pairs) {
    ce += est.points[i].position;
    cg += gt.points[j].position;
  }
  const double n = static_cast<double>(pairs.size());
  ce /= n;
  cg /= n;

  // 2-d Procrustes on the centered horizontal components
  double sin_acc = 0.0, cos_acc = 0.0;
  for (const auto& [i, j] : pairs) {
    const Eigen::Vector3d e = est.points[i].position - ce;
    const Eigen::Vector3d g = gt.points[j].position - cg;
    cos_acc += e.x() * g.x() + e.y() * g.y();
    sin_acc += e.x() * g.y() - e.y() * g.x();
  }
  const double yaw = std::atan2(sin_acc, cos_acc);
  Eigen::Matrix3d r = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Vector3d trans = cg - r * ce;

  Alignment out;
  out.yaw = yaw;
  out.translation = trans;
  const Eigen::Quaterniond qr(r);
  for (const auto& p : est.points) {
    TrajectoryPoint a;
    a.t = p.t;
    a.position = r * p.position + trans;
    a.attitude = qr * p.attitude;
    out.aligned.points.push_back(a);
  }
  return out;
}

double ate_rmse(const Trajectory& est, const Trajectory& gt) {
  const auto pairs = associate(est, gt);
  if (pairs.empty()) throw InsufficientOverlap("ate_rmse: no matched pairs");
  double acc = 0.0;
  for (const auto& [i, j] : pairs) {
    acc += (est.points[i].position - gt.points[j].position).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(pairs.size()));
}

std::vector<ErrorDistribution> relative_translation_errors(const Trajectory& est,
                                                           const Trajectory& gt,
                                                           const std::vector<double>& lengths) {
  const auto pairs = associate(est, gt);
  if (pairs.size() < 2) {
    throw InsufficientOverlap("relative_translation_errors: fewer than 2 matched pairs");
  }

  // cumulative ground-truth path length over the matched subsequence
  std::vector<double> cum(pairs.size(), 0.0);
  for (size_t k = 1; k < pairs.size(); ++k) {
    cum[k] = cum[k - 1] + (gt.points[pairs[k].second].position -
                           gt.points[pairs[k - 1].second].position)
                              .norm();
  }

  std::vector<ErrorDistribution> out;
  for (double len : lengths) {
    std::vector<double> errs;
    size_t end = 0;
    for (size_t start = 0; start < pairs.size(); ++start) {
      if (end < start) end = start;
      while (end < pairs.size() && cum[end] - cum[start] < len) ++end;
      if (end >= pairs.size()) break;
      const Eigen::Vector3d de = est.points[pairs[end].first].position -
                                 est.points[pairs[start].first].position;
      const Eigen::Vector3d dg = gt.points[pairs[end].second].position -
                                 gt.points[pairs[start].second].position;
      errs.push_back((de - dg).norm());
    }
    if (errs.empty()) {
      throw InsufficientOverlap("relative_translation_errors: no window reaches length");
    }
    std::sort(errs.begin(), errs.end());
    ErrorDistribution d;
    d.length = len;
    d.count = errs.size();
    d.min = errs.front();
    d.q1 = quantile_sorted(errs, 0.25);
    d.median = quantile_sorted(errs, 0.5);
    d.q3 = quantile_sorted(errs, 0.75);
    d.max = errs.back();
    out.push_back(d);
  }
  return out;
}

LatencySummary latency_report(const std::vector<LatencyRecord>& records,
                              double frame_interval_ms) {
  if (records.empty()) throw EmptyInput("latency_report: no records");
  LatencySummary s;
  s.count = records.size();
  size_t late = 0;
  for (const auto& r : records) {
    const double t = r.total_ms();
    s.mean_ms += t;
    if (t > frame_interval_ms) ++late;
  }
  s.mean_ms /= static_cast<double>(records.size());
  for (const auto& r : records) {
    const double d = r.total_ms() - s.mean_ms;
    s.variance_ms2 += d * d;
  }
  s.variance_ms2 /= static_cast<double>(records.size());
  s.long_frame_ratio = 100.0 * static_cast<double>(late) / static_cast<double>(records.size());
  return s;
}

}  // namespace pvio
