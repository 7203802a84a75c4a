#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "pvio/simulator.hpp"
#include "pvio/errors.hpp"

using namespace pvio;

namespace {

FilterConfig test_config() {
  FilterConfig cfg;
  cfg.intrinsics = {200.0, 200.0, 160.0, 120.0, 320, 240};
  return cfg;
}

TrajectorySpec spec_of(TrajectoryKind kind, double amplitude, double period, double height,
                       double duration) {
  TrajectorySpec s;
  s.kind = kind;
  s.amplitude = amplitude;
  s.period = period;
  s.height = height;
  s.duration = duration;
  return s;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// asymptotic Kolmogorov-Smirnov p value
double ks_p_value(std::vector<double> z) {
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    const double cdf = std_normal_cdf(z[i]);
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("hover ground truth is a static level pose") {
  TrajectorySpec spec = spec_of(TrajectoryKind::Hover, 1.0, 10.0, 1.5, 10.0);
  for (double t : {0.0, 3.7, 9.99}) {
    TruthSample s = sample_truth(spec, t);
    CHECK((s.position_world - Eigen::Vector3d(0, 0, -1.5)).norm() < 1e-12);
    CHECK(s.attitude.angularDistance(Eigen::Quaterniond::Identity()) < 1e-12);
    CHECK(s.velocity_world.norm() < 1e-12);
    CHECK(s.acceleration_world.norm() < 1e-12);
    CHECK(s.angular_rate_body.norm() < 1e-12);
  }
}

TEST_CASE("circle ground truth has centripetal acceleration at constant speed") {
  TrajectorySpec spec = spec_of(TrajectoryKind::Circle, 2.0, 8.0, 1.0, 10.0);
  const double w = 2.0 * M_PI / spec.period;
  for (double t : {0.3, 2.0, 5.5}) {
    TruthSample s = sample_truth(spec, t);
    CHECK(s.velocity_world.head<2>().norm() == doctest::Approx(w * spec.amplitude).epsilon(1e-9));
    CHECK(std::abs(s.velocity_world.z()) < 1e-12);
    Eigen::Vector2d xy = s.position_world.head<2>();
    Eigen::Vector2d axy = s.acceleration_world.head<2>();
    CHECK((axy + w * w * xy).norm() < 1e-9);
  }
}

TEST_CASE("figure eight ground truth follows the lemniscate parametrization") {
  TrajectorySpec spec = spec_of(TrajectoryKind::FigureEight, 2.0, 10.0, 1.0, 30.0);
  const double w = 2.0 * M_PI / spec.period;
  for (double t : {0.0, 1.3, 7.9, 21.4}) {
    TruthSample s = sample_truth(spec, t);
    CHECK(s.position_world.x() == doctest::Approx(spec.amplitude * std::sin(w * t)).epsilon(1e-12));
    CHECK(s.position_world.y() ==
          doctest::Approx(0.5 * spec.amplitude * std::sin(2.0 * w * t)).epsilon(1e-12));
    CHECK(s.position_world.z() == doctest::Approx(-spec.height).epsilon(1e-12));
  }
}

TEST_CASE("ground-truth derivatives agree with finite differences of the position") {
  for (TrajectoryKind kind : {TrajectoryKind::Line, TrajectoryKind::Circle,
                              TrajectoryKind::FigureEight, TrajectoryKind::Shuttle}) {
    TrajectorySpec spec = spec_of(kind, 1.5, 7.0, 1.2, 20.0);
    spec.yaw_rate = 0.1;
    const double h = 1e-5;
    for (double t : {1.0, 4.4, 12.7}) {
      TruthSample lo = sample_truth(spec, t - h);
      TruthSample mid = sample_truth(spec, t);
      TruthSample hi = sample_truth(spec, t + h);
      Eigen::Vector3d fd_v = (hi.position_world - lo.position_world) / (2 * h);
      Eigen::Vector3d fd_a = (hi.velocity_world - lo.velocity_world) / (2 * h);
      CHECK((fd_v - mid.velocity_world).norm() < 1e-6);
      CHECK((fd_a - mid.acceleration_world).norm() < 1e-6);
    }
  }
}

TEST_CASE("ground truth rejects times outside the trajectory") {
  TrajectorySpec spec = spec_of(TrajectoryKind::Hover, 1.0, 10.0, 1.0, 10.0);
  CHECK_THROWS_AS(sample_truth(spec, -0.1), OutOfRange);
  CHECK_THROWS_AS(sample_truth(spec, 10.5), OutOfRange);
}

TEST_CASE("truth state carries the world pose into the filter conventions") {
  TrajectorySpec spec = spec_of(TrajectoryKind::FigureEight, 2.0, 10.0, 1.0, 30.0);
  spec.yaw_rate = 0.2;
  for (double t : {0.5, 6.3, 15.0}) {
    TruthSample s = sample_truth(spec, t);
    EkfState x = truth_state(spec, t);
    CHECK((x.position_world() - s.position_world).norm() < 1e-12);
    CHECK(x.q.angularDistance(s.attitude) < 1e-12);
    CHECK((x.v - s.velocity_body()).norm() < 1e-12);
    CHECK(x.ba.norm() == 0.0);
    CHECK(x.bg.norm() == 0.0);
  }
}

TEST_CASE("noise-free hover imu reads minus gravity and zero rate") {
  TrajectorySpec spec = spec_of(TrajectoryKind::Hover, 1.0, 10.0, 1.0, 10.0);
  FilterConfig cfg = test_config();
  std::vector<ImuSample> imu = synthesize_imu(spec, cfg, 200.0, false);
  REQUIRE(imu.size() == 2000);
  for (size_t i = 0; i < imu.size(); i += 137) {
    CHECK(imu[i].t == doctest::Approx(i / 200.0).epsilon(1e-12));
    CHECK((imu[i].accel - Eigen::Vector3d(0, 0, -cfg.gravity)).norm() < 1e-12);
    CHECK(imu[i].gyro.norm() < 1e-12);
  }
}

TEST_CASE("imu synthesis is deterministic for a fixed seed") {
  TrajectorySpec spec = spec_of(TrajectoryKind::Circle, 1.0, 8.0, 1.0, 5.0);
  spec.seed = 42;
  FilterConfig cfg = test_config();
  cfg.sigma_a = 0.05;
  cfg.sigma_g = 0.005;
  cfg.sigma_ba = 1e-3;
  cfg.sigma_bg = 1e-4;
  SyntheticImu a = synthesize_imu_detailed(spec, cfg, 200.0, true);
  SyntheticImu b = synthesize_imu_detailed(spec, cfg, 200.0, true);
  REQUIRE(a.samples.size() == b.samples.size());
  REQUIRE(a.true_ba.size() == a.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].accel == b.samples[i].accel);
    CHECK(a.samples[i].gyro == b.samples[i].gyro);
    CHECK(a.true_ba[i] == b.true_ba[i]);
    CHECK(a.true_bg[i] == b.true_bg[i]);
  }
  // a different seed produces a different stream
  spec.seed = 43;
  SyntheticImu c = synthesize_imu_detailed(spec, cfg, 200.0, true);
  CHECK(a.samples[10].accel != c.samples[10].accel);
}

TEST_CASE("dead reckoning a noise-free imu stream reproduces the trajectory") {
  TrajectorySpec spec = spec_of(TrajectoryKind::FigureEight, 1.0, 10.0, 1.0, 10.0);
  FilterConfig cfg = test_config();
  const double rate = 800.0;
  std::vector<ImuSample> imu = synthesize_imu(spec, cfg, rate, false);
  Filter filter(cfg, truth_state(spec, 0.0),
                1e-6 * ErrorCovariance::Identity(), 0.0);
  for (const ImuSample& s : imu) {
    if (s.t <= 0.0) continue;
    filter.process_imu(s);
  }
  TruthSample truth = sample_truth(spec, filter.time());
  CHECK((filter.state().position_world() - truth.position_world).norm() < 1e-5);
  CHECK((filter.state().v - truth.velocity_body()).norm() < 1e-5);
}

TEST_CASE("noise-free hover measurements are zero flow at the variance floor") {
  TrajectorySpec spec = spec_of(TrajectoryKind::Hover, 1.0, 10.0, 1.0, 5.0);
  FilterConfig cfg = test_config();
  FrontendNoiseModel model;
  std::vector<SyntheticMeasurement> ms = synthesize_measurements(spec, cfg, 30.0, model);
  REQUIRE(ms.size() == 149);
  for (const auto& m : ms) {
    CHECK(m.meas.flow.norm() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(m.true_flow_px.norm() == doctest::Approx(0.0).epsilon(1e-9));
    for (int i = 0; i < 8; ++i) {
      CHECK(m.meas.r_net.matrix()(i, i) == doctest::Approx(1e-10).epsilon(1e-6));
    }
  }
}

TEST_CASE("frontend noise is standard normal against its reported sigma") {
  TrajectorySpec spec = spec_of(TrajectoryKind::Line, 1.0, 8.0, 1.0, 60.0);
  spec.seed = 7;
  FilterConfig cfg = test_config();
  FrontendNoiseModel model;
  model.base_sigma = 0.5;
  model.flow_scale = 0.1;
  model.seed = 99;
  std::vector<SyntheticMeasurement> ms = synthesize_measurements(spec, cfg, 30.0, model);
  std::vector<double> z;
  for (const auto& m : ms) {
    for (int i = 0; i < 8; ++i) {
      z.push_back((m.meas.flow[i] - m.clean_flow_px[i]) / std::sqrt(m.true_sigma2_px[i]));
    }
  }
  REQUIRE(z.size() > 10000);
  CHECK(ks_p_value(z) > 0.01);
}

TEST_CASE("a one meter per second pass at unit height yields the expected first flow") {
  // line amplitude chosen so the peak speed A * 2 pi / T is 1 m/s
  TrajectorySpec spec = spec_of(TrajectoryKind::Line, 10.0 / (2.0 * M_PI), 10.0, 1.0, 5.0);
  FilterConfig cfg = test_config();
  FrontendNoiseModel model;
  std::vector<SyntheticMeasurement> ms = synthesize_measurements(spec, cfg, 30.0, model);
  REQUIRE(!ms.empty());
  double mean_x = 0.0, mean_y = 0.0;
  for (int j = 0; j < 4; ++j) {
    mean_x += ms[0].true_flow_px[2 * j] / 4.0;
    mean_y += ms[0].true_flow_px[2 * j + 1] / 4.0;
  }
  CHECK(mean_x == doctest::Approx(-200.0 / 30.0).epsilon(0.02));
  CHECK(std::abs(mean_y) < 0.1);
}

TEST_CASE("the true homography composes across a split interval") {
  TrajectorySpec spec = spec_of(TrajectoryKind::Circle, 1.5, 8.0, 1.2, 10.0);
  spec.yaw_rate = 0.3;
  FilterConfig cfg = test_config();
  Homography h02 = true_homography(spec, cfg, 0.4, 1.2);
  Homography h01 = true_homography(spec, cfg, 0.4, 0.8);
  Homography h12 = true_homography(spec, cfg, 0.8, 1.2);
  CHECK((h12 * h01).distance(h02) < 1e-9);
  CHECK(true_homography(spec, cfg, 0.7, 0.7).distance(Homography::Identity(Frame::Pixel)) < 1e-12);
}

TEST_CASE("frame times honor the rate and never drop the first frame") {
  TrajectorySpec spec = spec_of(TrajectoryKind::Hover, 1.0, 10.0, 1.0, 10.0);
  FrontendNoiseModel model;
  std::vector<double> times = frame_times(spec, 30.0, model);
  REQUIRE(times.size() == 300);
  for (size_t k = 0; k < times.size(); ++k)
    CHECK(times[k] == doctest::Approx(k / 30.0).epsilon(1e-12));

  model.frame_drop_prob = 1.0;
  model.seed = 5;
  std::vector<double> only_first = frame_times(spec, 30.0, model);
  REQUIRE(only_first.size() == 1);
  CHECK(only_first[0] == 0.0);

  model.frame_drop_prob = 0.3;
  std::vector<double> some = frame_times(spec, 30.0, model);
  CHECK(some.size() < 300);
  CHECK(some.size() > 100);
  CHECK(some[0] == 0.0);
  CHECK(std::is_sorted(some.begin(), some.end()));
}

TEST_CASE("dead-reckoned priors approximate the true flow on a clean stream") {
  TrajectorySpec spec = spec_of(TrajectoryKind::FigureEight, 1.0, 10.0, 1.0, 5.0);
  FilterConfig cfg = test_config();
  FrontendNoiseModel model;
  std::vector<double> times = frame_times(spec, 30.0, model);
  std::vector<ImuSample> imu = synthesize_imu(spec, cfg, 800.0, false);
  std::vector<CornerFlow> priors = dead_reckoned_priors(spec, cfg, imu, times);
  std::vector<SyntheticMeasurement> ms = synthesize_measurements(spec, cfg, 30.0, model);
  REQUIRE(priors.size() == ms.size());
  for (size_t k = 0; k < priors.size(); k += 17) {
    CHECK((priors[k].as_vector() - ms[k].true_flow_px).norm() < 1e-2);
  }
}
