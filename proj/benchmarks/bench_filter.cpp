#include <benchmark/benchmark.h>

#include "pvio/ekf.hpp"
#include "pvio/geometry.hpp"

namespace {

pvio::FilterConfig bench_config() {
  pvio::FilterConfig cfg;
  cfg.intrinsics = {200.0, 200.0, 160.0, 120.0, 320, 240};
  cfg.sigma_a = 0.02;
  cfg.sigma_g = 0.002;
  cfg.sigma_ba = 0.001;
  cfg.sigma_bg = 1e-4;
  return cfg;
}

pvio::EkfState bench_state() {
  pvio::EkfState s;
  s.p = {0.2, -0.1, -1.0};
  s.v = {1.0, 0.3, 0.05};
  s.q = Eigen::Quaterniond(Eigen::AngleAxisd(0.1, Eigen::Vector3d(0.3, 0.5, 1).normalized()));
  return s;
}

void BM_Propagate(benchmark::State& state) {
  const pvio::FilterConfig cfg = bench_config();
  pvio::EkfState x = bench_state();
  pvio::ErrorCovariance p = 0.01 * pvio::ErrorCovariance::Identity();
  pvio::ImuSample imu{0.0, {0.1, -0.2, -9.8}, {0.01, 0.02, 0.3}};
  for (auto _ : state) {
    auto out = pvio::propagate(x, p, imu, 0.005, cfg);
    benchmark::DoNotOptimize(out.cov.sum());
  }
}
BENCHMARK(BM_Propagate);

void BM_Update(benchmark::State& state) {
  const pvio::FilterConfig cfg = bench_config();
  pvio::EkfState x = bench_state();
  pvio::ErrorCovariance p = 0.01 * pvio::ErrorCovariance::Identity();
  x.flow.setConstant(0.01);
  pvio::FlowMeasurement m;
  m.t = 0.0;
  m.flow.setConstant(2.0);
  m.r_net = pvio::FlowCovariance::FromDiagonal(
      Eigen::Matrix<double, 8, 1>::Constant(0.25));
  for (auto _ : state) {
    auto out = pvio::update(x, p, m, cfg);
    benchmark::DoNotOptimize(out.nis);
  }
}
BENCHMARK(BM_Update);

void BM_FlowToHomography(benchmark::State& state) {
  const pvio::FilterConfig cfg = bench_config();
  pvio::CornerFlow f;
  f.frame = pvio::Frame::Pixel;
  f.f = {Eigen::Vector2d{2.0, 1.0}, {1.5, -0.5}, {-1.0, 0.7}, {0.3, 2.2}};
  for (auto _ : state) {
    auto h = pvio::flow_to_homography(f, cfg.intrinsics);
    benchmark::DoNotOptimize(h.matrix().sum());
  }
}
BENCHMARK(BM_FlowToHomography);

}  // namespace

BENCHMARK_MAIN();
