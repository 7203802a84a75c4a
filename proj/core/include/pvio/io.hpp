#pragma once

#include <string>
#include <vector>

#include "pvio/ekf.hpp"
#include "pvio/eval.hpp"
#include "pvio/simulator.hpp"
#include "pvio/uncertainty.hpp"

namespace pvio {

// imu csv: t,ax,ay,az,gx,gy,gz
std::vector<ImuSample> read_imu_csv(const std::string& path);
void write_imu_csv(const std::string& path, const std::vector<ImuSample>& samples);

// measurement csv: t, 8 flow components, 8 variances, optional used_prior flag
std::vector<FlowMeasurement> read_measurement_csv(const std::string& path);
void write_measurement_csv(const std::string& path, const std::vector<FlowMeasurement>& meas);

// trajectory file: "t x y z qx qy qz qw" per line
Trajectory read_tum(const std::string& path);
void write_tum(const std::string& path, const Trajectory& traj);

// error,variance per line
std::vector<ErrorVariancePair> read_error_variance_csv(const std::string& path);
void write_error_variance_csv(const std::string& path,
                              const std::vector<ErrorVariancePair>& pairs);

/// Flat key/value filter configuration. Lines are `key value...`, `#` starts a
/// comment; unknown keys and malformed values raise ParseError with the line
/// number.
FilterConfig read_filter_config(const std::string& path);
void write_filter_config(const std::string& path, const FilterConfig& cfg);

/// Scenario description for the generator: trajectory plus frontend noise and
/// rates. Same flat key/value syntax.
struct ScenarioSpec {
  TrajectorySpec trajectory;
  FrontendNoiseModel noise;
  double imu_rate = 200.0;
  double fps = 30.0;
};
ScenarioSpec read_scenario(const std::string& path);
void write_scenario(const std::string& path, const ScenarioSpec& spec);

}  // namespace pvio
