#pragma once

#include <Eigen/Core>
#include <vector>

#include "pvio/geometry.hpp"

namespace pvio {

/// One forward pass of a predictive-uncertainty frontend: 8-d flow mean and
/// per-element predictive variances.
struct PredictionSample {
  Eigen::Matrix<double, 8, 1> mu;
  Eigen::Matrix<double, 8, 1> sigma2;
};

struct ErrorVariancePair {
  double error = 0.0;     // absolute error, pixels
  double variance = 0.0;  // pixels^2
};

/// Sum over the 8 elements of the per-element Gaussian NLL,
/// 1/(2 sigma^2) (t - mu)^2 + 1/2 log sigma^2, with log-variance inputs.
double gaussian_nll(const Eigen::Matrix<double, 8, 1>& target,
                    const Eigen::Matrix<double, 8, 1>& mu,
                    const Eigen::Matrix<double, 8, 1>& log_sigma2);

/// Sample fusion: mean of means; variance = mean predictive variance plus
/// population (1/M) variance of the sample means.
PredictionSample fuse_samples(const std::vector<PredictionSample>& samples);

struct SparsificationCurves {
  std::vector<double> removal_ratio;
  std::vector<double> estimated;  // mean error after variance-ordered removal
  std::vector<double> oracle;     // mean error after error-ordered removal
  std::vector<double> error;      // estimated - oracle
};

/// Remove `batch` pairs per step, highest variance (resp. highest error)
/// first; record the mean error of the remaining pairs at each step. Ties are
/// broken by stable input order.
SparsificationCurves sparsification_curves(const std::vector<ErrorVariancePair>& pairs,
                                           int batch);

/// Sum of the sparsification error-curve ordinates over all removal steps.
double ause(const std::vector<ErrorVariancePair>& pairs, int batch);

/// Percentage of pairs with error <= k_sigma * sqrt(variance).
double inside_rate(const std::vector<ErrorVariancePair>& pairs, double k_sigma);

/// R_meas = k_var * R_net.
FlowCovariance scale_measurement_covariance(const FlowCovariance& r_net, double k_var);

/// Mean after dropping the given top fraction of the biggest values.
/// Reporting utility only; not part of any metric.
double trimmed_mean(std::vector<double> values, double trim_fraction);

}  // namespace pvio
