#include "pvio/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pvio {

double gaussian_nll(const Eigen::Matrix<double, 8, 1>& target,
                    const Eigen::Matrix<double, 8, 1>& mu,
                    const Eigen::Matrix<double, 8, 1>& log_sigma2) {
  double nll = 0.0;
  for (int n = 0; n < 8; ++n) {
    const double s2 = std::exp(log_sigma2(n));
    const double r = target(n) - mu(n);
    nll += 0.5 * r * r / s2 + 0.5 * log_sigma2(n);
  }
  return nll;
}

PredictionSample fuse_samples(const std::vector<PredictionSample>& samples) {
  if (samples.empty()) throw EmptySampleSet("fuse_samples: no samples");
  const double m = static_cast<double>(samples.size());
  PredictionSample out;
  out.mu.setZero();
  out.sigma2.setZero();
  for (const auto& s : samples) {
    out.mu += s.mu;
    out.sigma2 += s.sigma2;  // predictive part
  }
  out.mu /= m;
  out.sigma2 /= m;
  Eigen::Matrix<double, 8, 1> emp = Eigen::Matrix<double, 8, 1>::Zero();
  for (const auto& s : samples) emp += (s.mu - out.mu).cwiseAbs2();
  out.sigma2 += emp / m;
  return out;
}

namespace {

std::vector<size_t> sort_indices_desc(const std::vector<ErrorVariancePair>& pairs,
                                      bool by_variance) {
  std::vector<size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return by_variance ? pairs[a].variance > pairs[b].variance : pairs[a].error > pairs[b].error;
  });
  return idx;
}

// Mean error of the pairs remaining after removing k*batch entries from the
// front of the given descending order, for k = 0 .. K.
std::vector<double> removal_means(const std::vector<ErrorVariancePair>& pairs,
                                  const std::vector<size_t>& order, int batch) {
  const size_t n = pairs.size();
  const size_t steps = (n - 1) / static_cast<size_t>(batch);
  // suffix sums over the removal order
  std::vector<double> suffix(n + 1, 0.0);
  for (size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + pairs[order[i]].error;
  std::vector<double> out;
  out.reserve(steps + 1);
  for (size_t k = 0; k <= steps; ++k) {
    const size_t removed = k * static_cast<size_t>(batch);
    out.push_back(suffix[removed] / static_cast<double>(n - removed));
  }
  return out;
}

}  // namespace

SparsificationCurves sparsification_curves(const std::vector<ErrorVariancePair>& pairs,
                                           int batch) {
  if (pairs.empty()) throw EmptyInput("sparsification_curves: no pairs");
  if (batch < 1) throw EmptyInput("sparsification_curves: batch must be >= 1");
  SparsificationCurves out;
  out.estimated = removal_means(pairs, sort_indices_desc(pairs, true), batch);
  out.oracle = removal_means(pairs, sort_indices_desc(pairs, false), batch);
  out.error.resize(out.estimated.size());
  out.removal_ratio.resize(out.estimated.size());
  for (size_t k = 0; k < out.estimated.size(); ++k) {
    out.error[k] = out.estimated[k] - out.oracle[k];
    out.removal_ratio[k] =
        static_cast<double>(k * static_cast<size_t>(batch)) / static_cast<double>(pairs.size());
  }
  return out;
}

double ause(const std::vector<ErrorVariancePair>& pairs, int batch) {
  SparsificationCurves c = sparsification_curves(pairs, batch);
  return std::accumulate(c.error.begin(), c.error.end(), 0.0);
}

double inside_rate(const std::vector<ErrorVariancePair>& pairs, double k_sigma) {
  if (pairs.empty()) throw EmptyInput("inside_rate: no pairs");
  size_t inside = 0;
  for (const auto& p : pairs) {
    if (p.error <= k_sigma * std::sqrt(p.variance)) ++inside;
  }
  return 100.0 * static_cast<double>(inside) / static_cast<double>(pairs.size());
}

FlowCovariance scale_measurement_covariance(const FlowCovariance& r_net, double k_var) {
  if (!(k_var > 0.0)) throw NonPositiveScale("scale_measurement_covariance: k_var <= 0");
  return FlowCovariance(k_var * r_net.matrix());
}

double trimmed_mean(std::vector<double> values, double trim_fraction) {
  if (values.empty()) throw EmptyInput("trimmed_mean: no values");
  std::sort(values.begin(), values.end());
  const size_t keep = values.size() -
                      static_cast<size_t>(std::floor(trim_fraction * values.size()));
  if (keep == 0) throw EmptyInput("trimmed_mean: everything trimmed");
  return std::accumulate(values.begin(), values.begin() + keep, 0.0) /
         static_cast<double>(keep);
}

}  // namespace pvio
