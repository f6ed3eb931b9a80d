#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ldct::metrics {

/// Fidelity numbers for one (reference, test) image pair. psnr is +inf for
/// a perfect match.
struct MetricReport {
  double mse = 0.0;
  double rmse = 0.0;
  double psnr = 0.0;
  double nrmse = 0.0;
  double max_y = 0.0;  // reference maximum
  double min_y = 0.0;  // reference minimum
};

template <class DA, class DB>
void check_dims(const Eigen::ArrayBase<DA>& reference, const Eigen::ArrayBase<DB>& test) {
  if (reference.rows() != test.rows() || reference.cols() != test.cols())
    throw std::invalid_argument("metrics: image dimensions differ");
}

/// Mean squared difference over all pixels.
template <class DA, class DB>
double mse(const Eigen::ArrayBase<DA>& reference, const Eigen::ArrayBase<DB>& test) {
  check_dims(reference, test);
  return (reference.derived() - test.derived()).square().sum() /
         double(reference.rows() * reference.cols());
}

/// 10*log10(MAX^2 / MSE) with MAX taken from the reference image.
/// A zero-MSE pair reports +infinity.
template <class DA, class DB>
double psnr(const Eigen::ArrayBase<DA>& reference, const Eigen::ArrayBase<DB>& test) {
  const double m = mse(reference, test);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = reference.maxCoeff();
  return 10.0 * std::log10(peak * peak / m);
}

/// RMSE normalized by the reference dynamic range. Throws for a flat
/// reference (max == min).
template <class DA, class DB>
double nrmse(const Eigen::ArrayBase<DA>& reference, const Eigen::ArrayBase<DB>& test) {
  const double m = mse(reference, test);
  const double hi = reference.maxCoeff();
  const double lo = reference.minCoeff();
  if (hi <= lo) throw std::invalid_argument("nrmse: flat reference image");
  return std::sqrt(m) / (hi - lo);
}

template <class DA, class DB>
MetricReport report(const Eigen::ArrayBase<DA>& reference, const Eigen::ArrayBase<DB>& test) {
  MetricReport r;
  r.mse = mse(reference, test);
  r.rmse = std::sqrt(r.mse);
  r.max_y = reference.maxCoeff();
  r.min_y = reference.minCoeff();
  r.psnr = (r.mse == 0.0) ? std::numeric_limits<double>::infinity()
                          : 10.0 * std::log10(r.max_y * r.max_y / r.mse);
  if (r.max_y > r.min_y) r.nrmse = r.rmse / (r.max_y - r.min_y);
  return r;
}

}  // namespace ldct::metrics
