#include "ldct/nsct.hpp"

#include "ldct/fft2d.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ldct::nsct {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_power_of_two(Eigen::Index v) { return v > 0 && (v & (v - 1)) == 0; }

// Full (size-growing) 2-D convolution of two kernels.
ArrayXXd conv2_full(const ArrayXXd& a, const ArrayXXd& b) {
  ArrayXXd out = ArrayXXd::Zero(a.rows() + b.rows() - 1, a.cols() + b.cols() - 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double v = a(i, j);
      if (v == 0.0) continue;
      out.block(i, j, b.rows(), b.cols()) += v * b;
    }
  return out;
}

// h0 x h0 separable kernel with 2^j - 1 zeros inserted between taps.
ArrayXXd atrous_kernel_2d(const ArrayXd& h0, int j) {
  const Eigen::Index dilation = Eigen::Index(1) << j;
  const Eigen::Index len = (h0.size() - 1) * dilation + 1;
  ArrayXd up = ArrayXd::Zero(len);
  for (Eigen::Index t = 0; t < h0.size(); ++t) up[t * dilation] = h0[t];
  return up.matrix() * up.matrix().transpose();
}

}  // namespace

FilterBank build_filter_bank(int levels, std::vector<int> directions, ArrayXd h0,
                             double wedge_transition) {
  if (levels < 2) throw std::invalid_argument("FilterBank: levels must be >= 2");
  if (static_cast<int>(directions.size()) != levels - 1)
    throw std::invalid_argument("FilterBank: need one direction count per highpass level");
  for (int d : directions)
    if (d < 1 || (d & (d - 1)) != 0)
      throw std::invalid_argument("FilterBank: direction counts must be powers of two");
  if (h0.size() < 1) throw std::invalid_argument("FilterBank: empty h0");
  if (std::abs(h0.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("FilterBank: h0 DC gain must be 1");
  if (wedge_transition < 0.0)
    throw std::invalid_argument("FilterBank: wedge_transition must be >= 0");
  return FilterBank{std::move(h0), levels, std::move(directions), wedge_transition};
}

FilterBank default_filter_bank() {
  ArrayXd h0(5);
  h0 << 1.0, 4.0, 6.0, 4.0, 1.0;
  h0 /= 16.0;
  return build_filter_bank(4, {8, 4, 2}, h0);
}

ArrayXXd equivalent_pyramid_filter(const FilterBank& bank, int n, int k) {
  if (k < 1) throw std::invalid_argument("equivalent_pyramid_filter: k must be >= 1");
  const int n_max = 1 << k;
  if (n < 1 || n > n_max)
    throw std::invalid_argument("equivalent_pyramid_filter: n out of [1, 2^k]");

  ArrayXXd kernel = ArrayXXd::Constant(1, 1, 1.0);
  if (n == n_max) {
    for (int j = 0; j < n; ++j) kernel = conv2_full(kernel, atrous_kernel_2d(bank.h0, j));
  } else {
    for (int j = 0; j <= n - 2; ++j) kernel = conv2_full(kernel, atrous_kernel_2d(bank.h0, j));
    // H1(z^(2^(n-1))) = delta - H0(z^(2^(n-1)))
    ArrayXXd a = atrous_kernel_2d(bank.h0, n - 1);
    ArrayXXd h1 = -a;
    h1(a.rows() / 2, a.cols() / 2) += 1.0;
    kernel = conv2_full(kernel, h1);
  }
  return kernel;
}

std::vector<ArrayXXd> directional_masks(Eigen::Index rows, Eigen::Index cols, int count,
                                        double transition) {
  std::vector<ArrayXXd> masks(count, ArrayXXd::Zero(rows, cols));
  if (count == 1) {
    masks[0].setOnes();
    return masks;
  }
  const double half = kPi / (2.0 * count);
  const double t = std::min(transition, kPi / count);
  std::vector<double> w(count);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double fy_raw = (i <= rows / 2) ? double(i) : double(i) - double(rows);
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double fx_raw = (j <= cols / 2) ? double(j) : double(j) - double(cols);
      double fx = fx_raw, fy = fy_raw;
      // Canonical half-plane representative: guarantees mask(-f) == mask(f)
      // bit-exactly, which keeps real inputs mapping to real bands.
      if (fy < 0.0 || (fy == 0.0 && fx < 0.0)) {
        fx = -fx;
        fy = -fy;
      }
      if (fx == 0.0 && fy == 0.0) {
        for (int d = 0; d < count; ++d) masks[d](i, j) = 1.0 / count;
        continue;
      }
      const double theta = std::atan2(fy, fx);  // in [0, pi]
      double sum = 0.0;
      for (int d = 0; d < count; ++d) {
        const double center = (d + 0.5) * kPi / count;
        const double delta = std::abs(std::remainder(theta - center, kPi));
        double wd;
        if (t <= 0.0) {
          wd = (delta <= half) ? 1.0 : 0.0;
        } else {
          const double lo = half - 0.5 * t;
          const double hi = half + 0.5 * t;
          if (delta <= lo)
            wd = 1.0;
          else if (delta >= hi)
            wd = 0.0;
          else
            wd = 0.5 * (1.0 + std::cos(kPi * (delta - lo) / t));
        }
        w[d] = wd;
        sum += wd;
      }
      if (sum <= 0.0) {
        for (int d = 0; d < count; ++d) masks[d](i, j) = 1.0 / count;
      } else {
        for (int d = 0; d < count; ++d) masks[d](i, j) = w[d] / sum;
      }
    }
  }
  return masks;
}

ArrayXXd atrous_lowpass(const ArrayXXd& image, const ArrayXd& h0, Eigen::Index dilation) {
  const Eigen::Index rows = image.rows(), cols = image.cols();
  const Eigen::Index taps = h0.size();
  const Eigen::Index center = taps / 2;
  ArrayXXd tmp(rows, cols), out(rows, cols);
  // columns (vertical pass)
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (Eigen::Index t = 0; t < taps; ++t) {
        Eigen::Index src = i + (t - center) * dilation;
        src %= rows;
        if (src < 0) src += rows;
        acc += h0[t] * image(src, j);
      }
      tmp(i, j) = acc;
    }
  }
  // rows (horizontal pass)
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (Eigen::Index t = 0; t < taps; ++t) {
        Eigen::Index src = j + (t - center) * dilation;
        src %= cols;
        if (src < 0) src += cols;
        acc += h0[t] * tmp(i, src);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

ContourletCoeffs forward(const ArrayXXd& image, const FilterBank& bank) {
  if (image.rows() != image.cols())
    throw std::invalid_argument("nsct::forward: image must be square");
  if (!is_power_of_two(image.rows()))
    throw std::invalid_argument("nsct::forward: image side must be a power of two");

  ContourletCoeffs coeffs;
  coeffs.rows = image.rows();
  coeffs.cols = image.cols();
  coeffs.bands.reserve(bank.band_count());

  Fft2D fft;
  ArrayXXd current = image;
  for (int level = 0; level < bank.levels - 1; ++level) {
    const Eigen::Index dilation = Eigen::Index(1) << level;
    ArrayXXd low = atrous_lowpass(current, bank.h0, dilation);
    ArrayXXd high = current - low;
    const int dirs = bank.directions[level];
    if (dirs == 1) {
      coeffs.bands.push_back(std::move(high));
    } else {
      const auto masks = directional_masks(high.rows(), high.cols(), dirs, bank.wedge_transition);
      const ArrayXXcd spectrum = fft.forward(high);
      for (int d = 0; d < dirs; ++d)
        coeffs.bands.push_back(fft.inverse_real(spectrum * masks[d]));
    }
    current = std::move(low);
  }
  coeffs.bands.push_back(std::move(current));
  return coeffs;
}

ArrayXXd inverse(const ContourletCoeffs& coeffs, const FilterBank& bank) {
  if (static_cast<int>(coeffs.bands.size()) != bank.band_count())
    throw std::invalid_argument("nsct::inverse: band count does not match bank");
  for (const auto& b : coeffs.bands)
    if (b.rows() != coeffs.rows || b.cols() != coeffs.cols)
      throw std::invalid_argument("nsct::inverse: band shape mismatch");
  ArrayXXd out = ArrayXXd::Zero(coeffs.rows, coeffs.cols);
  for (const auto& b : coeffs.bands) out += b;
  return out;
}

ContourletCoeffs shrink_denoise(const ContourletCoeffs& coeffs, double tau) {
  if (tau < 0.0) throw std::invalid_argument("shrink_denoise: tau must be >= 0");
  ContourletCoeffs out;
  out.rows = coeffs.rows;
  out.cols = coeffs.cols;
  out.bands.reserve(coeffs.bands.size());
  for (std::size_t b = 0; b + 1 < coeffs.bands.size(); ++b)
    out.bands.push_back(coeffs.bands[b].sign() * (coeffs.bands[b].abs() - tau).max(0.0));
  out.bands.push_back(coeffs.bands.back());
  return out;
}

ArrayXXd circshift(const ArrayXXd& image, Eigen::Index dy, Eigen::Index dx) {
  const Eigen::Index rows = image.rows(), cols = image.cols();
  ArrayXXd out(rows, cols);
  dy %= rows;
  if (dy < 0) dy += rows;
  dx %= cols;
  if (dx < 0) dx += cols;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      out((i + dy) % rows, (j + dx) % cols) = image(i, j);
  return out;
}

}  // namespace ldct::nsct
