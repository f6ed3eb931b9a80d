#pragma once

#include <Eigen/Core>

#include <vector>

namespace ldct::nsct {

using Eigen::ArrayXd;
using Eigen::ArrayXXd;

/// Undecimated pyramid + directional filter bank description.
/// The pyramid is an a trous Laplacian split: the analysis highpass is
/// implicitly H1 = 1 - H0, so synthesis is a plain band sum and
/// reconstruction is exact by construction.
struct FilterBank {
  ArrayXd h0;                   // 1-D lowpass taps, DC gain 1
  int levels = 4;               // pyramid levels; last level is the residual lowpass
  std::vector<int> directions;  // direction count per highpass level, finest first
  double wedge_transition = 0.15;  // angular crossfade width [rad] of the frequency wedges

  int band_count() const {
    int n = 1;
    for (int d : directions) n += d;
    return n;
  }
};

/// Undecimated coefficient stack: directions[0] bands for level 1, then
/// level 2, ..., and the residual lowpass last. Every band has the size
/// of the source image.
struct ContourletCoeffs {
  std::vector<ArrayXXd> bands;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

/// Validates and assembles a filter bank.
/// Throws std::invalid_argument on: levels < 2, directions size mismatch,
/// non-power-of-two direction counts, h0 DC gain != 1, negative transition.
FilterBank build_filter_bank(int levels, std::vector<int> directions, ArrayXd h0,
                             double wedge_transition = 0.15);

/// The paper-scale bank: binomial [1 4 6 4 1]/16, 4 levels, 8/4/2 directions.
FilterBank default_filter_bank();

/// Composite 2-D pyramid filter for subband n of a depth-k cascade:
/// the product of a trous lowpass kernels H0(z^(2^j)), j = 0..n-2, times
/// the upsampled highpass H1(z^(2^(n-1))) for 1 <= n < 2^k, or the pure
/// lowpass product over j = 0..n-1 for n = 2^k. Upsampling a filter by
/// 2^j inserts 2^j - 1 zeros between taps. Kernels are odd-sized and
/// centered.
ArrayXXd equivalent_pyramid_filter(const FilterBank& bank, int n, int k);

/// Angular wedge masks for an FFT grid of the given size: `count` masks
/// that are nonnegative, Hermitian-symmetric and sum to exactly 1 at every
/// frequency sample. Wedge k covers orientation [k*pi/count, (k+1)*pi/count)
/// with a raised-cosine crossfade of the given width.
std::vector<ArrayXXd> directional_masks(Eigen::Index rows, Eigen::Index cols, int count,
                                        double transition);

/// Circular a trous lowpass: separable convolution with h0 upsampled by
/// `dilation` (zeros inserted between taps), wrap-around boundaries.
ArrayXXd atrous_lowpass(const ArrayXXd& image, const ArrayXd& h0, Eigen::Index dilation);

/// Analysis: split into per-level directional bands plus residual lowpass.
/// Requires a square image with power-of-two side.
ContourletCoeffs forward(const ArrayXXd& image, const FilterBank& bank);

/// Synthesis: element-wise band sum (exact under the additive analysis).
ArrayXXd inverse(const ContourletCoeffs& coeffs, const FilterBank& bank);

/// Soft threshold on the directional bands; the residual lowpass passes
/// through untouched. tau must be >= 0.
ContourletCoeffs shrink_denoise(const ContourletCoeffs& coeffs, double tau);

/// Circular shift helper (positive shifts move content down/right).
ArrayXXd circshift(const ArrayXXd& image, Eigen::Index dy, Eigen::Index dx);

}  // namespace ldct::nsct
