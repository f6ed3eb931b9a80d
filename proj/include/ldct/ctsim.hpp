#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace ldct::ctsim {

using ArrayXXd = Eigen::ArrayXXd;

/// Additive attenuation contribution, mm and mm^-1 units.
struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double a = 1.0;
  double b = 1.0;
  double angle = 0.0;
  double mu = 0.0;
};

struct Phantom {
  std::vector<Ellipse> ellipses;
};

/// Parallel-beam acquisition over [0, pi).
struct Geometry {
  int n_angles = 720;
  int n_bins = 729;
  double bin_spacing = 1.0;
  int image_side = 256;
  double pixel_size = 1.0;

  void validate() const;
  /// Signed detector coordinate of bin j, centered on the rotation axis.
  double bin_pos(int j) const { return (j - 0.5 * (n_bins - 1)) * bin_spacing; }
};

enum class SinogramKind { line_integral, photon_count, log_normalized };

struct Dose {
  double b = 1e5;
  double r = 10.0;
};

struct Sinogram {
  ArrayXXd data;  // n_angles x n_bins
  SinogramKind kind = SinogramKind::line_integral;
  Dose dose;
};

/// Photon-starvation clamp for the log transform, in counts.
inline constexpr double kEpsilonCount = 0.5;

/// Analytic ellipse chord-length line integrals; no rasterization error.
Sinogram project(const Phantom& phantom, const Geometry& geom);

/// Draws I ~ Poisson(b * exp(-l) + r) per bin. Each detector row uses its own
/// engine derived from (seed, row), so generation order never matters.
Sinogram simulate_dose(const Sinogram& sino, double b, double r, std::uint64_t seed);

/// y = ln(b / max(I - r, kEpsilonCount)); starved bins clamp instead of
/// blowing up, which is what bends the data and produces streaks.
Sinogram log_transform(const Sinogram& sino, double b, double r);

/// Ram-Lak filtered backprojection onto the image_side^2 grid.
ArrayXXd fbp(const Sinogram& sino, const Geometry& geom);

struct ImagePair {
  ArrayXXd routine;
  ArrayXXd quarter;
  ArrayXXd ground_truth;
};

/// Full pipeline: noiseless truth plus reconstructions at dose b and b/4,
/// the two noisy scans drawn from independent seed streams.
ImagePair generate_pair(const Phantom& phantom, const Geometry& geom, double b_routine, double r,
                        std::uint64_t seed);

inline double hu_from_mu(double mu, double mu_water) {
  return 1000.0 * (mu - mu_water) / mu_water;
}
inline double mu_from_hu(double hu, double mu_water) { return mu_water * (1.0 + hu / 1000.0); }

ArrayXXd hu_from_mu(const ArrayXXd& mu, double mu_water);
ArrayXXd mu_from_hu(const ArrayXXd& hu, double mu_water);

}  // namespace ldct::ctsim
