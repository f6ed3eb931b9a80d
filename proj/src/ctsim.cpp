#include "ldct/ctsim.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>

#include "ldct/rng.hpp"

namespace ldct::ctsim {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Derivation stream for per-detector-row dose engines.
constexpr std::uint64_t kDoseRowStream = 0x646f7365;

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

// Wrap-around Ram-Lak kernel sampled at the bin spacing: band-limited ramp
// response 1/(4 ds^2) at lag 0, -1/(pi n ds)^2 at odd lags, 0 at even lags.
Eigen::VectorXd ramp_kernel(int npad, double ds) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(npad);
  h[0] = 1.0 / (4.0 * ds * ds);
  for (int k = 1; k <= npad / 2; ++k) {
    if (k % 2 == 0) continue;
    const double v = -1.0 / (kPi * kPi * double(k) * double(k) * ds * ds);
    h[k] = v;
    h[npad - k] = v;
  }
  return h;
}

}  // namespace

void Geometry::validate() const {
  if (n_angles < 1 || n_bins < 1) throw std::invalid_argument("Geometry: need angles and bins");
  if (bin_spacing <= 0.0 || pixel_size <= 0.0)
    throw std::invalid_argument("Geometry: spacings must be positive");
  if (image_side < 1) throw std::invalid_argument("Geometry: image side must be >= 1");
}

Sinogram project(const Phantom& phantom, const Geometry& geom) {
  geom.validate();
  const double fov = 0.5 * (geom.n_bins - 1) * geom.bin_spacing;
  for (const auto& e : phantom.ellipses) {
    if (e.a <= 0.0 || e.b <= 0.0) throw std::invalid_argument("project: ellipse axes must be > 0");
    const double extent = std::hypot(e.cx, e.cy) + std::max(e.a, e.b);
    if (extent > fov) throw std::invalid_argument("project: phantom outside detector coverage");
  }

  Sinogram out;
  out.kind = SinogramKind::line_integral;
  out.data = ArrayXXd::Zero(geom.n_angles, geom.n_bins);
  for (int i = 0; i < geom.n_angles; ++i) {
    const double theta = kPi * double(i) / double(geom.n_angles);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (const auto& e : phantom.ellipses) {
      // Ray offset relative to the ellipse center, in the ellipse frame.
      const double tp = theta - e.angle;
      const double ctp = std::cos(tp), stp = std::sin(tp);
      const double r2 = e.a * e.a * ctp * ctp + e.b * e.b * stp * stp;
      const double s_center = e.cx * ct + e.cy * st;
      for (int j = 0; j < geom.n_bins; ++j) {
        const double s = geom.bin_pos(j) - s_center;
        const double d = r2 - s * s;
        if (d <= 0.0) continue;
        out.data(i, j) += 2.0 * e.mu * e.a * e.b * std::sqrt(d) / r2;
      }
    }
  }
  return out;
}

Sinogram simulate_dose(const Sinogram& sino, double b, double r, std::uint64_t seed) {
  if (sino.kind != SinogramKind::line_integral)
    throw std::invalid_argument("simulate_dose: expected line integrals");
  if (!(b > 0.0) || r < 0.0) throw std::invalid_argument("simulate_dose: need b > 0 and r >= 0");
  Sinogram out;
  out.kind = SinogramKind::photon_count;
  out.dose = {b, r};
  out.data.resize(sino.data.rows(), sino.data.cols());
  for (Eigen::Index i = 0; i < sino.data.rows(); ++i) {
    auto eng = make_engine(derive_seed(seed, kDoseRowStream, std::uint64_t(i)));
    for (Eigen::Index j = 0; j < sino.data.cols(); ++j) {
      const double mean = b * std::exp(-sino.data(i, j)) + r;
      std::poisson_distribution<long long> poisson(mean);
      out.data(i, j) = double(poisson(eng));
    }
  }
  return out;
}

Sinogram log_transform(const Sinogram& sino, double b, double r) {
  if (sino.kind != SinogramKind::photon_count)
    throw std::invalid_argument("log_transform: expected photon counts");
  Sinogram out;
  out.kind = SinogramKind::log_normalized;
  out.dose = {b, r};
  out.data = (b / (sino.data - r).max(kEpsilonCount)).log();
  return out;
}

ArrayXXd fbp(const Sinogram& sino, const Geometry& geom) {
  geom.validate();
  if (sino.kind == SinogramKind::photon_count)
    throw std::invalid_argument("fbp: photon counts must be log-transformed first");
  if (sino.data.rows() != geom.n_angles || sino.data.cols() != geom.n_bins)
    throw std::invalid_argument("fbp: sinogram does not match geometry");

  const int n_bins = geom.n_bins;
  const int npad = next_pow2(2 * n_bins);
  const double ds = geom.bin_spacing;

  Eigen::FFT<double> fft;
  Eigen::VectorXcd filter_spectrum;
  fft.fwd(filter_spectrum, ramp_kernel(npad, ds));

  ArrayXXd filtered(geom.n_angles, n_bins);
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(npad);
  Eigen::VectorXcd spectrum(npad), back(npad);
  for (int i = 0; i < geom.n_angles; ++i) {
    padded.setZero();
    padded.head(n_bins) = sino.data.row(i).matrix().transpose();
    fft.fwd(spectrum, padded);
    spectrum.array() *= ds * filter_spectrum.array();
    fft.inv(back, spectrum);
    filtered.row(i) = back.head(n_bins).real().array().transpose();
  }

  const int n = geom.image_side;
  ArrayXXd image = ArrayXXd::Zero(n, n);
  const double half = 0.5 * (n - 1);
  const double bin_center = 0.5 * (n_bins - 1);
  for (int i = 0; i < geom.n_angles; ++i) {
    const double theta = kPi * double(i) / double(geom.n_angles);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int iy = 0; iy < n; ++iy) {
      const double y = (iy - half) * geom.pixel_size;
      for (int ix = 0; ix < n; ++ix) {
        const double x = (ix - half) * geom.pixel_size;
        const double u = (x * ct + y * st) / ds + bin_center;
        const int j0 = int(std::floor(u));
        if (j0 < 0 || j0 + 1 >= n_bins) continue;
        const double frac = u - j0;
        image(iy, ix) += (1.0 - frac) * filtered(i, j0) + frac * filtered(i, j0 + 1);
      }
    }
  }
  return image * (kPi / double(geom.n_angles));
}

ImagePair generate_pair(const Phantom& phantom, const Geometry& geom, double b_routine, double r,
                        std::uint64_t seed) {
  if (!(b_routine > 0.0)) throw std::invalid_argument("generate_pair: b_routine must be > 0");
  const Sinogram clean = project(phantom, geom);
  ImagePair out;
  out.ground_truth = fbp(clean, geom);
  const std::uint64_t seed_routine = derive_seed(seed, stream::kRoutineDose);
  const std::uint64_t seed_quarter = derive_seed(seed, stream::kQuarterDose);
  out.routine =
      fbp(log_transform(simulate_dose(clean, b_routine, r, seed_routine), b_routine, r), geom);
  const double b_quarter = b_routine / 4.0;
  out.quarter =
      fbp(log_transform(simulate_dose(clean, b_quarter, r, seed_quarter), b_quarter, r), geom);
  return out;
}

ArrayXXd hu_from_mu(const ArrayXXd& mu, double mu_water) {
  return 1000.0 * (mu - mu_water) / mu_water;
}

ArrayXXd mu_from_hu(const ArrayXXd& hu, double mu_water) {
  return mu_water * (1.0 + hu / 1000.0);
}

}  // namespace ldct::ctsim
