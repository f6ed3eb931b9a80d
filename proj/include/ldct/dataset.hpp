#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldct/ctsim.hpp"
#include "ldct/io.hpp"
#include "ldct/nn.hpp"
#include "ldct/nsct.hpp"
#include "ldct/tensor.hpp"

namespace ldct::dataset {

/// Procedural torso-like phantom: a soft-tissue body ellipse, a few interior
/// structures, and an opposed pair of high-attenuation bone inserts whose
/// connecting rays starve the detector at low dose.
ctsim::Phantom random_phantom(std::uint64_t seed, int index);

/// Conversion constants between attenuation images and the dimensionless
/// values the network trains on: mu -> HU -> HU / hu_scale.
struct Normalization {
  double mu_water = 0.02;
  double hu_scale = 1000.0;
};

enum class Repr { wavelet, image };

inline Repr repr_for(nn::Variant v) {
  return v == nn::Variant::image_domain ? Repr::image : Repr::wavelet;
}

/// Stacks bands into a (1, bands, H, W) tensor and back.
TensorD coeffs_to_tensor(const nsct::ContourletCoeffs& coeffs);
nsct::ContourletCoeffs coeffs_from_tensor(const TensorD& t);

/// Attenuation image -> network input tensor: normalize, then either the
/// full band stack (wavelet) or the raw image as a single channel.
TensorF encode_slice(const ctsim::ArrayXXd& mu, Repr repr, const Normalization& norm,
                     const nsct::FilterBank& bank);

/// Inverse of encode_slice; returns the attenuation image.
ctsim::ArrayXXd decode_slice(const TensorF& t, Repr repr, const Normalization& norm,
                             const nsct::FilterBank& bank);

inline constexpr const char* kManifestFormat = "ldct-dataset-v1";
inline constexpr const char* kKindGroundTruth = "ground_truth";
inline constexpr const char* kKindRoutine = "routine";
inline constexpr const char* kKindQuarter = "quarter";

std::string slice_prefix(int id);
std::string slice_filename(int id, const std::string& kind);

struct Manifest {
  std::uint64_t seed = 0;
  ctsim::Geometry geometry;
  double b_routine = 1e5;
  double r = 10.0;
  double mu_water = 0.02;
  std::vector<int> train_ids;
  std::vector<int> test_ids;
  std::string config_echo;

  double b_quarter() const { return b_routine / 4.0; }
};

io::json to_json(const Manifest& m);
Manifest manifest_from_json(const io::json& j);

void save_manifest(const std::string& dir, const Manifest& m);
Manifest load_manifest(const std::string& dir);

/// Attenuation image of one stored slice.
ctsim::ArrayXXd load_slice(const std::string& dir, int id, const std::string& kind);

}  // namespace ldct::dataset
