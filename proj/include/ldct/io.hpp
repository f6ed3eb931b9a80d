#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ldct/nn.hpp"
#include "ldct/tensor.hpp"

namespace ldct::io {

using json = nlohmann::json;

/// One RFT1 record: magic "RFT1", little-endian u32 rank, u32 dims[rank],
/// u8 dtype (0 = float32, 1 = float64), then raw row-major data.
struct TensorRecord {
  std::vector<std::uint32_t> dims;
  std::uint8_t dtype = 0;
  std::vector<float> f32;
  std::vector<double> f64;

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return dims.empty() ? 0 : n;
  }
  double at(std::size_t i) const { return dtype == 0 ? double(f32[i]) : f64[i]; }
};

void write_rft1(std::ostream& out, const std::vector<std::uint32_t>& dims, const float* data);
void write_rft1(std::ostream& out, const std::vector<std::uint32_t>& dims, const double* data);
TensorRecord read_rft1(std::istream& in);

/// Rank-2 image record; Eigen's column-major storage is transposed into the
/// file's row-major order.
void write_rft1_file(const std::string& path, const Eigen::ArrayXXd& image);
Eigen::ArrayXXd read_rft1_image(const std::string& path);

template <class Scalar>
void write_rft1(std::ostream& out, const Tensor<Scalar>& t) {
  const std::vector<std::uint32_t> dims{std::uint32_t(t.n()), std::uint32_t(t.c()),
                                        std::uint32_t(t.h()), std::uint32_t(t.w())};
  write_rft1(out, dims, t.data());
}

template <class Scalar>
Tensor<Scalar> tensor_from_record(const TensorRecord& rec) {
  if (rec.dims.size() != 4) throw std::runtime_error("tensor_from_record: expected rank 4");
  Tensor<Scalar> t(rec.dims[0], rec.dims[1], rec.dims[2], rec.dims[3]);
  for (std::size_t i = 0; i < rec.count(); ++i) t.data()[i] = Scalar(rec.at(i));
  return t;
}

/// WDN1 weights container: magic "WDN1", u32 JSON header length, header
/// bytes, u32 tensor count, then per tensor a u16 name length, the name and
/// an embedded RFT1 record.
struct NamedTensor {
  std::string name;
  TensorRecord rec;
};

struct Checkpoint {
  json header;
  std::vector<NamedTensor> tensors;
};

void write_wdn1(std::ostream& out, const Checkpoint& ck);
Checkpoint read_wdn1(std::istream& in);
void write_wdn1_file(const std::string& path, const Checkpoint& ck);
Checkpoint read_wdn1_file(const std::string& path);

/// 16-bit binary PGM with the HU window mapped onto [0, 65535].
void write_pgm16(const std::string& path, const Eigen::ArrayXXd& hu, double window_lo = -160.0,
                 double window_hi = 240.0);

template <class Scalar>
constexpr std::uint8_t dtype_of() {
  return std::is_same_v<Scalar, float> ? 0 : 1;
}

/// Serializes parameters in their canonical order with an architecture
/// header; `extra` entries (normalization constants, resume state) are merged
/// into the header.
template <class Scalar>
Checkpoint to_checkpoint(nn::NetworkParams<Scalar>& params, const json& extra = json::object()) {
  Checkpoint ck;
  ck.header = {{"format", "WDN1"},
               {"dtype", dtype_of<Scalar>() == 0 ? "f32" : "f64"},
               {"channels", params.arch.channels},
               {"modules", params.arch.modules},
               {"bands", params.arch.bands},
               {"variant", nn::to_string(params.arch.variant)}};
  ck.header.update(extra);
  for (auto& r : nn::param_refs(params)) {
    TensorRecord rec;
    rec.dims = r.dims;
    rec.dtype = dtype_of<Scalar>();
    if constexpr (std::is_same_v<Scalar, float>)
      rec.f32.assign(r.value->data(), r.value->data() + r.value->size());
    else
      rec.f64.assign(r.value->data(), r.value->data() + r.value->size());
    ck.tensors.push_back({r.name, std::move(rec)});
  }
  return ck;
}

template <class Scalar>
nn::NetworkParams<Scalar> from_checkpoint(const Checkpoint& ck) {
  nn::Arch arch;
  arch.channels = ck.header.at("channels").get<int>();
  arch.modules = ck.header.at("modules").get<int>();
  arch.bands = ck.header.at("bands").get<int>();
  arch.variant = nn::variant_from_string(ck.header.at("variant").get<std::string>());
  auto params = nn::make_params<Scalar>(arch);

  std::unordered_map<std::string, const TensorRecord*> by_name;
  for (const auto& t : ck.tensors) by_name[t.name] = &t.rec;
  for (auto& r : nn::param_refs(params)) {
    auto it = by_name.find(r.name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint missing tensor: " + r.name);
    const TensorRecord& rec = *it->second;
    if (Eigen::Index(rec.count()) != r.value->size())
      throw std::runtime_error("checkpoint tensor size mismatch: " + r.name);
    for (Eigen::Index i = 0; i < r.value->size(); ++i)
      (*r.value)[i] = Scalar(rec.at(std::size_t(i)));
  }
  return params;
}

}  // namespace ldct::io
