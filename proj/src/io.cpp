#include "ldct/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace ldct::io {

static_assert(std::endian::native == std::endian::little,
              "RFT1/WDN1 writers assume a little-endian host");

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_u16(std::ostream& out, std::uint16_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("RFT1: truncated stream");
  return v;
}

std::uint16_t get_u16(std::istream& in) {
  std::uint16_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("RFT1: truncated stream");
  return v;
}

template <class Scalar>
void write_rft1_impl(std::ostream& out, const std::vector<std::uint32_t>& dims,
                     const Scalar* data) {
  out.write("RFT1", 4);
  put_u32(out, std::uint32_t(dims.size()));
  std::size_t n = 1;
  for (auto d : dims) {
    put_u32(out, d);
    n *= d;
  }
  const std::uint8_t dtype = dtype_of<Scalar>();
  out.write(reinterpret_cast<const char*>(&dtype), 1);
  out.write(reinterpret_cast<const char*>(data), std::streamsize(n * sizeof(Scalar)));
  if (!out) throw std::runtime_error("RFT1: write failed");
}

}  // namespace

void write_rft1(std::ostream& out, const std::vector<std::uint32_t>& dims, const float* data) {
  write_rft1_impl(out, dims, data);
}

void write_rft1(std::ostream& out, const std::vector<std::uint32_t>& dims, const double* data) {
  write_rft1_impl(out, dims, data);
}

TensorRecord read_rft1(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RFT1", 4) != 0) throw std::runtime_error("RFT1: bad magic");
  TensorRecord rec;
  const std::uint32_t rank = get_u32(in);
  if (rank > 8) throw std::runtime_error("RFT1: implausible rank");
  rec.dims.resize(rank);
  for (auto& d : rec.dims) d = get_u32(in);
  std::uint8_t dtype = 0;
  in.read(reinterpret_cast<char*>(&dtype), 1);
  if (!in || dtype > 1) throw std::runtime_error("RFT1: bad dtype");
  rec.dtype = dtype;
  const std::size_t n = rec.count();
  if (dtype == 0) {
    rec.f32.resize(n);
    in.read(reinterpret_cast<char*>(rec.f32.data()), std::streamsize(n * sizeof(float)));
  } else {
    rec.f64.resize(n);
    in.read(reinterpret_cast<char*>(rec.f64.data()), std::streamsize(n * sizeof(double)));
  }
  if (!in) throw std::runtime_error("RFT1: truncated data");
  return rec;
}

void write_rft1_file(const std::string& path, const Eigen::ArrayXXd& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const std::vector<std::uint32_t> dims{std::uint32_t(image.rows()), std::uint32_t(image.cols())};
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major =
      image.matrix();
  write_rft1(out, dims, row_major.data());
}

Eigen::ArrayXXd read_rft1_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  const TensorRecord rec = read_rft1(in);
  if (rec.dims.size() != 2) throw std::runtime_error("RFT1: expected rank-2 image in " + path);
  Eigen::ArrayXXd out(rec.dims[0], rec.dims[1]);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = rec.at(k++);
  return out;
}

void write_wdn1(std::ostream& out, const Checkpoint& ck) {
  out.write("WDN1", 4);
  const std::string header = ck.header.dump();
  put_u32(out, std::uint32_t(header.size()));
  out.write(header.data(), std::streamsize(header.size()));
  put_u32(out, std::uint32_t(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    put_u16(out, std::uint16_t(t.name.size()));
    out.write(t.name.data(), std::streamsize(t.name.size()));
    if (t.rec.dtype == 0)
      write_rft1(out, t.rec.dims, t.rec.f32.data());
    else
      write_rft1(out, t.rec.dims, t.rec.f64.data());
  }
  if (!out) throw std::runtime_error("WDN1: write failed");
}

Checkpoint read_wdn1(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "WDN1", 4) != 0) throw std::runtime_error("WDN1: bad magic");
  Checkpoint ck;
  const std::uint32_t header_len = get_u32(in);
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw std::runtime_error("WDN1: truncated header");
  ck.header = json::parse(header);
  const std::uint32_t count = get_u32(in);
  ck.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = get_u16(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("WDN1: truncated tensor name");
    ck.tensors.push_back({std::move(name), read_rft1(in)});
  }
  return ck;
}

void write_wdn1_file(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_wdn1(out, ck);
}

Checkpoint read_wdn1_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return read_wdn1(in);
}

void write_pgm16(const std::string& path, const Eigen::ArrayXXd& hu, double window_lo,
                 double window_hi) {
  if (!(window_hi > window_lo)) throw std::invalid_argument("write_pgm16: empty window");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "P5\n" << hu.cols() << ' ' << hu.rows() << "\n65535\n";
  const double scale = 65535.0 / (window_hi - window_lo);
  for (Eigen::Index i = 0; i < hu.rows(); ++i) {
    for (Eigen::Index j = 0; j < hu.cols(); ++j) {
      const double v = std::clamp((hu(i, j) - window_lo) * scale, 0.0, 65535.0);
      const auto p = std::uint16_t(std::lround(v));
      const unsigned char bytes[2] = {static_cast<unsigned char>(p >> 8),
                                      static_cast<unsigned char>(p & 0xff)};
      out.write(reinterpret_cast<const char*>(bytes), 2);
    }
  }
  if (!out) throw std::runtime_error("write_pgm16: write failed");
}

}  // namespace ldct::io
