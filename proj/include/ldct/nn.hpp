#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldct/rng.hpp"
#include "ldct/tensor.hpp"

namespace ldct::nn {

template <class Scalar>
using Vec = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

enum class Variant { wavelet_full, image_domain, no_external_bypass, no_bypass_at_all };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::wavelet_full: return "wavelet_full";
    case Variant::image_domain: return "image_domain";
    case Variant::no_external_bypass: return "no_external_bypass";
    case Variant::no_bypass_at_all: return "no_bypass_at_all";
  }
  return "wavelet_full";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "wavelet_full") return Variant::wavelet_full;
  if (s == "image_domain") return Variant::image_domain;
  if (s == "no_external_bypass") return Variant::no_external_bypass;
  if (s == "no_bypass_at_all") return Variant::no_bypass_at_all;
  throw std::invalid_argument("unknown network variant: " + s);
}

/// Network shape descriptor. `bands` is the coefficient channel count used by
/// the wavelet variants; image_domain works on a single raw-image channel.
struct Arch {
  int channels = 128;
  int modules = 6;
  int bands = 15;
  Variant variant = Variant::wavelet_full;

  int io_channels() const { return variant == Variant::image_domain ? 1 : bands; }
  bool external_bypass() const {
    return variant == Variant::wavelet_full || variant == Variant::image_domain;
  }
  bool internal_bypass() const { return variant != Variant::no_bypass_at_all; }
  int conv_layer_count() const { return 1 + 3 * modules + 2; }

  void validate() const {
    if (channels < 1 || modules < 1 || bands < 1)
      throw std::invalid_argument("Arch: channels, modules and bands must be >= 1");
  }
};

/// 3x3 same-padding convolution. Taps are stored flat in
/// (out_ch, in_ch, 3, 3) row-major order; dw/db accumulate gradients.
template <class Scalar>
struct ConvSpec {
  int out_ch = 0;
  int in_ch = 0;
  Vec<Scalar> w;
  Vec<Scalar> b;
  Vec<Scalar> dw;
  Vec<Scalar> db;

  static ConvSpec zeros(int out_channels, int in_channels) {
    ConvSpec s;
    s.out_ch = out_channels;
    s.in_ch = in_channels;
    s.w = Vec<Scalar>::Zero(Eigen::Index(out_channels) * in_channels * 9);
    s.b = Vec<Scalar>::Zero(out_channels);
    return s;
  }
};

/// Per-channel batch normalization. Training mode normalizes with batch
/// statistics and updates the running ones; inference mode uses the running
/// statistics directly.
template <class Scalar>
struct BatchNormSpec {
  int channels = 0;
  Vec<Scalar> gamma;
  Vec<Scalar> beta;
  Vec<Scalar> running_mean;
  Vec<Scalar> running_var;
  Scalar epsilon = Scalar(1e-5);
  Scalar momentum = Scalar(0.1);
  bool training = true;
  Vec<Scalar> dgamma;
  Vec<Scalar> dbeta;

  static BatchNormSpec identity(int channel_count) {
    BatchNormSpec s;
    s.channels = channel_count;
    s.gamma = Vec<Scalar>::Ones(channel_count);
    s.beta = Vec<Scalar>::Zero(channel_count);
    s.running_mean = Vec<Scalar>::Zero(channel_count);
    s.running_var = Vec<Scalar>::Ones(channel_count);
    return s;
  }

  void validate() const {
    if (channels < 1) throw std::invalid_argument("BatchNormSpec: channels must be >= 1");
    if (epsilon < Scalar(0)) throw std::invalid_argument("BatchNormSpec: epsilon must be >= 0");
    if ((running_var < Scalar(0)).any())
      throw std::invalid_argument("BatchNormSpec: running_var must be nonnegative");
  }
};

namespace detail {

template <class Scalar>
using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Gathers zero-padded 3x3 neighborhoods of item n:
/// col(c*9 + ky*3 + kx, y*W + x) = t(n, c, y + ky - 1, x + kx - 1).
template <class Scalar>
void im2col(const Tensor<Scalar>& t, Eigen::Index n, MatRM<Scalar>& col) {
  const Eigen::Index C = t.c(), H = t.h(), W = t.w();
  col.resize(C * 9, H * W);
  for (Eigen::Index c = 0; c < C; ++c) {
    const Scalar* plane = t.plane_data(n, c);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        Scalar* row = col.data() + (c * 9 + ky * 3 + kx) * (H * W);
        const int dy = ky - 1, dx = kx - 1;
        for (Eigen::Index y = 0; y < H; ++y) {
          Scalar* dst = row + y * W;
          const Eigen::Index sy = y + dy;
          if (sy < 0 || sy >= H) {
            std::fill(dst, dst + W, Scalar(0));
            continue;
          }
          const Scalar* src = plane + sy * W;
          if (dx < 0) {
            dst[0] = Scalar(0);
            std::copy(src, src + W - 1, dst + 1);
          } else if (dx == 0) {
            std::copy(src, src + W, dst);
          } else {
            std::copy(src + 1, src + W, dst);
            dst[W - 1] = Scalar(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-adds column entries back onto item n.
template <class Scalar>
void col2im_add(const MatRM<Scalar>& col, Eigen::Index n, Tensor<Scalar>& t) {
  const Eigen::Index C = t.c(), H = t.h(), W = t.w();
  for (Eigen::Index c = 0; c < C; ++c) {
    Scalar* plane = t.plane_data(n, c);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Scalar* row = col.data() + (c * 9 + ky * 3 + kx) * (H * W);
        const int dy = ky - 1, dx = kx - 1;
        for (Eigen::Index y = 0; y < H; ++y) {
          const Eigen::Index sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          Scalar* dst = plane + sy * W;
          const Scalar* src = row + y * W;
          if (dx < 0) {
            for (Eigen::Index x = 1; x < W; ++x) dst[x - 1] += src[x];
          } else if (dx == 0) {
            for (Eigen::Index x = 0; x < W; ++x) dst[x] += src[x];
          } else {
            for (Eigen::Index x = 0; x + 1 < W; ++x) dst[x + 1] += src[x];
          }
        }
      }
    }
  }
}

template <class Scalar>
Tensor<Scalar> concat_channels(const std::vector<Tensor<Scalar>>& parts) {
  Eigen::Index total_c = 0;
  for (const auto& p : parts) total_c += p.c();
  const auto& first = parts.front();
  Tensor<Scalar> out(first.n(), total_c, first.h(), first.w());
  for (Eigen::Index n = 0; n < first.n(); ++n) {
    Scalar* dst = out.plane_data(n, 0);
    for (const auto& p : parts) {
      const Scalar* src = p.plane_data(n, 0);
      const Eigen::Index len = p.c() * p.plane();
      std::copy(src, src + len, dst);
      dst += len;
    }
  }
  return out;
}

template <class Scalar>
std::vector<Tensor<Scalar>> split_channels(const Tensor<Scalar>& z, int parts, int chunk) {
  std::vector<Tensor<Scalar>> out;
  out.reserve(parts);
  for (int p = 0; p < parts; ++p) {
    Tensor<Scalar> t(z.n(), chunk, z.h(), z.w());
    for (Eigen::Index n = 0; n < z.n(); ++n) {
      const Scalar* src = z.plane_data(n, Eigen::Index(p) * chunk);
      std::copy(src, src + Eigen::Index(chunk) * z.plane(), t.plane_data(n, 0));
    }
    out.push_back(std::move(t));
  }
  return out;
}

/// dst[:, ch] += src[:, ch]
template <class Scalar>
void add_channel(Tensor<Scalar>& dst, const Tensor<Scalar>& src, Eigen::Index ch) {
  for (Eigen::Index n = 0; n < dst.n(); ++n) {
    Scalar* d = dst.plane_data(n, ch);
    const Scalar* s = src.plane_data(n, ch);
    for (Eigen::Index i = 0; i < dst.plane(); ++i) d[i] += s[i];
  }
}

}  // namespace detail

template <class Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec) {
  if (x.c() != spec.in_ch) throw std::invalid_argument("conv2d: input channel mismatch");
  const Eigen::Index N = x.n(), H = x.h(), W = x.w();
  Tensor<Scalar> y(N, spec.out_ch, H, W);
  detail::MatRM<Scalar> col;
  Eigen::Map<const detail::MatRM<Scalar>> wmat(spec.w.data(), spec.out_ch,
                                               Eigen::Index(spec.in_ch) * 9);
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> bias(spec.b.data(), spec.out_ch);
  for (Eigen::Index n = 0; n < N; ++n) {
    detail::im2col(x, n, col);
    Eigen::Map<detail::MatRM<Scalar>> out(y.plane_data(n, 0), spec.out_ch, H * W);
    out.noalias() = wmat * col;
    out.colwise() += bias;
  }
  return y;
}

template <class Scalar>
void ensure_grads(ConvSpec<Scalar>& spec) {
  if (spec.dw.size() != spec.w.size()) spec.dw = Vec<Scalar>::Zero(spec.w.size());
  if (spec.db.size() != spec.b.size()) spec.db = Vec<Scalar>::Zero(spec.b.size());
}

template <class Scalar>
void ensure_grads(BatchNormSpec<Scalar>& spec) {
  if (spec.dgamma.size() != spec.gamma.size()) spec.dgamma = Vec<Scalar>::Zero(spec.gamma.size());
  if (spec.dbeta.size() != spec.beta.size()) spec.dbeta = Vec<Scalar>::Zero(spec.beta.size());
}

/// Accumulates dw/db from upstream grad dy; writes the input gradient into
/// *dx when dx is non-null (the extra GEMM is skipped otherwise).
template <class Scalar>
void conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy, ConvSpec<Scalar>& spec,
                     Tensor<Scalar>* dx = nullptr) {
  if (x.c() != spec.in_ch || dy.c() != spec.out_ch || x.n() != dy.n() || x.h() != dy.h() ||
      x.w() != dy.w())
    throw std::invalid_argument("conv2d_backward: shape mismatch");
  ensure_grads(spec);
  const Eigen::Index N = x.n(), H = x.h(), W = x.w();
  detail::MatRM<Scalar> col, dcol;
  Eigen::Map<const detail::MatRM<Scalar>> wmat(spec.w.data(), spec.out_ch,
                                               Eigen::Index(spec.in_ch) * 9);
  Eigen::Map<detail::MatRM<Scalar>> dwmat(spec.dw.data(), spec.out_ch,
                                          Eigen::Index(spec.in_ch) * 9);
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> dbias(spec.db.data(), spec.out_ch);
  if (dx) {
    *dx = Tensor<Scalar>(N, spec.in_ch, H, W);
  }
  for (Eigen::Index n = 0; n < N; ++n) {
    detail::im2col(x, n, col);
    Eigen::Map<const detail::MatRM<Scalar>> dyv(dy.plane_data(n, 0), spec.out_ch, H * W);
    dwmat.noalias() += dyv * col.transpose();
    dbias.noalias() += dyv.rowwise().sum();
    if (dx) {
      dcol.noalias() = wmat.transpose() * dyv;
      detail::col2im_add(dcol, n, *dx);
    }
  }
}

template <class Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.n(), x.c(), x.h(), x.w());
  y.values() = x.values().max(Scalar(0));
  return y;
}

/// Subgradient at 0 is 0, so the mask can come from the output.
template <class Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& dy, const Tensor<Scalar>& y) {
  Tensor<Scalar> dx(y.n(), y.c(), y.h(), y.w());
  dx.values() = (y.values() > Scalar(0)).select(dy.values(), Scalar(0));
  return dx;
}

/// Batch statistics captured by the training-mode forward pass for backward.
template <class Scalar>
struct BnCache {
  Tensor<Scalar> xhat;
  Vec<Scalar> inv_std;
};

template <class Scalar>
Tensor<Scalar> batch_norm(const Tensor<Scalar>& x, BatchNormSpec<Scalar>& spec,
                          BnCache<Scalar>* cache = nullptr) {
  if (x.c() != spec.channels) throw std::invalid_argument("batch_norm: channel mismatch");
  const Eigen::Index N = x.n(), C = x.c(), P = x.plane();
  Tensor<Scalar> y(N, C, x.h(), x.w());

  if (!spec.training) {
    for (Eigen::Index c = 0; c < C; ++c) {
      const double istd = 1.0 / std::sqrt(double(spec.running_var[c]) + double(spec.epsilon));
      const double scale = double(spec.gamma[c]) * istd;
      const double shift = double(spec.beta[c]) - double(spec.running_mean[c]) * scale;
      for (Eigen::Index n = 0; n < N; ++n) {
        const Scalar* xp = x.plane_data(n, c);
        Scalar* yp = y.plane_data(n, c);
        for (Eigen::Index i = 0; i < P; ++i) yp[i] = Scalar(double(xp[i]) * scale + shift);
      }
    }
    return y;
  }

  if (N < 2) throw std::invalid_argument("batch_norm: training mode needs batch size >= 2");
  const double m = double(N * P);
  if (cache) {
    cache->xhat = Tensor<Scalar>(N, C, x.h(), x.w());
    cache->inv_std.resize(C);
  }
  for (Eigen::Index c = 0; c < C; ++c) {
    double sum = 0.0;
    for (Eigen::Index n = 0; n < N; ++n) {
      const Scalar* xp = x.plane_data(n, c);
      for (Eigen::Index i = 0; i < P; ++i) sum += double(xp[i]);
    }
    const double mean = sum / m;
    double sq = 0.0;
    for (Eigen::Index n = 0; n < N; ++n) {
      const Scalar* xp = x.plane_data(n, c);
      for (Eigen::Index i = 0; i < P; ++i) {
        const double d = double(xp[i]) - mean;
        sq += d * d;
      }
    }
    const double var = sq / m;
    const double istd = 1.0 / std::sqrt(var + double(spec.epsilon));
    const double mom = double(spec.momentum);
    spec.running_mean[c] = Scalar((1.0 - mom) * double(spec.running_mean[c]) + mom * mean);
    spec.running_var[c] = Scalar((1.0 - mom) * double(spec.running_var[c]) + mom * var);
    const double g = double(spec.gamma[c]), be = double(spec.beta[c]);
    for (Eigen::Index n = 0; n < N; ++n) {
      const Scalar* xp = x.plane_data(n, c);
      Scalar* yp = y.plane_data(n, c);
      Scalar* hp = cache ? cache->xhat.plane_data(n, c) : nullptr;
      for (Eigen::Index i = 0; i < P; ++i) {
        const double xh = (double(xp[i]) - mean) * istd;
        if (hp) hp[i] = Scalar(xh);
        yp[i] = Scalar(g * xh + be);
      }
    }
    if (cache) cache->inv_std[c] = Scalar(istd);
  }
  return y;
}

/// Training-mode backward; accumulates dgamma/dbeta and returns the input
/// gradient including the batch mean/variance coupling terms.
template <class Scalar>
Tensor<Scalar> batch_norm_backward(const Tensor<Scalar>& dy, BatchNormSpec<Scalar>& spec,
                                   const BnCache<Scalar>& cache) {
  if (dy.c() != spec.channels || !dy.same_dims(cache.xhat))
    throw std::invalid_argument("batch_norm_backward: shape mismatch");
  ensure_grads(spec);
  const Eigen::Index N = dy.n(), C = dy.c(), P = dy.plane();
  const double m = double(N * P);
  Tensor<Scalar> dx(N, C, dy.h(), dy.w());
  for (Eigen::Index c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (Eigen::Index n = 0; n < N; ++n) {
      const Scalar* dp = dy.plane_data(n, c);
      const Scalar* hp = cache.xhat.plane_data(n, c);
      for (Eigen::Index i = 0; i < P; ++i) {
        sum_dy += double(dp[i]);
        sum_dy_xhat += double(dp[i]) * double(hp[i]);
      }
    }
    spec.dgamma[c] += Scalar(sum_dy_xhat);
    spec.dbeta[c] += Scalar(sum_dy);
    const double k = double(spec.gamma[c]) * double(cache.inv_std[c]);
    const double mean_dy = sum_dy / m;
    const double mean_dy_xhat = sum_dy_xhat / m;
    for (Eigen::Index n = 0; n < N; ++n) {
      const Scalar* dp = dy.plane_data(n, c);
      const Scalar* hp = cache.xhat.plane_data(n, c);
      Scalar* op = dx.plane_data(n, c);
      for (Eigen::Index i = 0; i < P; ++i)
        op[i] = Scalar(k * (double(dp[i]) - mean_dy - double(hp[i]) * mean_dy_xhat));
    }
  }
  return dx;
}

/// One module: out = ReLU(x + g(x)) with g = conv-BN-ReLU, conv-BN-ReLU,
/// conv-BN. Without the internal bypass the block is out = ReLU(g(x)).
template <class Scalar>
struct Block {
  ConvSpec<Scalar> conv1, conv2, conv3;
  BatchNormSpec<Scalar> bn1, bn2, bn3;
};

template <class Scalar>
struct BlockCache {
  BnCache<Scalar> bn1, bn2, bn3;
  Tensor<Scalar> h1, h2;
};

template <class Scalar>
Tensor<Scalar> residual_block(const Tensor<Scalar>& x, Block<Scalar>& blk, bool bypass,
                              BlockCache<Scalar>* cache = nullptr) {
  Tensor<Scalar> h1 =
      relu(batch_norm(conv2d(x, blk.conv1), blk.bn1, cache ? &cache->bn1 : nullptr));
  Tensor<Scalar> h2 =
      relu(batch_norm(conv2d(h1, blk.conv2), blk.bn2, cache ? &cache->bn2 : nullptr));
  Tensor<Scalar> g = batch_norm(conv2d(h2, blk.conv3), blk.bn3, cache ? &cache->bn3 : nullptr);
  if (bypass) {
    if (!g.same_dims(x)) throw std::invalid_argument("residual_block: shape mismatch");
    g.values() += x.values();
  }
  if (cache) {
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
  }
  return relu(g);
}

/// Backward through one block. `out` is the block's forward output (its ReLU
/// mask); returns the gradient w.r.t. the block input.
template <class Scalar>
Tensor<Scalar> residual_block_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& out,
                                       const Tensor<Scalar>& dout, Block<Scalar>& blk, bool bypass,
                                       const BlockCache<Scalar>& cache) {
  Tensor<Scalar> dpre = relu_backward(dout, out);
  Tensor<Scalar> da3 = batch_norm_backward(dpre, blk.bn3, cache.bn3);
  Tensor<Scalar> dh2;
  conv2d_backward(cache.h2, da3, blk.conv3, &dh2);
  Tensor<Scalar> da2 = batch_norm_backward(relu_backward(dh2, cache.h2), blk.bn2, cache.bn2);
  Tensor<Scalar> dh1;
  conv2d_backward(cache.h1, da2, blk.conv2, &dh1);
  Tensor<Scalar> da1 = batch_norm_backward(relu_backward(dh1, cache.h1), blk.bn1, cache.bn1);
  Tensor<Scalar> dx;
  conv2d_backward(x, da1, blk.conv1, &dx);
  if (bypass) dx.values() += dpre.values();
  return dx;
}

/// Full parameter set: input conv-BN, M blocks, fusion conv-BN over the
/// channel concatenation, and a bare output conv.
template <class Scalar>
struct NetworkParams {
  Arch arch;
  ConvSpec<Scalar> in_conv;
  BatchNormSpec<Scalar> in_bn;
  std::vector<Block<Scalar>> blocks;
  ConvSpec<Scalar> fusion;
  BatchNormSpec<Scalar> fusion_bn;
  ConvSpec<Scalar> out_conv;
};

template <class Scalar>
NetworkParams<Scalar> make_params(const Arch& arch) {
  arch.validate();
  NetworkParams<Scalar> p;
  p.arch = arch;
  const int C = arch.channels, io = arch.io_channels();
  p.in_conv = ConvSpec<Scalar>::zeros(C, io);
  p.in_bn = BatchNormSpec<Scalar>::identity(C);
  p.blocks.resize(arch.modules);
  for (auto& b : p.blocks) {
    b.conv1 = ConvSpec<Scalar>::zeros(C, C);
    b.conv2 = ConvSpec<Scalar>::zeros(C, C);
    b.conv3 = ConvSpec<Scalar>::zeros(C, C);
    b.bn1 = BatchNormSpec<Scalar>::identity(C);
    b.bn2 = BatchNormSpec<Scalar>::identity(C);
    b.bn3 = BatchNormSpec<Scalar>::identity(C);
  }
  p.fusion = ConvSpec<Scalar>::zeros(C, arch.modules * C);
  p.fusion_bn = BatchNormSpec<Scalar>::identity(C);
  p.out_conv = ConvSpec<Scalar>::zeros(io, C);
  return p;
}

template <class Scalar>
void set_mode(NetworkParams<Scalar>& p, bool training) {
  p.in_bn.training = training;
  for (auto& b : p.blocks) {
    b.bn1.training = training;
    b.bn2.training = training;
    b.bn3.training = training;
  }
  p.fusion_bn.training = training;
}

/// Reference to one named parameter array, in serialization order.
/// grad is null for running statistics; decay marks conv weights, the only
/// arrays subject to L2 regularization.
template <class Scalar>
struct ParamRef {
  std::string name;
  Vec<Scalar>* value;
  Vec<Scalar>* grad;
  std::vector<std::uint32_t> dims;
  bool decay;
};

template <class Scalar>
std::vector<ParamRef<Scalar>> param_refs(NetworkParams<Scalar>& p) {
  std::vector<ParamRef<Scalar>> out;
  auto add_conv = [&out](const std::string& name, ConvSpec<Scalar>& c) {
    ensure_grads(c);
    out.push_back({name + ".w", &c.w, &c.dw,
                   {std::uint32_t(c.out_ch), std::uint32_t(c.in_ch), 3u, 3u}, true});
    out.push_back({name + ".b", &c.b, &c.db, {std::uint32_t(c.out_ch)}, false});
  };
  auto add_bn = [&out](const std::string& name, BatchNormSpec<Scalar>& b) {
    ensure_grads(b);
    const std::uint32_t c = std::uint32_t(b.channels);
    out.push_back({name + ".gamma", &b.gamma, &b.dgamma, {c}, false});
    out.push_back({name + ".beta", &b.beta, &b.dbeta, {c}, false});
    out.push_back({name + ".running_mean", &b.running_mean, nullptr, {c}, false});
    out.push_back({name + ".running_var", &b.running_var, nullptr, {c}, false});
  };
  add_conv("in_conv", p.in_conv);
  add_bn("in_bn", p.in_bn);
  for (size_t m = 0; m < p.blocks.size(); ++m) {
    const std::string base = "block" + std::to_string(m);
    add_conv(base + ".conv1", p.blocks[m].conv1);
    add_bn(base + ".bn1", p.blocks[m].bn1);
    add_conv(base + ".conv2", p.blocks[m].conv2);
    add_bn(base + ".bn2", p.blocks[m].bn2);
    add_conv(base + ".conv3", p.blocks[m].conv3);
    add_bn(base + ".bn3", p.blocks[m].bn3);
  }
  add_conv("fusion", p.fusion);
  add_bn("fusion_bn", p.fusion_bn);
  add_conv("out_conv", p.out_conv);
  return out;
}

template <class Scalar>
void zero_grads(NetworkParams<Scalar>& p) {
  for (auto& r : param_refs(p))
    if (r.grad) r.grad->setZero();
}

/// Conv weights drawn N(0, sigma^2) from a seeded generator; biases zero,
/// BN at identity. Same seed gives bit-identical parameters.
template <class Scalar>
NetworkParams<Scalar> init_gaussian(const Arch& arch, Scalar sigma, std::uint64_t seed) {
  if (!(sigma > Scalar(0))) throw std::invalid_argument("init_gaussian: sigma must be > 0");
  NetworkParams<Scalar> p = make_params<Scalar>(arch);
  auto eng = make_engine(derive_seed(seed, stream::kInit));
  std::normal_distribution<double> dist(0.0, double(sigma));
  for (auto& r : param_refs(p)) {
    if (!r.decay) continue;
    for (Eigen::Index i = 0; i < r.value->size(); ++i) (*r.value)[i] = Scalar(dist(eng));
  }
  return p;
}

/// Everything backward needs from a forward pass: the input, the per-block
/// activations, and the concatenation fed to the fusion conv. x[m] is the
/// input of block m; the last block's output feeds nothing, so only the
/// first M-1 blocks are evaluated.
template <class Scalar>
struct NetCache {
  Tensor<Scalar> input;
  BnCache<Scalar> in_bn;
  std::vector<Tensor<Scalar>> x;
  std::vector<BlockCache<Scalar>> blocks;
  Tensor<Scalar> concat;
  BnCache<Scalar> fusion_bn;
  Tensor<Scalar> fused;
};

template <class Scalar>
Tensor<Scalar> network_forward(const Tensor<Scalar>& input, NetworkParams<Scalar>& params,
                               NetCache<Scalar>* cache = nullptr) {
  const Arch& a = params.arch;
  if (input.c() != a.io_channels())
    throw std::invalid_argument("network_forward: variant/channel mismatch");
  const int M = a.modules;

  std::vector<Tensor<Scalar>> x;
  x.reserve(M);
  x.push_back(relu(
      batch_norm(conv2d(input, params.in_conv), params.in_bn, cache ? &cache->in_bn : nullptr)));
  if (cache) cache->blocks.resize(M > 1 ? M - 1 : 0);
  for (int m = 0; m + 1 < M; ++m)
    x.push_back(residual_block(x[m], params.blocks[m], a.internal_bypass(),
                               cache ? &cache->blocks[m] : nullptr));

  Tensor<Scalar> z = detail::concat_channels(x);
  Tensor<Scalar> fused = relu(
      batch_norm(conv2d(z, params.fusion), params.fusion_bn, cache ? &cache->fusion_bn : nullptr));
  Tensor<Scalar> out = conv2d(fused, params.out_conv);
  if (a.external_bypass()) detail::add_channel(out, input, a.io_channels() - 1);

  if (cache) {
    cache->input = input;
    cache->x = std::move(x);
    cache->concat = std::move(z);
    cache->fused = std::move(fused);
  }
  return out;
}

/// Accumulates all parameter gradients; returns the input gradient when
/// want_input_grad is set (an empty tensor otherwise, sparing one GEMM).
template <class Scalar>
Tensor<Scalar> network_backward(const Tensor<Scalar>& dout, NetworkParams<Scalar>& params,
                                const NetCache<Scalar>& cache, bool want_input_grad = false) {
  const Arch& a = params.arch;
  const int M = a.modules;

  Tensor<Scalar> dfused;
  conv2d_backward(cache.fused, dout, params.out_conv, &dfused);
  Tensor<Scalar> da_f =
      batch_norm_backward(relu_backward(dfused, cache.fused), params.fusion_bn, cache.fusion_bn);
  Tensor<Scalar> dz;
  conv2d_backward(cache.concat, da_f, params.fusion, &dz);

  std::vector<Tensor<Scalar>> dx = detail::split_channels(dz, M, a.channels);
  for (int m = M - 2; m >= 0; --m) {
    Tensor<Scalar> d = residual_block_backward(cache.x[m], cache.x[m + 1], dx[m + 1],
                                               params.blocks[m], a.internal_bypass(),
                                               cache.blocks[m]);
    dx[m].values() += d.values();
  }

  Tensor<Scalar> da_in =
      batch_norm_backward(relu_backward(dx[0], cache.x[0]), params.in_bn, cache.in_bn);
  Tensor<Scalar> dinput;
  if (want_input_grad) {
    conv2d_backward(cache.input, da_in, params.in_conv, &dinput);
    if (a.external_bypass()) detail::add_channel(dinput, dout, a.io_channels() - 1);
  } else {
    conv2d_backward(cache.input, da_in, params.in_conv);
  }
  return dinput;
}

/// Mean squared difference over every element of the batch.
template <class Scalar>
Scalar data_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (!pred.same_dims(target)) throw std::invalid_argument("data_loss: dimension mismatch");
  const double s =
      (pred.values() - target.values()).template cast<double>().square().sum();
  return Scalar(s / double(pred.size()));
}

template <class Scalar>
Tensor<Scalar> data_loss_grad(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (!pred.same_dims(target)) throw std::invalid_argument("data_loss_grad: dimension mismatch");
  Tensor<Scalar> d(pred.n(), pred.c(), pred.h(), pred.w());
  d.values() = (pred.values() - target.values()) * Scalar(2.0 / double(pred.size()));
  return d;
}

/// loss = data_loss + lambda * sum of squared conv weights. Zeroes the
/// parameter gradients, backpropagates the data term through the cached
/// forward pass and adds the 2*lambda*w regularization gradient.
template <class Scalar>
Scalar loss_and_grad(const Tensor<Scalar>& pred, const Tensor<Scalar>& target,
                     NetworkParams<Scalar>& params, Scalar lambda, const NetCache<Scalar>& cache) {
  Scalar loss = data_loss(pred, target);
  zero_grads(params);
  network_backward(data_loss_grad(pred, target), params, cache);
  if (lambda != Scalar(0)) {
    double reg = 0.0;
    for (auto& r : param_refs(params)) {
      if (!r.decay) continue;
      reg += r.value->template cast<double>().square().sum();
      *r.grad += *r.value * (Scalar(2) * lambda);
    }
    loss += Scalar(double(lambda) * reg);
  }
  return loss;
}

}  // namespace ldct::nn
