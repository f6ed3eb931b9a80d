#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ldct/nn.hpp"
#include "ldct/rng.hpp"
#include "ldct/tensor.hpp"

namespace ldct::train {

struct TrainConfig {
  double lr_start = 1e-2;
  double lr_end = 1e-5;
  double clip_theta = 1e-3;
  int batch_size = 10;
  int patch_side = 55;
  double lambda = 1e-4;
  int epochs = 100;
  int iters_per_epoch = 20;
  int subset_size = 200;
  int subset_interval = 50;
  std::uint64_t seed = 0;
  bool augment = true;
  int eval_interval = 10;
  int checkpoint_interval = 50;

  void validate() const {
    if (!(lr_start >= lr_end && lr_end > 0.0))
      throw std::invalid_argument("TrainConfig: need lr_start >= lr_end > 0");
    if (!(clip_theta > 0.0)) throw std::invalid_argument("TrainConfig: clip_theta must be > 0");
    if (patch_side < 8) throw std::invalid_argument("TrainConfig: patch_side must be >= 8");
    if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
    if (epochs < 1 || iters_per_epoch < 1)
      throw std::invalid_argument("TrainConfig: epochs and iters_per_epoch must be >= 1");
    if (subset_size < 1 || subset_interval < 1)
      throw std::invalid_argument("TrainConfig: subset_size and subset_interval must be >= 1");
    if (eval_interval < 1) throw std::invalid_argument("TrainConfig: eval_interval must be >= 1");
  }
};

/// One validation snapshot; loss is the mean training loss of the epoch.
struct TrainRecord {
  int epoch = 0;
  double loss = 0.0;
  double psnr = 0.0;
  double nrmse = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;
};

inline std::string to_csv(const TrainLog& log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss,psnr,nrmse,lr\n";
  for (const auto& r : log.records)
    out << r.epoch << ',' << r.loss << ',' << r.psnr << ',' << r.nrmse << ',' << r.lr << '\n';
  return out.str();
}

/// Log-linear decay from lr_start at epoch 0 to lr_end at the last epoch.
inline double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) throw std::out_of_range("lr_at: epoch out of range");
  if (cfg.epochs == 1 || cfg.lr_start == cfg.lr_end) return cfg.lr_start;
  const double t = double(epoch) / double(cfg.epochs - 1);
  return std::exp(std::log(cfg.lr_start) + t * (std::log(cfg.lr_end) - std::log(cfg.lr_start)));
}

template <class Scalar>
void clip_gradients(nn::Vec<Scalar>& grad, Scalar theta) {
  if (!(theta > Scalar(0))) throw std::invalid_argument("clip_gradients: theta must be > 0");
  grad = grad.min(theta).max(-theta);
}

template <class Scalar>
void clip_gradients(nn::NetworkParams<Scalar>& params, Scalar theta) {
  if (!(theta > Scalar(0))) throw std::invalid_argument("clip_gradients: theta must be > 0");
  for (auto& r : nn::param_refs(params))
    if (r.grad) *r.grad = r.grad->min(theta).max(-theta);
}

template <class Scalar>
void sgd_step(nn::NetworkParams<Scalar>& params, Scalar lr) {
  for (auto& r : nn::param_refs(params))
    if (r.grad) *r.value -= lr * *r.grad;
}

/// One training slice with aligned noisy/clean representations, each a
/// (1, bands, H, W) tensor.
template <class Scalar>
struct PairedSlice {
  Tensor<Scalar> noisy;
  Tensor<Scalar> clean;
};

/// Loads training slice `index` on demand; lets the trainer keep only the
/// active subset in memory.
template <class Scalar>
using SliceProvider = std::function<PairedSlice<Scalar>(int index)>;

/// Draws spatially aligned noisy/clean patch pairs at uniform slice and
/// position. Returns (noisy, clean) batches of shape (batch, bands, side, side).
template <class Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> sample_patch_batch(
    const std::vector<PairedSlice<Scalar>>& slices, int batch, int side, std::mt19937_64& eng) {
  if (slices.empty()) throw std::invalid_argument("sample_patch_batch: empty dataset");
  const Eigen::Index B = slices.front().noisy.c();
  const Eigen::Index H = slices.front().noisy.h(), W = slices.front().noisy.w();
  if (side > H || side > W)
    throw std::invalid_argument("sample_patch_batch: patch larger than slice");
  Tensor<Scalar> noisy(batch, B, side, side), clean(batch, B, side, side);
  std::uniform_int_distribution<int> pick_slice(0, int(slices.size()) - 1);
  std::uniform_int_distribution<Eigen::Index> pick_y(0, H - side), pick_x(0, W - side);
  for (int i = 0; i < batch; ++i) {
    const PairedSlice<Scalar>& sl = slices[pick_slice(eng)];
    const Eigen::Index y0 = pick_y(eng), x0 = pick_x(eng);
    for (Eigen::Index b = 0; b < B; ++b) {
      const Scalar* src_n = sl.noisy.plane_data(0, b);
      const Scalar* src_c = sl.clean.plane_data(0, b);
      Scalar* dst_n = noisy.plane_data(i, b);
      Scalar* dst_c = clean.plane_data(i, b);
      for (int y = 0; y < side; ++y) {
        const Eigen::Index o = (y0 + y) * W + x0;
        std::copy(src_n + o, src_n + o + side, dst_n + y * side);
        std::copy(src_c + o, src_c + o + side, dst_c + y * side);
      }
    }
  }
  return {std::move(noisy), std::move(clean)};
}

enum class AugmentOp { identity, hflip, vflip, rot90, rot180, rot270 };

inline const char* to_string(AugmentOp op) {
  switch (op) {
    case AugmentOp::identity: return "identity";
    case AugmentOp::hflip: return "hflip";
    case AugmentOp::vflip: return "vflip";
    case AugmentOp::rot90: return "rot90";
    case AugmentOp::rot180: return "rot180";
    case AugmentOp::rot270: return "rot270";
  }
  return "identity";
}

namespace detail {

template <class Scalar>
void transform_plane(const Scalar* src, Scalar* dst, Eigen::Index s, AugmentOp op) {
  for (Eigen::Index y = 0; y < s; ++y) {
    for (Eigen::Index x = 0; x < s; ++x) {
      Eigen::Index sy = y, sx = x;
      switch (op) {
        case AugmentOp::identity: break;
        case AugmentOp::hflip: sx = s - 1 - x; break;
        case AugmentOp::vflip: sy = s - 1 - y; break;
        case AugmentOp::rot90:
          sy = s - 1 - x;
          sx = y;
          break;
        case AugmentOp::rot180:
          sy = s - 1 - y;
          sx = s - 1 - x;
          break;
        case AugmentOp::rot270:
          sy = x;
          sx = s - 1 - y;
          break;
      }
      dst[y * s + x] = src[sy * s + sx];
    }
  }
}

}  // namespace detail

/// Applies one spatial transform to every band plane of item n.
template <class Scalar>
void apply_augment(Tensor<Scalar>& t, Eigen::Index n, AugmentOp op) {
  if (t.h() != t.w()) throw std::invalid_argument("apply_augment: patch must be square");
  if (op == AugmentOp::identity) return;
  const Eigen::Index s = t.h();
  std::vector<Scalar> tmp(size_t(s) * s);
  for (Eigen::Index c = 0; c < t.c(); ++c) {
    Scalar* plane = t.plane_data(n, c);
    detail::transform_plane(plane, tmp.data(), s, op);
    std::copy(tmp.begin(), tmp.end(), plane);
  }
}

/// Draws one transform and applies it identically to both patches.
template <class Scalar>
AugmentOp augment(Tensor<Scalar>& noisy, Tensor<Scalar>& clean, std::mt19937_64& eng) {
  if (!noisy.same_dims(clean)) throw std::invalid_argument("augment: patch dims differ");
  std::uniform_int_distribution<int> pick(0, 5);
  const auto op = AugmentOp(pick(eng));
  for (Eigen::Index n = 0; n < noisy.n(); ++n) {
    apply_augment(noisy, n, op);
    apply_augment(clean, n, op);
  }
  return op;
}

/// Independent transform per batch item, same op on the noisy/clean pair.
template <class Scalar>
std::vector<AugmentOp> augment_batch(Tensor<Scalar>& noisy, Tensor<Scalar>& clean,
                                     std::mt19937_64& eng) {
  if (!noisy.same_dims(clean)) throw std::invalid_argument("augment_batch: batch dims differ");
  std::uniform_int_distribution<int> pick(0, 5);
  std::vector<AugmentOp> ops;
  ops.reserve(size_t(noisy.n()));
  for (Eigen::Index n = 0; n < noisy.n(); ++n) {
    const auto op = AugmentOp(pick(eng));
    apply_augment(noisy, n, op);
    apply_augment(clean, n, op);
    ops.push_back(op);
  }
  return ops;
}

struct ValScore {
  double psnr = 0.0;
  double nrmse = 0.0;
};

template <class Scalar>
struct TrainHooks {
  /// Runs with the network switched to inference mode.
  std::function<ValScore(nn::NetworkParams<Scalar>&)> validate;
  /// epoch is the last completed epoch; the checkpoint should resume at epoch+1.
  std::function<void(int epoch, const nn::NetworkParams<Scalar>&, const TrainLog&)> on_checkpoint;
  std::function<void(int epoch, double loss, double lr)> on_epoch;
};

template <class Scalar>
struct TrainResult {
  nn::NetworkParams<Scalar> params;
  TrainLog log;
};

namespace detail {

/// Distinct slice indices for one subset rotation, derived from the run seed
/// and the rotation number only, so a resumed run redraws the same subsets.
inline std::vector<int> subset_indices(std::uint64_t seed, int rotation, int dataset_size,
                                       int subset_size) {
  std::vector<int> all(size_t(dataset_size));
  std::iota(all.begin(), all.end(), 0);
  auto eng = make_engine(derive_seed(seed, stream::kSubset, std::uint64_t(rotation)));
  std::shuffle(all.begin(), all.end(), eng);
  all.resize(size_t(std::min(subset_size, dataset_size)));
  return all;
}

}  // namespace detail

/// Mini-batch SGD over random augmented patch pairs. The active slice subset
/// is re-drawn every subset_interval epochs. All randomness is derived from
/// (cfg.seed, epoch or rotation index), so a run resumed from a checkpoint at
/// start_epoch continues bit-identically to an uninterrupted one.
template <class Scalar>
TrainResult<Scalar> train(const TrainConfig& cfg, const nn::Arch& arch, int dataset_size,
                          const SliceProvider<Scalar>& provider,
                          const TrainHooks<Scalar>& hooks = {},
                          const nn::NetworkParams<Scalar>* resume = nullptr, int start_epoch = 0) {
  cfg.validate();
  arch.validate();
  if (dataset_size < 1) throw std::invalid_argument("train: empty dataset");
  if (start_epoch < 0 || start_epoch >= cfg.epochs)
    throw std::out_of_range("train: start_epoch out of range");

  TrainResult<Scalar> result;
  result.params = resume ? *resume : nn::init_gaussian<Scalar>(arch, Scalar(0.01), cfg.seed);
  nn::set_mode(result.params, true);

  std::vector<PairedSlice<Scalar>> active;
  int active_rotation = -1;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const int rotation = epoch / cfg.subset_interval;
    if (rotation != active_rotation) {
      active.clear();
      for (int idx : detail::subset_indices(cfg.seed, rotation, dataset_size, cfg.subset_size))
        active.push_back(provider(idx));
      active_rotation = rotation;
    }

    const double lr = lr_at(epoch, cfg);
    auto eng = make_engine(derive_seed(cfg.seed, stream::kEpoch, std::uint64_t(epoch)));
    double loss_sum = 0.0;
    for (int it = 0; it < cfg.iters_per_epoch; ++it) {
      auto [noisy, clean] = sample_patch_batch(active, cfg.batch_size, cfg.patch_side, eng);
      if (cfg.augment) augment_batch(noisy, clean, eng);
      nn::NetCache<Scalar> cache;
      Tensor<Scalar> pred = nn::network_forward(noisy, result.params, &cache);
      const Scalar loss =
          nn::loss_and_grad(pred, clean, result.params, Scalar(cfg.lambda), cache);
      if (!std::isfinite(double(loss)))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " iteration " + std::to_string(it));
      clip_gradients(result.params, Scalar(cfg.clip_theta));
      sgd_step(result.params, Scalar(lr));
      loss_sum += double(loss);
    }
    const double mean_loss = loss_sum / cfg.iters_per_epoch;
    if (hooks.on_epoch) hooks.on_epoch(epoch, mean_loss, lr);

    const bool last = epoch == cfg.epochs - 1;
    if ((epoch + 1) % cfg.eval_interval == 0 || last) {
      ValScore val;
      if (hooks.validate) {
        nn::set_mode(result.params, false);
        val = hooks.validate(result.params);
        nn::set_mode(result.params, true);
      } else {
        val.psnr = std::numeric_limits<double>::quiet_NaN();
        val.nrmse = std::numeric_limits<double>::quiet_NaN();
      }
      result.log.records.push_back({epoch, mean_loss, val.psnr, val.nrmse, lr});
    }
    if (hooks.on_checkpoint &&
        (last || (cfg.checkpoint_interval > 0 && (epoch + 1) % cfg.checkpoint_interval == 0)))
      hooks.on_checkpoint(epoch, result.params, result.log);
  }
  nn::set_mode(result.params, false);
  return result;
}

}  // namespace ldct::train
