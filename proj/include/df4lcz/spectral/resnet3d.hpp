#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "df4lcz/errors.hpp"
#include "df4lcz/fusion/prob_vector.hpp"
#include "df4lcz/nn/layers.hpp"
#include "df4lcz/nn/params.hpp"
#include "df4lcz/nn/rng.hpp"
#include "df4lcz/nn/tensor.hpp"
#include "df4lcz/spectral/conv3d.hpp"

namespace df4lcz {

inline constexpr std::size_t kNumClasses = 17;
inline constexpr std::size_t kSentinelPatch = 32;
inline constexpr std::size_t kSentinelBands = 10;

/// A 32 x 32 x 10 reflectance cube indexed [row][col][band], values in [0, 1].
struct SpectralPatch {
  Tensor data;

  static SpectralPatch from_tensor(Tensor t) {
    const Shape expected{kSentinelPatch, kSentinelPatch, kSentinelBands};
    if (t.shape() != expected) {
      throw DimensionError("spectral patch must be " + shape_str(expected) + ", got " + shape_str(t.shape()));
    }
    for (float v : t.data()) {
      if (!(v >= 0.0f && v <= 1.0f)) throw InputError("spectral patch value outside [0,1]: " + std::to_string(v));
    }
    return SpectralPatch{std::move(t)};
  }
};

/// Non-trainable tensors (batch-norm running statistics), keyed by name.
template <class T>
using BufferStore = std::map<std::string, BasicTensor<T>>;

template <class T>
struct ConvBnCache {
  BasicTensor<T> input;
  BatchNormCache<T> bn;
};

/// conv3d followed by batch normalisation; the activation belongs to the caller.
struct ConvBnSpec {
  std::string name;
  std::size_t cin = 0, cout = 0, kernel = 3;
  Conv3dGeometry geometry;

  template <class T>
  void register_params(ParamStore<T>& p, BufferStore<T>& buf) const {
    p.add(name + ".kernel", BasicTensor<T>({kernel, kernel, kernel, cin, cout}));
    p.add(name + ".bias", BasicTensor<T>({cout}));
    p.add(name + ".gamma", BasicTensor<T>({cout}, T{1}));
    p.add(name + ".beta", BasicTensor<T>({cout}));
    buf[name + ".running_mean"] = BasicTensor<T>({cout});
    buf[name + ".running_var"] = BasicTensor<T>({cout}, T{1});
  }

  template <class T>
  void init(ParamStore<T>& p, Rng& rng) const {
    p.value(name + ".kernel") = he_uniform<T>({kernel, kernel, kernel, cin, cout}, kernel * kernel * kernel * cin, rng);
    p.value(name + ".bias").fill(T{0});
    p.value(name + ".gamma").fill(T{1});
    p.value(name + ".beta").fill(T{0});
  }

  template <class T>
  BasicTensor<T> forward(const ParamStore<T>& p, BufferStore<T>& buf, const BasicTensor<T>& x, Mode mode,
                         std::type_identity_t<ConvBnCache<T>>* cache = nullptr) const {
    auto z = conv3d_forward(x, p.value(name + ".kernel"), p.value(name + ".bias"), geometry);
    BatchNormCache<T>* bn_cache = cache ? &cache->bn : nullptr;
    auto y = batchnorm_forward(z, p.value(name + ".gamma"), p.value(name + ".beta"), buf.at(name + ".running_mean"),
                               buf.at(name + ".running_var"), mode, bn_cache);
    if (cache) cache->input = x;
    return y;
  }

  template <class T>
  BasicTensor<T> backward(ParamStore<T>& p, const ConvBnCache<T>& cache, const BasicTensor<T>& dy, bool need_dx) const {
    auto dz = batchnorm_backward(cache.bn, p.value(name + ".gamma"), dy, p.grad(name + ".gamma"), p.grad(name + ".beta"));
    BasicTensor<T> dx;
    conv3d_backward(cache.input, p.value(name + ".kernel"), geometry, dz, need_dx ? &dx : nullptr,
                    p.grad(name + ".kernel"), p.grad(name + ".bias"));
    return dx;
  }
};

template <class T>
struct ResidualBlockCache {
  ConvBnCache<T> a, b, shortcut;
  BasicTensor<T> a_act;
  BasicTensor<T> out;
};

/// y = ReLU(BN(conv_b(ReLU(BN(conv_a(x))))) + shortcut(x)); the shortcut is the
/// identity when shapes match and a strided 1x1x1 conv + BN otherwise.
struct ResidualBlockSpec {
  std::string name;
  std::size_t cin = 0, cout = 0, stride = 1;
  ConvBnSpec a, b;
  std::optional<ConvBnSpec> projection;

  static ResidualBlockSpec make(std::string name, std::size_t cin, std::size_t cout, std::size_t stride,
                                std::size_t kernel = 3) {
    ResidualBlockSpec s;
    s.name = name;
    s.cin = cin;
    s.cout = cout;
    s.stride = stride;
    s.a = ConvBnSpec{name + ".conv_a", cin, cout, kernel, Conv3dGeometry::same(kernel, stride)};
    s.b = ConvBnSpec{name + ".conv_b", cout, cout, kernel, Conv3dGeometry::same(kernel, 1)};
    if (cin != cout || stride != 1) {
      s.projection = ConvBnSpec{name + ".shortcut", cin, cout, 1, Conv3dGeometry{{stride, stride, stride}, {0, 0, 0}}};
    }
    return s;
  }

  template <class T>
  void register_params(ParamStore<T>& p, BufferStore<T>& buf) const {
    a.register_params(p, buf);
    b.register_params(p, buf);
    if (projection) projection->register_params(p, buf);
  }

  template <class T>
  void init(ParamStore<T>& p, Rng& rng) const {
    a.init(p, rng);
    b.init(p, rng);
    if (projection) projection->init(p, rng);
  }

  template <class T>
  BasicTensor<T> forward(const ParamStore<T>& p, BufferStore<T>& buf, const BasicTensor<T>& x, Mode mode,
                         std::type_identity_t<ResidualBlockCache<T>>* cache = nullptr) const {
    if (x.rank() != 5 || x.dim(4) != cin) {
      throw DimensionError(name + ": expected " + std::to_string(cin) + " input channels, got " + shape_str(x.shape()));
    }
    auto h = a.forward(p, buf, x, mode, cache ? &cache->a : nullptr);
    relu_inplace(h);
    auto y = b.forward(p, buf, h, mode, cache ? &cache->b : nullptr);
    if (cache) cache->a_act = std::move(h);
    if (projection) {
      add_inplace(y, projection->forward(p, buf, x, mode, cache ? &cache->shortcut : nullptr));
    } else {
      add_inplace(y, x);
    }
    relu_inplace(y);
    if (cache) cache->out = y;
    return y;
  }

  template <class T>
  BasicTensor<T> backward(ParamStore<T>& p, const ResidualBlockCache<T>& cache, const BasicTensor<T>& dy,
                          bool need_dx) const {
    auto dsum = relu_backward(cache.out, dy);
    auto dh = b.backward(p, cache.b, dsum, true);
    dh = relu_backward(cache.a_act, dh);
    auto dx = a.backward(p, cache.a, dh, need_dx);
    if (projection) {
      auto ds = projection->backward(p, cache.shortcut, dsum, need_dx);
      if (need_dx) add_inplace(dx, ds);
    } else if (need_dx) {
      add_inplace(dx, dsum);
    }
    return dx;
  }
};

struct ResNetWidths {
  std::size_t stem = 64;
  std::array<std::size_t, 3> blocks{64, 128, 256};
};

struct ResNet3dConfig {
  ResNetWidths widths;
  std::array<std::size_t, 3> block_strides{1, 2, 2};
  std::size_t num_classes = kNumClasses;
  std::size_t in_channels = 1;
  std::size_t kernel = 3;
};

template <class T>
struct ResNetCache {
  ConvBnCache<T> stem;
  BasicTensor<T> stem_act;
  std::array<ResidualBlockCache<T>, 3> blocks;
  BasicTensor<T> pooled;
  BasicTensor<T> probs;
  std::size_t positions = 0;
};

/// Stacks spectral cubes [X x Y x Z] into a network batch [B x X x Y x Z x 1].
template <class T>
BasicTensor<T> stack_cubes(std::span<const Tensor* const> cubes) {
  if (cubes.empty()) throw InputError("stack_cubes: empty batch");
  const Shape& s = cubes.front()->shape();
  require_rank(s, 3, "spectral cube");
  BasicTensor<T> out({cubes.size(), s[0], s[1], s[2], 1});
  const std::size_t vol = cubes.front()->size();
  for (std::size_t b = 0; b < cubes.size(); ++b) {
    if (cubes[b]->shape() != s) throw DimensionError("stack_cubes: mixed cube shapes in batch");
    for (std::size_t i = 0; i < vol; ++i) out[b * vol + i] = static_cast<T>((*cubes[b])[i]);
  }
  return out;
}

/// Residual 3D CNN: stem conv+BN+ReLU, three residual blocks, global average
/// pooling over all spatial-spectral positions, dense head, softmax.
template <class T>
class ResNet3d {
 public:
  explicit ResNet3d(const ResNet3dConfig& cfg = {}) : cfg_(cfg) {
    stem_ = ConvBnSpec{"stem", cfg.in_channels, cfg.widths.stem, cfg.kernel, Conv3dGeometry::same(cfg.kernel, 1)};
    std::size_t cin = cfg.widths.stem;
    for (std::size_t i = 0; i < 3; ++i) {
      blocks_[i] = ResidualBlockSpec::make("block" + std::to_string(i + 1), cin, cfg.widths.blocks[i],
                                           cfg.block_strides[i], cfg.kernel);
      cin = cfg.widths.blocks[i];
    }
    stem_.register_params(params_, buffers_);
    for (const auto& b : blocks_) b.register_params(params_, buffers_);
    params_.add("head.w", BasicTensor<T>({cin, cfg.num_classes}));
    params_.add("head.b", BasicTensor<T>({cfg.num_classes}));
  }

  void init(Rng& rng) {
    stem_.init(params_, rng);
    for (const auto& b : blocks_) b.init(params_, rng);
    const std::size_t feat = cfg_.widths.blocks[2];
    params_.value("head.w") = he_uniform<T>({feat, cfg_.num_classes}, feat, rng);
    params_.value("head.b").fill(T{0});
  }

  const ResNet3dConfig& config() const noexcept { return cfg_; }
  const ConvBnSpec& stem() const noexcept { return stem_; }
  const std::array<ResidualBlockSpec, 3>& blocks() const noexcept { return blocks_; }
  ParamStore<T>& params() noexcept { return params_; }
  const ParamStore<T>& params() const noexcept { return params_; }
  BufferStore<T>& buffers() noexcept { return buffers_; }
  const BufferStore<T>& buffers() const noexcept { return buffers_; }

  /// Logits for a batch [B x X x Y x Z x C_in] (rank 4 input is taken as C_in = 1).
  /// Train mode updates the running statistics and fills `cache` for backward().
  BasicTensor<T> logits(const BasicTensor<T>& input, Mode mode, ResNetCache<T>* cache = nullptr) {
    return run(input, mode, buffers_, cache);
  }

  /// Infer-mode class probabilities; uses a private snapshot of the running
  /// statistics, so concurrent calls are safe.
  BasicTensor<T> predict(const BasicTensor<T>& input) const {
    BufferStore<T> snapshot = buffers_;
    return softmax(run(input, Mode::infer, snapshot, nullptr));
  }

  /// Train-mode forward + backward of mean cross-entropy. Gradients are
  /// accumulated into params(); the caller zeroes them.
  double loss_and_backward(const BasicTensor<T>& input, std::span<const int> labels) {
    ResNetCache<T> cache;
    auto z = logits(input, Mode::train, &cache);
    cache.probs = softmax(z);
    const double loss = cross_entropy(cache.probs, labels);
    backward(cache, softmax_cross_entropy_backward(cache.probs, labels));
    return loss;
  }

  void backward(const ResNetCache<T>& cache, const BasicTensor<T>& dlogits) {
    auto dpooled = dense_backward(cache.pooled, params_.value("head.w"), dlogits, params_.grad("head.w"),
                                  params_.grad("head.b"));
    const auto& last = cache.blocks[2].out;
    BasicTensor<T> d(last.shape());
    const std::size_t batch = last.dim(0), channels = last.dim(4), P = cache.positions;
    const T inv = static_cast<T>(1.0 / static_cast<double>(P));
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t q = 0; q < P; ++q) {
        for (std::size_t c = 0; c < channels; ++c) d[(b * P + q) * channels + c] = dpooled(b, c) * inv;
      }
    }
    for (int i = 2; i >= 0; --i) d = blocks_[i].backward(params_, cache.blocks[i], d, true);
    d = relu_backward(cache.stem_act, d);
    stem_.backward(params_, cache.stem, d, false);
  }

  template <class U>
  ResNet3d<U> cast() const {
    ResNet3d<U> out(cfg_);
    for (const auto& e : params_.entries()) out.params().value(e.name) = e.value.template cast<U>();
    for (const auto& [k, v] : buffers_) out.buffers()[k] = v.template cast<U>();
    return out;
  }

 private:
  BasicTensor<T> run(const BasicTensor<T>& input, Mode mode, BufferStore<T>& buf, ResNetCache<T>* cache) const {
    BasicTensor<T> x = input.rank() == 4
                           ? input.reshaped({input.dim(0), input.dim(1), input.dim(2), input.dim(3), 1})
                           : input;
    if (x.rank() != 5 || x.dim(4) != cfg_.in_channels) {
      throw DimensionError("resnet3d: expected input [B x X x Y x Z x " + std::to_string(cfg_.in_channels) +
                           "], got " + shape_str(input.shape()));
    }
    auto h = stem_.forward(params_, buf, x, mode, cache ? &cache->stem : nullptr);
    relu_inplace(h);
    if (cache) cache->stem_act = h;
    for (std::size_t i = 0; i < 3; ++i) {
      h = blocks_[i].forward(params_, buf, h, mode, cache ? &cache->blocks[i] : nullptr);
    }
    const std::size_t batch = h.dim(0), channels = h.dim(4);
    const std::size_t P = h.size() / (batch * channels);
    BasicTensor<T> pooled({batch, channels});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < channels; ++c) {
        double s = 0.0;
        for (std::size_t q = 0; q < P; ++q) s += h[(b * P + q) * channels + c];
        pooled(b, c) = static_cast<T>(s / static_cast<double>(P));
      }
    }
    auto z = dense_forward(pooled, params_.value("head.w"), params_.value("head.b"));
    if (cache) {
      cache->pooled = std::move(pooled);
      cache->positions = P;
    }
    return z;
  }

  ResNet3dConfig cfg_;
  ConvBnSpec stem_;
  std::array<ResidualBlockSpec, 3> blocks_;
  ParamStore<T> params_;
  BufferStore<T> buffers_;
};

/// Class probabilities c_s for a single patch (infer mode).
template <class T>
ProbVector resnet3d_forward(const SpectralPatch& patch, const ResNet3d<T>& model) {
  const Tensor* p = &patch.data;
  auto probs = model.predict(stack_cubes<T>(std::span<const Tensor* const>(&p, 1)));
  return ProbVector::from_span<T>(probs.data());
}

}  // namespace df4lcz
