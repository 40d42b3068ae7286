#pragma once

#include <span>
#include <string>
#include <vector>

#include "df4lcz/errors.hpp"
#include "df4lcz/fusion/prob_vector.hpp"
#include "df4lcz/graph/scene_graph.hpp"
#include "df4lcz/nn/layers.hpp"
#include "df4lcz/nn/params.hpp"
#include "df4lcz/nn/rng.hpp"
#include "df4lcz/nn/tensor.hpp"

namespace df4lcz {

/// Single-graph GCSConv layer: ReLU(A_norm H W1 + H W2 + b). The skip term
/// uses the un-aggregated H.
template <class T>
BasicTensor<T> gcsconv_forward(const BasicTensor<T>& h, const BasicTensor<T>& a_norm, const BasicTensor<T>& w1,
                               const BasicTensor<T>& w2, const BasicTensor<T>& b) {
  require_rank(h.shape(), 2, "gcsconv H");
  if (a_norm.rank() != 2 || a_norm.dim(0) != h.dim(0) || a_norm.dim(1) != h.dim(0)) {
    throw DimensionError("gcsconv: adjacency " + shape_str(a_norm.shape()) + " does not match H " + shape_str(h.shape()));
  }
  if (w1.shape() != w2.shape()) {
    throw DimensionError("gcsconv: W1 " + shape_str(w1.shape()) + " and W2 " + shape_str(w2.shape()) + " differ");
  }
  auto z = dense_forward(matmul(a_norm, h), w1, b);
  add_inplace(z, matmul(h, w2));
  relu_inplace(z);
  return z;
}

/// Disjoint union of graphs: node features stacked, normalised adjacency kept
/// as diagonal blocks, `segment[n]` = graph id of node n.
template <class T>
struct GraphBatch {
  BasicTensor<T> features;
  std::vector<BasicTensor<T>> blocks;
  std::vector<std::size_t> offsets;  // size G + 1
  std::vector<std::size_t> segment;

  std::size_t num_graphs() const { return blocks.size(); }
  std::size_t num_nodes() const { return segment.size(); }
};

template <class T>
GraphBatch<T> make_graph_batch(std::span<const SceneGraph* const> graphs) {
  if (graphs.empty()) throw InputError("graph batch is empty");
  GraphBatch<T> batch;
  std::size_t total = 0;
  batch.offsets.push_back(0);
  for (const auto* g : graphs) {
    if (g->features.rank() != 2 || g->features.dim(1) != kNodeFeatures || g->adjacency.rank() != 2 ||
        g->adjacency.dim(0) != g->features.dim(0) || g->adjacency.dim(1) != g->features.dim(0)) {
      throw DimensionError("scene graph with features " + shape_str(g->features.shape()) + " and adjacency " +
                           shape_str(g->adjacency.shape()) + " is malformed");
    }
    total += g->num_nodes();
    batch.offsets.push_back(total);
  }
  batch.features = BasicTensor<T>({total, kNodeFeatures});
  batch.segment.resize(total);
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const auto& g = *graphs[k];
    const std::size_t off = batch.offsets[k];
    for (std::size_t i = 0; i < g.features.size(); ++i) batch.features[off * kNodeFeatures + i] = static_cast<T>(g.features[i]);
    for (std::size_t n = off; n < batch.offsets[k + 1]; ++n) batch.segment[n] = k;
    batch.blocks.push_back(normalize_adjacency(g.adjacency.template cast<T>()));
  }
  return batch;
}

template <class T>
GraphBatch<T> make_graph_batch(const SceneGraph& g) {
  const SceneGraph* p = &g;
  return make_graph_batch<T>(std::span<const SceneGraph* const>(&p, 1));
}

/// Block-diagonal product: rows of each graph are multiplied by its own block.
template <class T>
BasicTensor<T> aggregate(const GraphBatch<T>& batch, const BasicTensor<T>& h, bool transpose = false) {
  const std::size_t f = h.dim(1);
  BasicTensor<T> out(h.shape());
  for (std::size_t k = 0; k < batch.num_graphs(); ++k) {
    const auto off = static_cast<Eigen::Index>(batch.offsets[k]);
    const auto n = static_cast<Eigen::Index>(batch.offsets[k + 1] - batch.offsets[k]);
    ConstMatrixMap<T> hk(h.raw() + off * static_cast<Eigen::Index>(f), n, static_cast<Eigen::Index>(f));
    MatrixMap<T> ok(out.raw() + off * static_cast<Eigen::Index>(f), n, static_cast<Eigen::Index>(f));
    auto a = as_matrix(batch.blocks[k]);
    if (transpose) {
      ok.noalias() = a.transpose() * hk;
    } else {
      ok.noalias() = a * hk;
    }
  }
  return out;
}

template <class T>
struct GcsConvCache {
  BasicTensor<T> input, aggregated, out;
};

struct GcsConvSpec {
  std::string name;
  std::size_t fin = 0, fout = 0;

  template <class T>
  void register_params(ParamStore<T>& p) const {
    p.add(name + ".w1", BasicTensor<T>({fin, fout}));
    p.add(name + ".w2", BasicTensor<T>({fin, fout}));
    p.add(name + ".b", BasicTensor<T>({fout}));
  }

  template <class T>
  void init(ParamStore<T>& p, Rng& rng) const {
    p.value(name + ".w1") = he_uniform<T>({fin, fout}, fin, rng);
    p.value(name + ".w2") = he_uniform<T>({fin, fout}, fin, rng);
    p.value(name + ".b").fill(T{0});
  }

  template <class T>
  BasicTensor<T> forward(const ParamStore<T>& p, const GraphBatch<T>& batch, const BasicTensor<T>& h,
                         GcsConvCache<T>* cache) const {
    if (h.rank() != 2 || h.dim(1) != fin || h.dim(0) != batch.num_nodes()) {
      throw DimensionError(name + ": expected node features [" + std::to_string(batch.num_nodes()) + " x " +
                           std::to_string(fin) + "], got " + shape_str(h.shape()));
    }
    auto agg = aggregate(batch, h);
    auto z = dense_forward(agg, p.value(name + ".w1"), p.value(name + ".b"));
    as_matrix(z).noalias() += as_matrix(h) * as_matrix(p.value(name + ".w2"));
    relu_inplace(z);
    if (cache) {
      cache->input = h;
      cache->aggregated = std::move(agg);
      cache->out = z;
    }
    return z;
  }

  template <class T>
  BasicTensor<T> backward(ParamStore<T>& p, const GraphBatch<T>& batch, const GcsConvCache<T>& cache,
                          const BasicTensor<T>& dy) const {
    auto dz = relu_backward(cache.out, dy);
    auto dagg = dense_backward(cache.aggregated, p.value(name + ".w1"), dz, p.grad(name + ".w1"), p.grad(name + ".b"));
    as_matrix(p.grad(name + ".w2")).noalias() += as_matrix(cache.input).transpose() * as_matrix(dz);
    auto dh = aggregate(batch, dagg, /*transpose=*/true);
    as_matrix(dh).noalias() += as_matrix(dz) * as_matrix(p.value(name + ".w2")).transpose();
    return dh;
  }
};

struct GcnConfig {
  std::size_t in_features = kNodeFeatures;
  std::size_t hidden = 32;
  std::size_t layers = 3;
  std::size_t num_classes = 17;
};

template <class T>
struct GcnCache {
  std::vector<GcsConvCache<T>> layers;
  BasicTensor<T> pooled;
  BasicTensor<T> probs;
};

/// Three GCSConv layers (width 32), mean pooling per graph, dense head, softmax.
template <class T>
class GcnModel {
 public:
  explicit GcnModel(const GcnConfig& cfg = {}) : cfg_(cfg) {
    std::size_t fin = cfg.in_features;
    for (std::size_t k = 0; k < cfg.layers; ++k) {
      layers_.push_back(GcsConvSpec{"gcs" + std::to_string(k + 1), fin, cfg.hidden});
      layers_.back().register_params(params_);
      fin = cfg.hidden;
    }
    params_.add("head.w", BasicTensor<T>({fin, cfg.num_classes}));
    params_.add("head.b", BasicTensor<T>({cfg.num_classes}));
  }

  void init(Rng& rng) {
    for (const auto& l : layers_) l.init(params_, rng);
    params_.value("head.w") = he_uniform<T>({cfg_.hidden, cfg_.num_classes}, cfg_.hidden, rng);
    params_.value("head.b").fill(T{0});
  }

  const GcnConfig& config() const noexcept { return cfg_; }
  const std::vector<GcsConvSpec>& layers() const noexcept { return layers_; }
  ParamStore<T>& params() noexcept { return params_; }
  const ParamStore<T>& params() const noexcept { return params_; }

  /// Final node embeddings [N_total x hidden] before pooling.
  BasicTensor<T> embed(const GraphBatch<T>& batch, GcnCache<T>* cache = nullptr) const {
    BasicTensor<T> h = batch.features;
    if (cache) cache->layers.assign(layers_.size(), {});
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      h = layers_[k].forward(params_, batch, h, cache ? &cache->layers[k] : nullptr);
    }
    return h;
  }

  /// Logits per graph [G x classes].
  BasicTensor<T> logits(const GraphBatch<T>& batch, GcnCache<T>* cache = nullptr) const {
    auto h = embed(batch, cache);
    const std::size_t width = h.dim(1);
    BasicTensor<T> pooled({batch.num_graphs(), width});
    for (std::size_t k = 0; k < batch.num_graphs(); ++k) {
      const std::size_t n0 = batch.offsets[k], n1 = batch.offsets[k + 1];
      for (std::size_t c = 0; c < width; ++c) {
        double s = 0.0;
        for (std::size_t n = n0; n < n1; ++n) s += h(n, c);
        pooled(k, c) = static_cast<T>(s / static_cast<double>(n1 - n0));
      }
    }
    auto z = dense_forward(pooled, params_.value("head.w"), params_.value("head.b"));
    if (cache) cache->pooled = std::move(pooled);
    return z;
  }

  BasicTensor<T> predict(const GraphBatch<T>& batch) const { return softmax(logits(batch)); }

  /// Mean cross-entropy over the batch; gradients accumulate into params().
  double loss_and_backward(const GraphBatch<T>& batch, std::span<const int> labels) {
    GcnCache<T> cache;
    cache.probs = softmax(logits(batch, &cache));
    const double loss = cross_entropy(cache.probs, labels);
    backward(batch, cache, softmax_cross_entropy_backward(cache.probs, labels));
    return loss;
  }

  void backward(const GraphBatch<T>& batch, const GcnCache<T>& cache, const BasicTensor<T>& dlogits) {
    auto dpooled = dense_backward(cache.pooled, params_.value("head.w"), dlogits, params_.grad("head.w"),
                                  params_.grad("head.b"));
    BasicTensor<T> dh({batch.num_nodes(), dpooled.dim(1)});
    for (std::size_t n = 0; n < batch.num_nodes(); ++n) {
      const std::size_t k = batch.segment[n];
      const T inv = static_cast<T>(1.0 / static_cast<double>(batch.offsets[k + 1] - batch.offsets[k]));
      for (std::size_t c = 0; c < dh.dim(1); ++c) dh(n, c) = dpooled(k, c) * inv;
    }
    for (std::size_t k = layers_.size(); k-- > 0;) dh = layers_[k].backward(params_, batch, cache.layers[k], dh);
  }

  template <class U>
  GcnModel<U> cast() const {
    GcnModel<U> out(cfg_);
    for (const auto& e : params_.entries()) out.params().value(e.name) = e.value.template cast<U>();
    return out;
  }

 private:
  GcnConfig cfg_;
  std::vector<GcsConvSpec> layers_;
  ParamStore<T> params_;
};

/// Class probabilities c_g for a single scene graph.
template <class T>
ProbVector gcn_forward(const SceneGraph& g, const GcnModel<T>& model) {
  auto p = model.predict(make_graph_batch<T>(g));
  return ProbVector::from_span<T>(p.data());
}

}  // namespace df4lcz
