#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "df4lcz/data/augment.hpp"
#include "df4lcz/data/dataset.hpp"
#include "df4lcz/errors.hpp"
#include "df4lcz/graph/gcn.hpp"
#include "df4lcz/nn/layers.hpp"
#include "df4lcz/nn/params.hpp"
#include "df4lcz/nn/rng.hpp"
#include "df4lcz/spectral/resnet3d.hpp"
#include "df4lcz/train/checkpoint.hpp"

namespace df4lcz {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  double lr = 0.002;
  double lr_decay_factor = 0.4;
  std::size_t lr_patience = 5;
  std::size_t early_stop_patience = 10;
  std::uint64_t seed = 0;
  double alpha = 0.6;
  /// Random dihedral transform per training sample and step.
  bool augment = true;

  void validate() const {
    if (batch_size < 2) throw DomainError("batch_size must be at least 2 (batch normalisation)");
    if (max_epochs < 1) throw DomainError("max_epochs must be at least 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError("lr must be positive");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) throw DomainError("lr_decay_factor must lie in (0,1)");
    if (lr_patience < 1 || early_stop_patience < 1) throw DomainError("patience values must be at least 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0,1]");
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_oa = 0.0;
  double lr = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

enum class StopReason { max_epochs, early_stop };

inline const char* to_string(StopReason r) { return r == StopReason::max_epochs ? "max_epochs" : "early_stop"; }

struct TrainLog {
  std::vector<EpochLog> epochs;
  StopReason stop_reason = StopReason::max_epochs;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;

  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

inline constexpr const char* kTrainLogHeader = "epoch,train_loss,val_loss,val_oa,lr";

inline std::string train_log_csv(const TrainLog& log) {
  std::ostringstream os;
  os << kTrainLogHeader << '\n';
  char buf[160];
  for (const auto& e : log.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g\n", e.epoch, e.train_loss, e.val_loss, e.val_oa, e.lr);
    os << buf;
  }
  return os.str();
}

inline nlohmann::json train_summary_json(const TrainLog& log) {
  return {{"stop_reason", to_string(log.stop_reason)},
          {"best_epoch", log.best_epoch},
          {"epochs", log.epochs.size()},
          {"steps", log.steps}};
}

/// How a model family consumes samples. Both streams train in float.
template <class Model>
struct StreamAdapter;

template <>
struct StreamAdapter<ResNet3d<float>> {
  static constexpr StreamKind kind = StreamKind::sentinel;

  static Tensor batch_input(std::span<const Sample* const> batch, std::span<const int> ops) {
    std::vector<Tensor> cubes;
    cubes.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      cubes.push_back(ops.empty() || ops[i] == 0 ? batch[i]->cube.data : d4_apply(batch[i]->cube.data, static_cast<D4>(ops[i])));
    }
    std::vector<const Tensor*> ptrs;
    for (const auto& c : cubes) ptrs.push_back(&c);
    return stack_cubes<float>(ptrs);
  }

  static double loss_and_backward(ResNet3d<float>& m, std::span<const Sample* const> batch, std::span<const int> ops,
                                  std::span<const int> labels) {
    return m.loss_and_backward(batch_input(batch, ops), labels);
  }

  static Tensor predict(const ResNet3d<float>& m, std::span<const Sample* const> batch) {
    return m.predict(batch_input(batch, {}));
  }

  static std::size_t num_classes(const ResNet3d<float>& m) { return m.config().num_classes; }
};

template <>
struct StreamAdapter<GcnModel<float>> {
  static constexpr StreamKind kind = StreamKind::google;

  static GraphBatch<float> batch_input(std::span<const Sample* const> batch, std::span<const int> ops) {
    std::vector<SceneGraph> moved;
    std::vector<const SceneGraph*> ptrs;
    if (!ops.empty()) {
      moved.reserve(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) moved.push_back(d4_apply(batch[i]->graph, static_cast<D4>(ops[i])));
      for (const auto& g : moved) ptrs.push_back(&g);
    } else {
      for (const auto* s : batch) ptrs.push_back(&s->graph);
    }
    return make_graph_batch<float>(ptrs);
  }

  static double loss_and_backward(GcnModel<float>& m, std::span<const Sample* const> batch, std::span<const int> ops,
                                  std::span<const int> labels) {
    return m.loss_and_backward(batch_input(batch, ops), labels);
  }

  static Tensor predict(const GcnModel<float>& m, std::span<const Sample* const> batch) {
    return m.predict(batch_input(batch, {}));
  }

  static std::size_t num_classes(const GcnModel<float>& m) { return m.config().num_classes; }
};

/// Infer-mode class probabilities [N x classes], computed in chunks.
template <class Model>
Tensor predict_samples(const Model& m, std::span<const Sample* const> samples, std::size_t chunk = 64) {
  const std::size_t C = StreamAdapter<Model>::num_classes(m);
  Tensor out({samples.size(), C});
  for (std::size_t i = 0; i < samples.size(); i += chunk) {
    const auto part = samples.subspan(i, std::min(chunk, samples.size() - i));
    const auto p = StreamAdapter<Model>::predict(m, part);
    std::copy(p.data().begin(), p.data().end(), out.raw() + i * C);
  }
  return out;
}

struct EvalSummary {
  double loss = 0.0;
  double oa = 0.0;
};

template <class Model>
EvalSummary evaluate(const Model& m, std::span<const Sample* const> samples) {
  if (samples.empty()) throw InputError("evaluate: no samples");
  const auto probs = predict_samples(m, samples);
  std::vector<int> labels;
  for (const auto* s : samples) labels.push_back(s->label);
  EvalSummary r;
  r.loss = cross_entropy(probs, labels);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto row = probs.data().subspan(i * probs.dim(1), probs.dim(1));
    hit += static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()) == labels[i];
  }
  r.oa = static_cast<double>(hit) / static_cast<double>(samples.size());
  return r;
}

/// Reduce-on-plateau and early stopping driven by validation loss. An epoch
/// improves iff its loss is strictly below the best so far.
class PlateauSchedule {
 public:
  enum class Outcome { improved, plateau, stop };

  explicit PlateauSchedule(const TrainConfig& cfg)
      : lr0_(cfg.lr), factor_(cfg.lr_decay_factor), lr_patience_(cfg.lr_patience), stop_patience_(cfg.early_stop_patience) {}

  /// lr0 * factor^decays.
  double lr() const { return lr0_ * std::pow(factor_, static_cast<double>(decays_)); }
  std::size_t decays() const noexcept { return decays_; }

  Outcome observe(double val_loss) {
    if (val_loss < best_) {
      best_ = val_loss;
      since_best_ = since_decay_ = 0;
      return Outcome::improved;
    }
    ++since_best_;
    if (++since_decay_ >= lr_patience_) {
      ++decays_;
      since_decay_ = 0;
    }
    return since_best_ >= stop_patience_ ? Outcome::stop : Outcome::plateau;
  }

 private:
  double lr0_, factor_;
  std::size_t lr_patience_, stop_patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t decays_ = 0, since_best_ = 0, since_decay_ = 0;
};

template <class Model>
struct TrainResult {
  Model model;  // parameters at the best validation loss
  TrainLog log;
};

/// Called after every epoch, e.g. for progress output.
using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch Adam with reduce-on-plateau and early stopping on validation
/// loss. `model` arrives initialised; the best-validation copy is returned.
template <class Model>
TrainResult<Model> train_stream(Model model, const Dataset& data, const TrainConfig& cfg,
                                const EpochCallback& on_epoch = {}) {
  using A = StreamAdapter<Model>;
  cfg.validate();
  const auto train = data.subset(Split::train);
  const auto val = data.subset(Split::val);
  if (train.size() < 2) throw InputError("train split needs at least 2 samples, has " + std::to_string(train.size()));
  if (val.empty()) throw InputError("validation split is empty");
  for (const auto* s : train) {
    if (s->label < 0 || static_cast<std::size_t>(s->label) >= A::num_classes(model)) {
      throw ConsistencyError("sample " + s->sample_id + " label exceeds the model's class count");
    }
  }

  Rng rng = Rng::derive(cfg.seed, std::string("train/") + to_string(A::kind));
  TrainResult<Model> best{model, {}};
  TrainLog& log = best.log;
  PlateauSchedule schedule(cfg);
  std::vector<std::size_t> order(train.size());

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = schedule.lr();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::size_t> cuts;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) cuts.push_back(b);
    cuts.push_back(order.size());
    if (cuts.size() > 2 && cuts[cuts.size() - 1] - cuts[cuts.size() - 2] == 1) cuts.erase(cuts.end() - 2);

    double loss_sum = 0.0;
    for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
      std::vector<const Sample*> batch;
      std::vector<int> labels, ops;
      for (std::size_t i = cuts[b]; i < cuts[b + 1]; ++i) {
        batch.push_back(train[order[i]]);
        labels.push_back(train[order[i]]->label);
        ops.push_back(cfg.augment ? static_cast<int>(rng.uniform_int(kD4Size)) : 0);
      }
      model.params().zero_grad();
      const double loss = A::loss_and_backward(model, batch, ops, labels);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(log.steps + 1));
      }
      adam_step(model.params(), lr);
      ++log.steps;
      loss_sum += loss * static_cast<double>(batch.size());
    }

    const auto ev = evaluate(model, val);
    if (!std::isfinite(ev.loss)) throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(train.size()), ev.loss, ev.oa, lr});
    if (on_epoch) on_epoch(log.epochs.back());

    const auto outcome = schedule.observe(ev.loss);
    if (outcome == PlateauSchedule::Outcome::improved) {
      best.model = model;
      log.best_epoch = epoch;
    } else if (outcome == PlateauSchedule::Outcome::stop) {
      log.stop_reason = StopReason::early_stop;
      break;
    }
  }
  return best;
}

}  // namespace df4lcz
