#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "affcue/checkpoint.hpp"
#include "affcue/dataset.hpp"
#include "affcue/losses.hpp"
#include "affcue/model.hpp"

namespace affcue {

struct TrainConfig {
  Variant variant = Variant::Full;
  double margin = 1.0;
  int batch_triplets = 8;
  int epochs = 200;
  int eval_every = 10;
  int eval_grasps = 20;
  int horizon = 8;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double w_ctl = 1.0;
  double w_bc = 1.0;
  CouplingDirection coupling = CouplingDirection::AnchorAffordance;
  bool bc_on_anchor_only = false;
  bool l2_squared = true;

  void validate() const;
};

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);

/// Either triplets (contrastive variants) or a plain list of trajectories.
struct Batch {
  TripletBatch triplets;
  std::vector<std::size_t> plain;
};

template <class S>
struct LossParts {
  S total = 0;
  S ctl = 0;
  S bc = 0;
};

/// Segments used for Z^A, one per trajectory (from stored bounds, else the
/// mug trace).
std::vector<InteractionSegment> dataset_segments(const Dataset& ds);

/// w_ctl * ctl + w_bc * bc for one batch with teacher forcing. When P.g is
/// set, gradients of the total are accumulated into it in a fixed order.
template <class S>
LossParts<S> batch_objective(const Model& model, const nn::ParamRef<S>& P, const std::vector<Trajectory>& trajs,
                             const std::vector<InteractionSegment>& segments, const Batch& batch,
                             const TrainConfig& cfg);

/// Embedding-level Eq.-3 loss of a triplet batch computed through the
/// encoder (no decoder, no BC).
template <class S>
S coupled_triplet_loss(const Model& model, const nn::ParamRef<S>& P, const std::vector<Trajectory>& trajs,
                       const std::vector<InteractionSegment>& segments, const TripletBatch& batch, S margin,
                       CouplingDirection dir = CouplingDirection::AnchorAffordance);

/// Batch for optimization step `step` of `epoch`, derived from the seed.
Batch sample_batch(const std::vector<Trajectory>& trajs, const TrainConfig& cfg, int epoch, int step);

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1, double beta2, double eps);
  void step(nn::Vec<float>& params, const nn::Vec<float>& grad);
  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  nn::Vec<float> m_, v_;
};

struct EpochRecord {
  int epoch = 0;
  double total = 0;
  double ctl = 0;
  double bc = 0;
  std::optional<double> eval_success;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::string to_jsonl() const;
};

struct TrainResult {
  Checkpoint best;   ///< first evaluation with the highest success rate
  Checkpoint last;
  TrainLog log;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Sees the parameters after each epoch; returning true stops training.
  std::function<bool(int epoch, const nn::Vec<float>& params)> after_epoch;
};

/// Optimizes the variant on the dataset; evaluates on eval_mugs every
/// eval_every epochs (skipped when eval_mugs is empty). Throws NumericError
/// on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const ModelConfig& model_cfg, const Dataset& ds,
                  const std::vector<MugSpec>& eval_mugs, const TrainHooks& hooks = {});

}  // namespace affcue
