#include "affcue/training.hpp"

#include <cmath>
#include <cstdio>

#include "affcue/error.hpp"
#include "affcue/evaluation.hpp"
#include "affcue/rng.hpp"

namespace affcue {

using nn::Mat;
using nn::Vec;

void TrainConfig::validate() const {
  if (!(margin > 0)) throw Error(ErrorKind::ConfigError, "margin must be > 0");
  if (eval_every < 1) throw Error(ErrorKind::ConfigError, "eval_every must be >= 1");
  if (batch_triplets < 1) throw Error(ErrorKind::ConfigError, "batch_triplets must be >= 1");
  if (epochs < 0) throw Error(ErrorKind::ConfigError, "epochs must be >= 0");
  if (!(lr > 0)) throw Error(ErrorKind::ConfigError, "lr must be > 0");
  if (horizon < 1 || eval_grasps < 1) throw Error(ErrorKind::ConfigError, "horizon and eval_grasps must be >= 1");
}

Json to_json(const TrainConfig& c) {
  return Json{{"variant", variant_name(c.variant)},
              {"margin", c.margin},
              {"batch_triplets", c.batch_triplets},
              {"epochs", c.epochs},
              {"eval_every", c.eval_every},
              {"eval_grasps", c.eval_grasps},
              {"horizon", c.horizon},
              {"lr", c.lr},
              {"optimizer", Json{{"name", "adam"}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.adam_eps}}},
              {"seed", c.seed},
              {"loss_weights", Json{{"w_ctl", c.w_ctl}, {"w_bc", c.w_bc}}},
              {"coupling_direction", coupling_name(c.coupling)},
              {"bc_on_anchor_only", c.bc_on_anchor_only},
              {"l2_squared", c.l2_squared}};
}

TrainConfig train_config_from_json(const Json& j) {
  try {
    TrainConfig c;
    c.variant = variant_from_name(j.at("variant").get<std::string>());
    c.margin = j.at("margin").get<double>();
    c.batch_triplets = j.at("batch_triplets").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.eval_every = j.at("eval_every").get<int>();
    c.eval_grasps = j.at("eval_grasps").get<int>();
    c.horizon = j.at("horizon").get<int>();
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("optimizer").at("beta1").get<double>();
    c.beta2 = j.at("optimizer").at("beta2").get<double>();
    c.adam_eps = j.at("optimizer").at("eps").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.w_ctl = j.at("loss_weights").at("w_ctl").get<double>();
    c.w_bc = j.at("loss_weights").at("w_bc").get<double>();
    c.coupling = coupling_from_name(j.at("coupling_direction").get<std::string>());
    c.bc_on_anchor_only = j.at("bc_on_anchor_only").get<bool>();
    c.l2_squared = j.at("l2_squared").get<bool>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed train config: ") + e.what());
  }
}

std::vector<InteractionSegment> dataset_segments(const Dataset& ds) {
  std::vector<InteractionSegment> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Trajectory& t = ds.trajectories[i];
    if (t.gt_segment) {
      out.push_back(segment_from_bounds(t, *t.gt_segment));
    } else if (i < ds.mug_traces.size() && !ds.mug_traces[i].empty()) {
      out.push_back(extract_interaction_segment(t, ds.mug_traces[i]));
    } else {
      throw Error(ErrorKind::InsufficientData, "trajectory " + t.id + " has no interaction segment");
    }
  }
  return out;
}

namespace {

/// Demonstrated actions in network units.
template <class S>
Mat<S> expert_actions(const Model& model, const Trajectory& t) {
  Mat<S> a = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                 t.action.data(), t.T - 1, kActionDim)
                 .cast<S>();
  for (int k = 0; k < 6; ++k) a.col(k) /= S(model.config().action_scale[k]);
  return a;
}

template <class S>
MemberEmbedding<S> embeddings(const TrajectoryPass<S>& pass) {
  MemberEmbedding<S> m;
  if (pass.seg) m.z_aff = pass.seg->z_aff;
  m.z_obs = pass.z_obs();
  return m;
}

template <class S>
void check_finite(S v, const char* what) {
  if (!std::isfinite(static_cast<double>(v))) {
    throw Error(ErrorKind::NumericError, std::string("non-finite ") + what + " loss");
  }
}

}  // namespace

template <class S>
LossParts<S> batch_objective(const Model& model, const nn::ParamRef<S>& P, const std::vector<Trajectory>& trajs,
                             const std::vector<InteractionSegment>& segments, const Batch& batch,
                             const TrainConfig& cfg) {
  const Variant v = model.config().variant;
  const bool grads = P.has_grad();
  const S w_ctl = static_cast<S>(cfg.w_ctl), w_bc = static_cast<S>(cfg.w_bc);
  const S margin = static_cast<S>(cfg.margin);
  LossParts<S> out;

  if (!variant_is_contrastive(v)) {
    if (batch.plain.empty()) throw Error(ErrorKind::InsufficientData, "empty batch");
    const S scale = w_bc / static_cast<S>(batch.plain.size());
    for (std::size_t idx : batch.plain) {
      const Trajectory& t = trajs.at(idx);
      const auto pass = model.forward<S>(P, t, nullptr, {false, 0, t.T - 1});
      Mat<S> da = Mat<S>::Zero(t.T - 1, kActionDim);
      out.bc += bc_loss<S>(expert_actions<S>(model, t), pass.actions(), cfg.l2_squared, scale, grads ? &da : nullptr);
      if (grads) model.backward<S>(P, pass, nullptr, {}, da);
    }
    out.bc /= static_cast<S>(batch.plain.size());
    out.total = w_bc * out.bc;
    return out;
  }

  const TripletBatch& tb = batch.triplets;
  if (tb.size() == 0) throw Error(ErrorKind::InsufficientData, "empty triplet batch");
  const bool full = v == Variant::Full;
  const std::size_t n_bc = cfg.bc_on_anchor_only ? tb.size() : 3 * tb.size();
  const S bc_scale = w_bc / static_cast<S>(n_bc);
  for (std::size_t i = 0; i < tb.size(); ++i) {
    const std::array<std::size_t, 3> idx{tb.anchors[i], tb.positives[i], tb.negatives[i]};
    std::array<TrajectoryPass<S>, 3> pass;
    std::array<MemberEmbedding<S>, 3> emb;
    std::array<MemberGrad<S>, 3> g;
    std::array<Mat<S>, 3> da;
    for (int k = 0; k < 3; ++k) {
      const Trajectory& t = trajs.at(idx[k]);
      const bool bc_member = k == 0 || !cfg.bc_on_anchor_only;
      PassOptions opt{full, t.T, bc_member ? t.T - 1 : 0};
      pass[k] = model.forward<S>(P, t, full ? &segments.at(idx[k]) : nullptr, opt);
      emb[k] = embeddings(pass[k]);
      g[k] = MemberGrad<S>::zeros_like(emb[k]);
      da[k] = Mat<S>::Zero(opt.decoder_steps, kActionDim);
      if (bc_member) {
        out.bc += bc_loss<S>(expert_actions<S>(model, t), pass[k].actions(), cfg.l2_squared, bc_scale,
                             grads ? &da[k] : nullptr);
      }
    }
    if (full) {
      out.ctl += coupled_triplet_term<S>(emb[0], emb[1], emb[2], margin, cfg.coupling, w_ctl,
                                         grads ? &g[0] : nullptr, grads ? &g[1] : nullptr, grads ? &g[2] : nullptr);
    } else {
      out.ctl += step_triplet_term<S>(emb[0].z_obs, emb[1].z_obs, emb[2].z_obs, margin, w_ctl,
                                      grads ? &g[0].dz_obs : nullptr, grads ? &g[1].dz_obs : nullptr,
                                      grads ? &g[2].dz_obs : nullptr);
    }
    if (grads) {
      for (int k = 0; k < 3; ++k) model.backward<S>(P, pass[k], full ? &g[k].dz_aff : nullptr, g[k].dz_obs, da[k]);
    }
  }
  out.bc /= static_cast<S>(n_bc);
  out.total = w_ctl * out.ctl + w_bc * out.bc;
  return out;
}

template <class S>
S coupled_triplet_loss(const Model& model, const nn::ParamRef<S>& P, const std::vector<Trajectory>& trajs,
                       const std::vector<InteractionSegment>& segments, const TripletBatch& batch, S margin,
                       CouplingDirection dir) {
  std::vector<MemberEmbedding<S>> A, Pos, N;
  auto encode = [&](std::size_t i) {
    const Trajectory& t = trajs.at(i);
    return embeddings(model.forward<S>(P, t, &segments.at(i), {true, t.T, 0}));
  };
  for (std::size_t i = 0; i < batch.size(); ++i) {
    A.push_back(encode(batch.anchors[i]));
    Pos.push_back(encode(batch.positives[i]));
    N.push_back(encode(batch.negatives[i]));
  }
  return coupled_triplet_loss<S>(A, Pos, N, margin, dir);
}

Batch sample_batch(const std::vector<Trajectory>& trajs, const TrainConfig& cfg, int epoch, int step) {
  const std::uint64_t seed = mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)), static_cast<std::uint64_t>(step));
  Batch b;
  if (variant_is_contrastive(cfg.variant)) {
    std::vector<AffordanceCategory> cats;
    for (const auto& t : trajs) cats.push_back(t.category);
    b.triplets = sample_triplets(cats, static_cast<std::size_t>(cfg.batch_triplets), seed);
  } else {
    Rng rng(seed);
    for (int i = 0; i < 3 * cfg.batch_triplets; ++i) b.plain.push_back(rng.uniform_index(trajs.size()));
  }
  return b;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(nn::Vec<float>::Zero(static_cast<Eigen::Index>(n))),
      v_(nn::Vec<float>::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(nn::Vec<float>& params, const nn::Vec<float>& grad) {
  t_ += 1;
  const float b1 = static_cast<float>(b1_), b2 = static_cast<float>(b2_);
  m_ = b1 * m_ + (1.0f - b1) * grad;
  v_ = b2 * v_ + (1.0f - b2) * grad.cwiseAbs2();
  const float c1 = static_cast<float>(1.0 - std::pow(b1_, static_cast<double>(t_)));
  const float c2 = static_cast<float>(1.0 - std::pow(b2_, static_cast<double>(t_)));
  const float lr = static_cast<float>(lr_), eps = static_cast<float>(eps_);
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto& r : epochs) {
    Json j{{"epoch", r.epoch}, {"total", r.total}, {"ctl", r.ctl}, {"bc", r.bc},
           {"eval_success", r.eval_success ? Json(*r.eval_success) : Json(nullptr)}};
    out += j.dump() + "\n";
  }
  return out;
}

TrainResult train(const TrainConfig& cfg, const ModelConfig& model_cfg, const Dataset& ds,
                  const std::vector<MugSpec>& eval_mugs, const TrainHooks& hooks) {
  cfg.validate();
  if (model_cfg.variant != cfg.variant) throw Error(ErrorKind::ConfigError, "model and train variants differ");
  if (ds.size() == 0) throw Error(ErrorKind::InsufficientData, "dataset is empty");
  const Model model(model_cfg);
  const auto& trajs = ds.trajectories;
  std::vector<InteractionSegment> segments;
  if (cfg.variant == Variant::Full) segments = dataset_segments(ds);
  if (variant_is_contrastive(cfg.variant)) sample_batch(trajs, cfg, 0, 0);  // fail early on bad data

  nn::Vec<float> params = model.init_params<float>();
  nn::Vec<float> grad(params.size());
  Adam adam(static_cast<std::size_t>(params.size()), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  const int steps_per_epoch =
      static_cast<int>((ds.size() + static_cast<std::size_t>(cfg.batch_triplets) - 1) / cfg.batch_triplets);
  const std::uint64_t eval_seed = mix_seed(cfg.seed, 0xe7a1);

  auto snapshot = [&](int epoch, std::optional<double> success) {
    Checkpoint c;
    c.model = model_cfg;
    c.train = to_json(cfg);
    c.sim = ds.sim;
    c.params.assign(params.data(), params.data() + params.size());
    c.epoch = epoch;
    c.eval_success = success;
    return c;
  };

  TrainResult result;
  std::optional<double> best_success;
  result.best = snapshot(0, std::nullopt);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    for (int step = 0; step < steps_per_epoch; ++step) {
      const Batch batch = sample_batch(trajs, cfg, epoch, step);
      grad.setZero();
      const nn::ParamRef<float> P{&model.layout(), params.data(), grad.data()};
      const LossParts<float> loss = batch_objective<float>(model, P, trajs, segments, batch, cfg);
      check_finite(loss.total, "total");
      if (!grad.allFinite()) throw Error(ErrorKind::NumericError, "non-finite gradient at epoch " + std::to_string(epoch));
      adam.step(params, grad);
      rec.total += loss.total;
      rec.ctl += loss.ctl;
      rec.bc += loss.bc;
    }
    rec.total /= steps_per_epoch;
    rec.ctl /= steps_per_epoch;
    rec.bc /= steps_per_epoch;
    if (!eval_mugs.empty() && epoch % cfg.eval_every == 0) {
      NetworkPolicy policy(model, std::vector<float>(params.data(), params.data() + params.size()));
      const EvalReport rep = evaluate(policy, eval_mugs, cfg.eval_grasps, eval_seed, ds.sim, cfg.horizon);
      rec.eval_success = rep.success_rate;
      if (!best_success || rep.success_rate > *best_success) {
        best_success = rep.success_rate;
        result.best = snapshot(epoch, rep.success_rate);
      }
    }
    result.log.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (hooks.after_epoch && hooks.after_epoch(epoch, params)) break;
  }
  const auto& log = result.log.epochs;
  result.last = snapshot(static_cast<int>(log.size()), log.empty() ? std::nullopt : log.back().eval_success);
  if (!best_success) result.best = result.last;
  return result;
}

#define AFFCUE_TRAIN_INSTANTIATE(S)                                                                           \
  template LossParts<S> batch_objective<S>(const Model&, const nn::ParamRef<S>&, const std::vector<Trajectory>&, \
                                           const std::vector<InteractionSegment>&, const Batch&,               \
                                           const TrainConfig&);                                                \
  template S coupled_triplet_loss<S>(const Model&, const nn::ParamRef<S>&, const std::vector<Trajectory>&,     \
                                     const std::vector<InteractionSegment>&, const TripletBatch&, S,           \
                                     CouplingDirection);

AFFCUE_TRAIN_INSTANTIATE(float)
AFFCUE_TRAIN_INSTANTIATE(double)

}  // namespace affcue
