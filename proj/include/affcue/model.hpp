#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "affcue/config_io.hpp"
#include "affcue/dataset.hpp"
#include "affcue/nn/layers.hpp"

namespace affcue {

struct ConvSpec {
  int channels = 0;
  int kernel = 0;
  int stride = 1;
  bool operator==(const ConvSpec&) const = default;
};

struct EncoderConfig {
  int embed_dim = 32;
  int image_height = 144;
  int image_width = 144;
  ConvSpec conv1{16, 5, 2};
  ConvSpec conv2{32, 3, 2};
  ConvSpec conv3{32, 3, 1};
  int fc_tile_dim = 32;
  ConvSpec deconv1{16, 4, 2};
  ConvSpec deconv2{2, 3, 1};
  std::array<ConvSpec, 2> post_attention_convs{{{32, 3, 2}, {32, 3, 2}}};
  int lstm_hidden = 64;
  int head_hidden = 64;
  int segment_lstm_hidden = 64;
  bool stop_gradient_on_cue = false;

  /// Throws ConfigError on inconsistent shapes.
  void validate() const;
  /// 16x16 images, two channels per conv, embedding 8.
  static EncoderConfig micro();
  bool operator==(const EncoderConfig&) const = default;
};

struct DecoderConfig {
  std::array<ConvSpec, 2> convs{{{32, 3, 2}, {32, 3, 2}}};
  std::array<int, 2> fc_hidden{64, 64};

  static DecoderConfig micro();
  bool operator==(const DecoderConfig&) const = default;
};

enum class Variant { Full, NormalTriplet, NoContrastive, BaselineBc };

/// CLI spelling: full, normal-triplet, no-contrastive, baseline.
std::string variant_name(Variant v);
/// Accepts CLI spellings and underscore forms; throws UnknownVariant.
Variant variant_from_name(const std::string& name);
bool variant_is_contrastive(Variant v);

struct ModelConfig {
  Variant variant = Variant::Full;
  EncoderConfig encoder;
  DecoderConfig decoder;
  /// Unit of each pose-delta dimension inside the network; defaults match the simulator clips.
  std::array<double, 6> action_scale{0.02, 0.02, 0.02, 0.3, 0.3, 0.3};
  std::uint64_t init_seed = 0;

  static ModelConfig micro(Variant v = Variant::Full);
  bool operator==(const ModelConfig&) const = default;
};

Json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

template <class S>
struct Carry {
  nn::Vec<S> h;
  nn::Vec<S> c;
};

/// One encoder step: outputs and every intermediate needed for backprop.
template <class S>
struct EncoderStep {
  nn::FMap<S> image;
  nn::Mat<S> cols1, cols2, cols3, cols_p1, cols_p2;
  nn::FMap<S> conv1, conv2, conv3, fused3, deconv1, logits;
  nn::Vec<S> top_in, top_out;
  nn::Mat<S> softmax;  ///< 2 x (H1*W1); row 0 is the affordance cue
  nn::FMap<S> cat, post1, post2;
  nn::LstmCache<S> lstm;
  nn::Vec<S> lstm_h;
  nn::Vec<S> head1;
  nn::Vec<S> z_obs;
  Carry<S> carry;  ///< carry after this step

  /// Affordance cue as an H1 x W1 row-major vector.
  nn::Vec<S> aff_cue() const { return softmax.row(0).transpose(); }
  const nn::FMap<S>& conv1_feat() const { return conv1; }
};

template <class S>
using EncoderOutput = EncoderStep<S>;

template <class S>
struct DecoderStep {
  nn::FMap<S> fused;
  nn::Mat<S> cols1, cols2;
  nn::FMap<S> y1, y2;
  nn::Vec<S> flat, h1, h2;
  nn::Vec<S> action;  ///< grip entry squashed to [0, 1]
};

/// Gradients a decoder step sends back into the encoder step it consumed.
template <class S>
struct DecoderInputGrad {
  nn::Vec<S> dz_obs;
  nn::Vec<S> dcue;    ///< H1*W1
  nn::Mat<S> dconv1;  ///< C1 x H1*W1
};

template <class S>
struct SegmentPass {
  std::vector<nn::LstmCache<S>> steps;
  nn::Vec<S> h_final;
  nn::Vec<S> z_aff;
};

template <class S>
struct BaselineStep {
  nn::FMap<S> image;
  nn::Mat<S> cols1, cols2, cols3;
  nn::FMap<S> conv1, conv2, conv3;
  nn::Vec<S> top_in, top_out;
  nn::Vec<S> flat;
  nn::LstmCache<S> lstm;
  nn::Vec<S> lstm_h, head1, action;
  Carry<S> carry;
};

/// Forward state of one trajectory under teacher forcing.
template <class S>
struct TrajectoryPass {
  std::vector<EncoderStep<S>> enc;
  std::vector<DecoderStep<S>> dec;
  std::vector<BaselineStep<S>> base;
  std::optional<SegmentPass<S>> seg;

  /// Predicted actions for steps 1..T-1, one row each.
  nn::Mat<S> actions() const;
  std::vector<nn::Vec<S>> z_obs() const;
};

struct PassOptions {
  bool segment = false;  ///< run the segment encoder
  int encoder_steps = 0; ///< number of leading steps to encode (attention variants)
  int decoder_steps = 0; ///< number of leading steps with an action prediction
};

class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const nn::ParamLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.size(); }
  bool has_attention() const { return config_.variant != Variant::BaselineBc; }
  int cue_height() const { return h1_; }
  int cue_width() const { return w1_; }

  template <class S>
  nn::Vec<S> init_params() const {
    return layout_.initialize<S>(config_.init_seed);
  }

  template <class S>
  Carry<S> fresh_carry() const;

  // Step functions take a_prev and return actions in network units: pose deltas
  // divided by action_scale, grip unchanged. forward() and encode_segment()
  // convert stored raw actions themselves.
  template <class S>
  nn::Vec<S> normalize_action(nn::Vec<S> a) const {
    for (int k = 0; k < 6; ++k) a[k] /= S(config_.action_scale[k]);
    return a;
  }
  template <class S>
  nn::Vec<S> denormalize_action(nn::Vec<S> a) const {
    for (int k = 0; k < 6; ++k) a[k] *= S(config_.action_scale[k]);
    return a;
  }

  // Attention variants.
  template <class S>
  EncoderStep<S> encode_step(const nn::ParamRef<S>& P, const float* image, const nn::Vec<S>& state,
                             const nn::Vec<S>& a_prev, const Carry<S>& carry) const;
  /// dcarry holds the gradient w.r.t. this step's output carry on entry and
  /// the gradient w.r.t. its input carry on return.
  template <class S>
  void encode_step_backward(const nn::ParamRef<S>& P, const EncoderStep<S>& st, const nn::Vec<S>& dz,
                            const DecoderInputGrad<S>* from_decoder, Carry<S>& dcarry) const;

  template <class S>
  DecoderStep<S> decode_action(const nn::ParamRef<S>& P, const nn::Vec<S>& state, const EncoderStep<S>& enc) const;
  /// Decoder on explicit inputs (cue given as an H1*W1 vector).
  template <class S>
  DecoderStep<S> decode_from(const nn::ParamRef<S>& P, const nn::Vec<S>& state, const nn::FMap<S>& conv1,
                             const nn::Vec<S>& cue, const nn::Vec<S>& z_obs) const;
  template <class S>
  DecoderInputGrad<S> decode_backward(const nn::ParamRef<S>& P, const DecoderStep<S>& st,
                                      const nn::FMap<S>& conv1, const nn::Vec<S>& cue,
                                      const nn::Vec<S>& daction) const;

  template <class S>
  SegmentPass<S> encode_segment(const nn::ParamRef<S>& P, const InteractionSegment& seg) const;
  template <class S>
  void encode_segment_backward(const nn::ParamRef<S>& P, const SegmentPass<S>& pass, const nn::Vec<S>& dz) const;

  // Baseline variant.
  template <class S>
  BaselineStep<S> baseline_step(const nn::ParamRef<S>& P, const float* image, const nn::Vec<S>& state,
                                const nn::Vec<S>& a_prev, const Carry<S>& carry) const;
  template <class S>
  void baseline_step_backward(const nn::ParamRef<S>& P, const BaselineStep<S>& st, const nn::Vec<S>& daction,
                              Carry<S>& dcarry) const;

  /// Teacher-forced forward over a trajectory (a_prev = ground-truth a*_{t-1}).
  template <class S>
  TrajectoryPass<S> forward(const nn::ParamRef<S>& P, const Trajectory& traj, const InteractionSegment* seg,
                            const PassOptions& opt) const;
  /// Backprop given gradients w.r.t. Z^A, per-step z_obs (may be empty or
  /// shorter than the encoded steps) and predicted actions (rows of dactions).
  template <class S>
  void backward(const nn::ParamRef<S>& P, const TrajectoryPass<S>& pass, const nn::Vec<S>* dz_aff,
                const std::vector<nn::Vec<S>>& dz_obs, const nn::Mat<S>& dactions) const;

 private:
  void check_image(const Trajectory& traj) const;

  ModelConfig config_;
  nn::ParamLayout layout_;
  int h0_ = 0, w0_ = 0, h1_ = 0, w1_ = 0;
  // attention variants
  nn::Conv2d conv1_, conv2_, conv3_;
  nn::Linear top_fc_;
  nn::ConvTranspose2d deconv1_, deconv2_;
  nn::Conv2d post1_, post2_;
  nn::LstmCell lstm_;
  nn::Linear head1_, head2_;
  nn::LstmCell seg_lstm_;
  nn::Linear seg_proj_;
  nn::Conv2d dconv1_, dconv2_;
  nn::Linear dfc1_, dfc2_, dfc3_;
  // baseline
  nn::Linear base_fc1_, base_fc2_;
};

}  // namespace affcue
