#include "affcue/model.hpp"

#include <algorithm>
#include <cmath>

#include "affcue/error.hpp"

namespace affcue {

using nn::FMap;
using nn::Mat;
using nn::ParamRef;
using nn::Vec;

namespace {

int conv_out(int n, const ConvSpec& c) {
  const int pad = (c.kernel - 1) / 2;
  return (n + 2 * pad - c.kernel) / c.stride + 1;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::ConfigError, what);
}

void check_spec(const ConvSpec& c, const std::string& name) {
  require(c.channels > 0 && c.kernel > 0 && c.stride > 0, name + " needs positive channels, kernel, stride");
}

template <class S>
Vec<S> to_vec(const Eigen::Map<const Eigen::VectorXf>& v) {
  return v.cast<S>();
}

template <class S>
FMap<S> image_map(const float* px, int H, int W) {
  FMap<S> m;
  m.H = H;
  m.W = W;
  m.data = Eigen::Map<const Eigen::Matrix<float, 1, Eigen::Dynamic>>(px, H * W).cast<S>();
  return m;
}

template <class S>
Vec<S> concat(const Vec<S>& a, const Vec<S>& b) {
  Vec<S> out(a.size() + b.size());
  out << a, b;
  return out;
}

template <class S>
Vec<S> flatten(const FMap<S>& m) {
  return Eigen::Map<const Vec<S>>(m.data.data(), m.data.size());
}

template <class S>
FMap<S> unflatten(const Vec<S>& v, int C, int H, int W) {
  FMap<S> m;
  m.H = H;
  m.W = W;
  m.data = Eigen::Map<const Mat<S>>(v.data(), C, static_cast<Eigen::Index>(H) * W);
  return m;
}

template <class S>
void relu_mask(FMap<S>& d, const FMap<S>& y) {
  d.data = nn::relu_backward<S>(y.data, d.data);
}

template <class S>
Vec<S> relu_mask(const Vec<S>& d, const Vec<S>& y) {
  return nn::relu_backward<S>(y, d);
}

template <class S>
Vec<S> relu(Vec<S> v) {
  return v.cwiseMax(S(0));
}

template <class S>
void squash_grip(Vec<S>& a) {
  a[kActionDim - 1] = nn::sigmoid(a[kActionDim - 1]);
}

/// Gradient w.r.t. raw outputs given gradient w.r.t. squashed outputs.
template <class S>
Vec<S> unsquash_grad(const Vec<S>& action, const Vec<S>& da) {
  Vec<S> d = da;
  const S g = action[kActionDim - 1];
  d[kActionDim - 1] *= g * (S(1) - g);
  return d;
}

}  // namespace

void EncoderConfig::validate() const {
  require(embed_dim > 0 && lstm_hidden > 0 && head_hidden > 0 && segment_lstm_hidden > 0,
          "encoder sizes must be positive");
  require(image_height > 0 && image_width > 0, "image size must be positive");
  for (const auto& [c, n] : {std::pair{conv1, "conv1"}, {conv2, "conv2"}, {conv3, "conv3"}, {deconv1, "deconv1"},
                             {deconv2, "deconv2"}, {post_attention_convs[0], "post_attention_convs[0]"},
                             {post_attention_convs[1], "post_attention_convs[1]"}}) {
    check_spec(c, n);
  }
  require(deconv2.channels == 2, "deconv2 must produce exactly 2 channels");
  require(fc_tile_dim == conv3.channels, "fc_tile_dim must equal conv3 channels");
  require(deconv1.kernel == 4 && deconv1.stride == 2, "deconv1 must be (C, 4, 2)");
  require(deconv2.stride == 1 && deconv2.kernel % 2 == 1, "deconv2 must have stride 1 and odd kernel");
  const int h1 = conv_out(image_height, conv1), w1 = conv_out(image_width, conv1);
  const int h3 = conv_out(conv_out(h1, conv2), conv3), w3 = conv_out(conv_out(w1, conv2), conv3);
  require(2 * h3 == h1 && 2 * w3 == w1,
          "attention map " + std::to_string(2 * h3) + "x" + std::to_string(2 * w3) +
              " does not match conv1 output " + std::to_string(h1) + "x" + std::to_string(w1));
}

EncoderConfig EncoderConfig::micro() {
  EncoderConfig c;
  c.embed_dim = 8;
  c.image_height = c.image_width = 16;
  c.conv1 = {2, 5, 2};
  c.conv2 = {2, 3, 2};
  c.conv3 = {2, 3, 1};
  c.fc_tile_dim = 2;
  c.deconv1 = {2, 4, 2};
  c.deconv2 = {2, 3, 1};
  c.post_attention_convs = {{{2, 3, 2}, {2, 3, 2}}};
  c.lstm_hidden = 4;
  c.head_hidden = 8;
  c.segment_lstm_hidden = 4;
  return c;
}

DecoderConfig DecoderConfig::micro() {
  DecoderConfig d;
  d.convs = {{{2, 3, 2}, {2, 3, 2}}};
  d.fc_hidden = {8, 8};
  return d;
}

ModelConfig ModelConfig::micro(Variant v) {
  ModelConfig m;
  m.variant = v;
  m.encoder = EncoderConfig::micro();
  m.decoder = DecoderConfig::micro();
  return m;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NormalTriplet: return "normal-triplet";
    case Variant::NoContrastive: return "no-contrastive";
    case Variant::BaselineBc: return "baseline";
  }
  return "full";
}

Variant variant_from_name(const std::string& name) {
  std::string n = name;
  std::replace(n.begin(), n.end(), '_', '-');
  if (n == "full") return Variant::Full;
  if (n == "normal-triplet") return Variant::NormalTriplet;
  if (n == "no-contrastive") return Variant::NoContrastive;
  if (n == "baseline" || n == "baseline-bc") return Variant::BaselineBc;
  throw Error(ErrorKind::UnknownVariant, "unknown variant '" + name + "'");
}

bool variant_is_contrastive(Variant v) { return v == Variant::Full || v == Variant::NormalTriplet; }

namespace {

Json conv_json(const ConvSpec& c) { return Json::array({c.channels, c.kernel, c.stride}); }
ConvSpec conv_from(const Json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }

}  // namespace

Json to_json(const ModelConfig& c) {
  const auto& e = c.encoder;
  Json enc{{"embed_dim", e.embed_dim},
           {"image_size", Json::array({e.image_height, e.image_width})},
           {"conv1", conv_json(e.conv1)},
           {"conv2", conv_json(e.conv2)},
           {"conv3", conv_json(e.conv3)},
           {"fc_tile_dim", e.fc_tile_dim},
           {"deconv1", conv_json(e.deconv1)},
           {"deconv2", conv_json(e.deconv2)},
           {"post_attention_convs", Json::array({conv_json(e.post_attention_convs[0]),
                                                 conv_json(e.post_attention_convs[1])})},
           {"lstm_hidden", e.lstm_hidden},
           {"head_hidden", e.head_hidden},
           {"segment_lstm_hidden", e.segment_lstm_hidden},
           {"stop_gradient_on_cue", e.stop_gradient_on_cue}};
  Json dec{{"convs", Json::array({conv_json(c.decoder.convs[0]), conv_json(c.decoder.convs[1])})},
           {"fc_hidden", Json::array({c.decoder.fc_hidden[0], c.decoder.fc_hidden[1]})}};
  return Json{{"variant", variant_name(c.variant)}, {"init_seed", c.init_seed},
              {"action_scale", c.action_scale}, {"encoder", enc}, {"decoder", dec}};
}

ModelConfig model_config_from_json(const Json& j) {
  try {
    ModelConfig c;
    c.variant = variant_from_name(j.at("variant").get<std::string>());
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    if (j.contains("action_scale")) c.action_scale = j.at("action_scale").get<std::array<double, 6>>();
    const Json& e = j.at("encoder");
    auto& E = c.encoder;
    E.embed_dim = e.at("embed_dim").get<int>();
    E.image_height = e.at("image_size").at(0).get<int>();
    E.image_width = e.at("image_size").at(1).get<int>();
    E.conv1 = conv_from(e.at("conv1"));
    E.conv2 = conv_from(e.at("conv2"));
    E.conv3 = conv_from(e.at("conv3"));
    E.fc_tile_dim = e.at("fc_tile_dim").get<int>();
    E.deconv1 = conv_from(e.at("deconv1"));
    E.deconv2 = conv_from(e.at("deconv2"));
    E.post_attention_convs = {conv_from(e.at("post_attention_convs").at(0)),
                              conv_from(e.at("post_attention_convs").at(1))};
    E.lstm_hidden = e.at("lstm_hidden").get<int>();
    E.head_hidden = e.at("head_hidden").get<int>();
    E.segment_lstm_hidden = e.at("segment_lstm_hidden").get<int>();
    E.stop_gradient_on_cue = e.at("stop_gradient_on_cue").get<bool>();
    const Json& d = j.at("decoder");
    c.decoder.convs = {conv_from(d.at("convs").at(0)), conv_from(d.at("convs").at(1))};
    c.decoder.fc_hidden = {d.at("fc_hidden").at(0).get<int>(), d.at("fc_hidden").at(1).get<int>()};
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::ConfigError, std::string("malformed model config: ") + ex.what());
  }
}

template <class S>
Mat<S> TrajectoryPass<S>::actions() const {
  const std::size_t n = base.empty() ? dec.size() : base.size();
  Mat<S> out(static_cast<Eigen::Index>(n), kActionDim);
  for (std::size_t t = 0; t < n; ++t) {
    out.row(static_cast<Eigen::Index>(t)) = (base.empty() ? dec[t].action : base[t].action).transpose();
  }
  return out;
}

template <class S>
std::vector<Vec<S>> TrajectoryPass<S>::z_obs() const {
  std::vector<Vec<S>> out;
  for (const auto& e : enc) out.push_back(e.z_obs);
  return out;
}

Model::Model(const ModelConfig& config) : config_(config) {
  const EncoderConfig& E = config_.encoder;
  const DecoderConfig& D = config_.decoder;
  E.validate();
  for (double a : config_.action_scale) {
    if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorKind::ConfigError, "action_scale entries must be positive");
  }
  h0_ = E.image_height;
  w0_ = E.image_width;
  h1_ = conv_out(h0_, E.conv1);
  w1_ = conv_out(w0_, E.conv1);
  auto& L = layout_;
  const int top_in = kStateDim + kActionDim;

  if (config_.variant == Variant::BaselineBc) {
    // conv3 strides by 2 to keep the recurrent input small.
    const ConvSpec c3{E.conv3.channels, E.conv3.kernel, 2};
    conv1_ = nn::Conv2d::make(L, "baseline.conv1", "baseline.vision", 1, E.conv1.channels, E.conv1.kernel, E.conv1.stride);
    conv2_ = nn::Conv2d::make(L, "baseline.conv2", "baseline.vision", E.conv1.channels, E.conv2.channels,
                              E.conv2.kernel, E.conv2.stride);
    conv3_ = nn::Conv2d::make(L, "baseline.conv3", "baseline.vision", E.conv2.channels, c3.channels, c3.kernel,
                              c3.stride);
    top_fc_ = nn::Linear::make(L, "baseline.state_fc", "baseline.state_fc", top_in, c3.channels);
    const int h3 = conv_out(conv_out(h1_, E.conv2), c3), w3 = conv_out(conv_out(w1_, E.conv2), c3);
    lstm_ = nn::LstmCell::make(L, "baseline.lstm", "baseline.lstm", c3.channels * h3 * w3, E.lstm_hidden);
    base_fc1_ = nn::Linear::make(L, "baseline.fc1", "baseline.head", E.lstm_hidden, E.head_hidden);
    base_fc2_ = nn::Linear::make(L, "baseline.fc2", "baseline.head", E.head_hidden, kActionDim, nn::Init::LecunUniform);
    return;
  }

  conv1_ = nn::Conv2d::make(L, "encoder.conv1", "encoder.vision", 1, E.conv1.channels, E.conv1.kernel, E.conv1.stride);
  conv2_ = nn::Conv2d::make(L, "encoder.conv2", "encoder.vision", E.conv1.channels, E.conv2.channels, E.conv2.kernel,
                            E.conv2.stride);
  conv3_ = nn::Conv2d::make(L, "encoder.conv3", "encoder.vision", E.conv2.channels, E.conv3.channels, E.conv3.kernel,
                            E.conv3.stride);
  top_fc_ = nn::Linear::make(L, "encoder.state_fc", "encoder.state_fc", top_in, E.fc_tile_dim);
  deconv1_ = nn::ConvTranspose2d::make(L, "encoder.deconv1", "encoder.attention", E.conv3.channels,
                                       E.deconv1.channels, 4, 2, 1);
  deconv2_ = nn::ConvTranspose2d::make(L, "encoder.deconv2", "encoder.attention", E.deconv1.channels, 2,
                                       E.deconv2.kernel, 1, (E.deconv2.kernel - 1) / 2, nn::Init::LecunUniform);
  const auto& P0 = E.post_attention_convs[0];
  const auto& P1 = E.post_attention_convs[1];
  post1_ = nn::Conv2d::make(L, "encoder.post_conv1", "encoder.post_conv", 1 + E.conv1.channels, P0.channels,
                            P0.kernel, P0.stride);
  post2_ = nn::Conv2d::make(L, "encoder.post_conv2", "encoder.post_conv", P0.channels, P1.channels, P1.kernel,
                            P1.stride);
  const int hp = conv_out(conv_out(h1_, P0), P1), wp = conv_out(conv_out(w1_, P0), P1);
  lstm_ = nn::LstmCell::make(L, "encoder.lstm", "encoder.lstm", P1.channels * hp * wp, E.lstm_hidden);
  head1_ = nn::Linear::make(L, "encoder.head1", "encoder.head", E.lstm_hidden, E.head_hidden);
  head2_ = nn::Linear::make(L, "encoder.head2", "encoder.head", E.head_hidden, E.embed_dim, nn::Init::LecunUniform);

  seg_lstm_ = nn::LstmCell::make(L, "segment.lstm", "segment.lstm", kSegmentInputDim, E.segment_lstm_hidden);
  seg_proj_ = nn::Linear::make(L, "segment.proj", "segment.proj", E.segment_lstm_hidden, E.embed_dim,
                               nn::Init::LecunUniform);

  const int fused_c = E.conv1.channels + kStateDim + E.embed_dim;
  dconv1_ = nn::Conv2d::make(L, "decoder.conv1", "decoder.conv", fused_c, D.convs[0].channels, D.convs[0].kernel,
                             D.convs[0].stride);
  dconv2_ = nn::Conv2d::make(L, "decoder.conv2", "decoder.conv", D.convs[0].channels, D.convs[1].channels,
                             D.convs[1].kernel, D.convs[1].stride);
  const int hq = conv_out(conv_out(h1_, D.convs[0]), D.convs[1]);
  const int wq = conv_out(conv_out(w1_, D.convs[0]), D.convs[1]);
  dfc1_ = nn::Linear::make(L, "decoder.fc1", "decoder.fc", D.convs[1].channels * hq * wq, D.fc_hidden[0]);
  dfc2_ = nn::Linear::make(L, "decoder.fc2", "decoder.fc", D.fc_hidden[0], D.fc_hidden[1]);
  dfc3_ = nn::Linear::make(L, "decoder.fc3", "decoder.fc", D.fc_hidden[1], kActionDim, nn::Init::LecunUniform);
}

template <class S>
Carry<S> Model::fresh_carry() const {
  return {Vec<S>::Zero(config_.encoder.lstm_hidden), Vec<S>::Zero(config_.encoder.lstm_hidden)};
}

template <class S>
EncoderStep<S> Model::encode_step(const ParamRef<S>& P, const float* image, const Vec<S>& state,
                                  const Vec<S>& a_prev, const Carry<S>& carry) const {
  if (!has_attention()) throw Error(ErrorKind::ConfigError, "baseline model has no attention encoder");
  if (state.size() != kStateDim || a_prev.size() != kActionDim) {
    throw Error(ErrorKind::ShapeError, "encode_step expects an 8-dim state and 7-dim previous action");
  }
  EncoderStep<S> st;
  st.image = image_map<S>(image, h0_, w0_);
  st.conv1 = conv1_.forward(P, st.image, st.cols1);
  nn::relu_inplace(st.conv1.data);
  st.conv2 = conv2_.forward(P, st.conv1, st.cols2);
  nn::relu_inplace(st.conv2.data);
  st.conv3 = conv3_.forward(P, st.conv2, st.cols3);
  nn::relu_inplace(st.conv3.data);

  st.top_in = concat(state, a_prev);
  st.top_out = relu(top_fc_.forward(P, st.top_in));
  st.fused3 = st.conv3;
  st.fused3.data.colwise() += st.top_out;

  st.deconv1 = deconv1_.forward(P, st.fused3);
  nn::relu_inplace(st.deconv1.data);
  st.logits = deconv2_.forward(P, st.deconv1);
  const Eigen::Index n = st.logits.data.cols();
  st.softmax.resize(2, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const S l0 = st.logits.data(0, k), l1 = st.logits.data(1, k);
    const S m = std::max(l0, l1);
    const S e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    st.softmax(0, k) = e0 / (e0 + e1);
    st.softmax(1, k) = e1 / (e0 + e1);
  }

  st.cat.H = h1_;
  st.cat.W = w1_;
  st.cat.data.resize(1 + st.conv1.channels(), n);
  st.cat.data.row(0) = st.softmax.row(0);
  st.cat.data.bottomRows(st.conv1.channels()) = st.conv1.data;
  st.post1 = post1_.forward(P, st.cat, st.cols_p1);
  nn::relu_inplace(st.post1.data);
  st.post2 = post2_.forward(P, st.post1, st.cols_p2);
  nn::relu_inplace(st.post2.data);

  lstm_.forward(P, flatten(st.post2), carry.h, carry.c, st.lstm, st.carry.h, st.carry.c);
  st.lstm_h = st.carry.h;
  st.head1 = relu(head1_.forward(P, st.lstm_h));
  st.z_obs = head2_.forward(P, st.head1);
  return st;
}

template <class S>
void Model::encode_step_backward(const ParamRef<S>& P, const EncoderStep<S>& st, const Vec<S>& dz,
                                 const DecoderInputGrad<S>* dec, Carry<S>& dcarry) const {
  Vec<S> dz_total = dz;
  if (dec) dz_total += dec->dz_obs;
  const Vec<S> dhead1 = relu_mask(head2_.backward(P, st.head1, dz_total), st.head1);
  const Vec<S> dh = head1_.backward(P, st.lstm_h, dhead1) + dcarry.h;
  Vec<S> dflat, dh_prev, dc_prev;
  lstm_.backward(P, st.lstm, dh, dcarry.c, &dflat, dh_prev, dc_prev);
  dcarry.h = std::move(dh_prev);
  dcarry.c = std::move(dc_prev);

  FMap<S> dpost2 = unflatten(dflat, st.post2.channels(), st.post2.H, st.post2.W);
  relu_mask(dpost2, st.post2);
  FMap<S> dpost1 = post2_.backward(P, st.cols_p2, st.post1.H, st.post1.W, dpost2, true);
  relu_mask(dpost1, st.post1);
  const FMap<S> dcat = post1_.backward(P, st.cols_p1, st.cat.H, st.cat.W, dpost1, true);

  const int c1 = st.conv1.channels();
  Eigen::Matrix<S, 1, Eigen::Dynamic> dcue = dcat.data.row(0);
  FMap<S> dconv1;
  dconv1.H = h1_;
  dconv1.W = w1_;
  dconv1.data = dcat.data.bottomRows(c1);
  if (dec) {
    if (!config_.encoder.stop_gradient_on_cue) dcue += dec->dcue.transpose();
    dconv1.data += dec->dconv1;
  }

  FMap<S> dlogits;
  dlogits.H = h1_;
  dlogits.W = w1_;
  dlogits.data.resize(2, dcue.size());
  const auto pq = (st.softmax.row(0).array() * st.softmax.row(1).array()).eval();
  dlogits.data.row(0) = (dcue.array() * pq).matrix();
  dlogits.data.row(1) = -dlogits.data.row(0);

  FMap<S> ddeconv1 = deconv2_.backward(P, st.deconv1, dlogits, true);
  relu_mask(ddeconv1, st.deconv1);
  const FMap<S> dfused3 = deconv1_.backward(P, st.fused3, ddeconv1, true);

  FMap<S> dconv3 = dfused3;
  relu_mask(dconv3, st.conv3);
  const Vec<S> dtop = relu_mask(Vec<S>(dfused3.data.rowwise().sum()), st.top_out);
  top_fc_.backward(P, st.top_in, dtop);

  FMap<S> dconv2 = conv3_.backward(P, st.cols3, st.conv2.H, st.conv2.W, dconv3, true);
  relu_mask(dconv2, st.conv2);
  dconv1.data += conv2_.backward(P, st.cols2, st.conv1.H, st.conv1.W, dconv2, true).data;
  relu_mask(dconv1, st.conv1);
  conv1_.backward(P, st.cols1, h0_, w0_, dconv1, false);
}

template <class S>
DecoderStep<S> Model::decode_from(const ParamRef<S>& P, const Vec<S>& state, const FMap<S>& conv1,
                                  const Vec<S>& cue, const Vec<S>& z_obs) const {
  if (!has_attention()) throw Error(ErrorKind::ConfigError, "baseline model has no attention decoder");
  if (conv1.H != h1_ || conv1.W != w1_ || cue.size() != conv1.data.cols() ||
      z_obs.size() != config_.encoder.embed_dim || state.size() != kStateDim) {
    throw Error(ErrorKind::ShapeError, "decoder inputs do not match the paired encoder");
  }
  DecoderStep<S> st;
  const int c1 = conv1.channels();
  const Vec<S> sz = concat(state, z_obs);
  st.fused.H = h1_;
  st.fused.W = w1_;
  st.fused.data.resize(c1 + sz.size(), conv1.data.cols());
  st.fused.data.topRows(c1) = conv1.data.array().rowwise() * cue.transpose().array();
  st.fused.data.bottomRows(sz.size()).colwise() = sz;
  st.y1 = dconv1_.forward(P, st.fused, st.cols1);
  nn::relu_inplace(st.y1.data);
  st.y2 = dconv2_.forward(P, st.y1, st.cols2);
  nn::relu_inplace(st.y2.data);
  st.flat = flatten(st.y2);
  st.h1 = relu(dfc1_.forward(P, st.flat));
  st.h2 = relu(dfc2_.forward(P, st.h1));
  st.action = dfc3_.forward(P, st.h2);
  squash_grip(st.action);
  return st;
}

template <class S>
DecoderStep<S> Model::decode_action(const ParamRef<S>& P, const Vec<S>& state, const EncoderStep<S>& enc) const {
  return decode_from(P, state, enc.conv1, enc.aff_cue(), enc.z_obs);
}

template <class S>
DecoderInputGrad<S> Model::decode_backward(const ParamRef<S>& P, const DecoderStep<S>& st, const FMap<S>& conv1,
                                           const Vec<S>& cue, const Vec<S>& daction) const {
  const Vec<S> draw = unsquash_grad(st.action, daction);
  const Vec<S> dh2 = relu_mask(dfc3_.backward(P, st.h2, draw), st.h2);
  const Vec<S> dh1 = relu_mask(dfc2_.backward(P, st.h1, dh2), st.h1);
  FMap<S> dy2 = unflatten(dfc1_.backward(P, st.flat, dh1), st.y2.channels(), st.y2.H, st.y2.W);
  relu_mask(dy2, st.y2);
  FMap<S> dy1 = dconv2_.backward(P, st.cols2, st.y1.H, st.y1.W, dy2, true);
  relu_mask(dy1, st.y1);
  const FMap<S> dfused = dconv1_.backward(P, st.cols1, h1_, w1_, dy1, true);

  const int c1 = conv1.channels();
  const int nsz = static_cast<int>(st.fused.data.rows()) - c1;
  DecoderInputGrad<S> g;
  const Vec<S> dsz = dfused.data.bottomRows(nsz).rowwise().sum();
  g.dz_obs = dsz.tail(config_.encoder.embed_dim);
  const auto datt = dfused.data.topRows(c1);
  g.dcue = (datt.array() * conv1.data.array()).colwise().sum().transpose();
  g.dconv1 = datt.array().rowwise() * cue.transpose().array();
  return g;
}

template <class S>
SegmentPass<S> Model::encode_segment(const ParamRef<S>& P, const InteractionSegment& seg) const {
  if (!has_attention()) throw Error(ErrorKind::ConfigError, "baseline model has no segment encoder");
  if (seg.size() == 0 || seg.prev_actions.size() != seg.states.size()) {
    throw Error(ErrorKind::ShapeError, "segment must be nonempty with one previous action per state");
  }
  const int H = config_.encoder.segment_lstm_hidden;
  SegmentPass<S> pass;
  Vec<S> h = Vec<S>::Zero(H), c = Vec<S>::Zero(H);
  for (std::size_t k = 0; k < seg.size(); ++k) {
    if (seg.states[k].size() != kStateDim || seg.prev_actions[k].size() != kActionDim) {
      throw Error(ErrorKind::ShapeError, "segment entries must be 8-dim states and 7-dim actions");
    }
    const Vec<S> x = concat<S>(seg.states[k].cast<S>(), normalize_action<S>(seg.prev_actions[k].cast<S>()));
    pass.steps.emplace_back();
    Vec<S> h2, c2;
    seg_lstm_.forward(P, x, h, c, pass.steps.back(), h2, c2);
    h = std::move(h2);
    c = std::move(c2);
  }
  pass.h_final = h;
  pass.z_aff = seg_proj_.forward(P, h);
  return pass;
}

template <class S>
void Model::encode_segment_backward(const ParamRef<S>& P, const SegmentPass<S>& pass, const Vec<S>& dz) const {
  Vec<S> dh = seg_proj_.backward(P, pass.h_final, dz);
  Vec<S> dc = Vec<S>::Zero(dh.size());
  for (auto it = pass.steps.rbegin(); it != pass.steps.rend(); ++it) {
    Vec<S> dh_prev, dc_prev;
    seg_lstm_.backward(P, *it, dh, dc, static_cast<Vec<S>*>(nullptr), dh_prev, dc_prev);
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }
}

template <class S>
BaselineStep<S> Model::baseline_step(const ParamRef<S>& P, const float* image, const Vec<S>& state,
                                     const Vec<S>& a_prev, const Carry<S>& carry) const {
  if (has_attention()) throw Error(ErrorKind::ConfigError, "baseline_step needs the baseline variant");
  BaselineStep<S> st;
  st.image = image_map<S>(image, h0_, w0_);
  st.conv1 = conv1_.forward(P, st.image, st.cols1);
  nn::relu_inplace(st.conv1.data);
  st.conv2 = conv2_.forward(P, st.conv1, st.cols2);
  nn::relu_inplace(st.conv2.data);
  st.conv3 = conv3_.forward(P, st.conv2, st.cols3);
  nn::relu_inplace(st.conv3.data);
  st.top_in = concat(state, a_prev);
  st.top_out = relu(top_fc_.forward(P, st.top_in));
  FMap<S> fused = st.conv3;
  fused.data.colwise() += st.top_out;
  st.flat = flatten(fused);
  lstm_.forward(P, st.flat, carry.h, carry.c, st.lstm, st.carry.h, st.carry.c);
  st.lstm_h = st.carry.h;
  st.head1 = relu(base_fc1_.forward(P, st.lstm_h));
  st.action = base_fc2_.forward(P, st.head1);
  squash_grip(st.action);
  return st;
}

template <class S>
void Model::baseline_step_backward(const ParamRef<S>& P, const BaselineStep<S>& st, const Vec<S>& daction,
                                   Carry<S>& dcarry) const {
  const Vec<S> draw = unsquash_grad(st.action, daction);
  const Vec<S> dhead1 = relu_mask(base_fc2_.backward(P, st.head1, draw), st.head1);
  const Vec<S> dh = base_fc1_.backward(P, st.lstm_h, dhead1) + dcarry.h;
  Vec<S> dflat, dh_prev, dc_prev;
  lstm_.backward(P, st.lstm, dh, dcarry.c, &dflat, dh_prev, dc_prev);
  dcarry.h = std::move(dh_prev);
  dcarry.c = std::move(dc_prev);
  const FMap<S> dfused = unflatten(dflat, st.conv3.channels(), st.conv3.H, st.conv3.W);
  FMap<S> dconv3 = dfused;
  relu_mask(dconv3, st.conv3);
  top_fc_.backward(P, st.top_in, relu_mask(Vec<S>(dfused.data.rowwise().sum()), st.top_out));
  FMap<S> dconv2 = conv3_.backward(P, st.cols3, st.conv2.H, st.conv2.W, dconv3, true);
  relu_mask(dconv2, st.conv2);
  FMap<S> dconv1 = conv2_.backward(P, st.cols2, st.conv1.H, st.conv1.W, dconv2, true);
  relu_mask(dconv1, st.conv1);
  conv1_.backward(P, st.cols1, h0_, w0_, dconv1, false);
}

void Model::check_image(const Trajectory& traj) const {
  if (traj.H != h0_ || traj.W != w0_) {
    throw Error(ErrorKind::ShapeError, "trajectory images are " + std::to_string(traj.H) + "x" +
                                           std::to_string(traj.W) + " but the model expects " +
                                           std::to_string(h0_) + "x" + std::to_string(w0_));
  }
}

template <class S>
TrajectoryPass<S> Model::forward(const ParamRef<S>& P, const Trajectory& traj, const InteractionSegment* seg,
                                 const PassOptions& opt) const {
  check_image(traj);
  if (opt.encoder_steps > traj.T || opt.decoder_steps > traj.T - 1) {
    throw Error(ErrorKind::ShapeError, "requested more steps than the trajectory holds");
  }
  TrajectoryPass<S> pass;
  const Vec<S> zero_action = Vec<S>::Zero(kActionDim);
  auto a_prev = [&](int t) { return t == 0 ? zero_action : normalize_action<S>(to_vec<S>(traj.action_row(t - 1))); };
  Carry<S> carry = fresh_carry<S>();
  if (!has_attention()) {
    for (int t = 0; t < opt.decoder_steps; ++t) {
      pass.base.push_back(baseline_step(P, traj.frame(t), to_vec<S>(traj.state_row(t)), a_prev(t), carry));
      carry = pass.base.back().carry;
    }
    return pass;
  }
  const int n_enc = std::max(opt.encoder_steps, opt.decoder_steps);
  for (int t = 0; t < n_enc; ++t) {
    pass.enc.push_back(encode_step(P, traj.frame(t), to_vec<S>(traj.state_row(t)), a_prev(t), carry));
    carry = pass.enc.back().carry;
    if (t < opt.decoder_steps) pass.dec.push_back(decode_action(P, to_vec<S>(traj.state_row(t)), pass.enc.back()));
  }
  if (opt.segment) {
    if (!seg) throw Error(ErrorKind::ShapeError, "segment encoding requested without a segment");
    pass.seg = encode_segment(P, *seg);
  }
  return pass;
}

template <class S>
void Model::backward(const ParamRef<S>& P, const TrajectoryPass<S>& pass, const Vec<S>* dz_aff,
                     const std::vector<Vec<S>>& dz_obs, const Mat<S>& dactions) const {
  Carry<S> dcarry = fresh_carry<S>();
  if (!has_attention()) {
    for (int t = static_cast<int>(pass.base.size()) - 1; t >= 0; --t) {
      baseline_step_backward(P, pass.base[t], Vec<S>(dactions.row(t).transpose()), dcarry);
    }
    return;
  }
  if (dz_aff && pass.seg) encode_segment_backward(P, *pass.seg, *dz_aff);
  const Vec<S> zero_z = Vec<S>::Zero(config_.encoder.embed_dim);
  for (int t = static_cast<int>(pass.enc.size()) - 1; t >= 0; --t) {
    const EncoderStep<S>& enc = pass.enc[t];
    const Vec<S>& dz = t < static_cast<int>(dz_obs.size()) ? dz_obs[t] : zero_z;
    if (t < static_cast<int>(pass.dec.size())) {
      const DecoderInputGrad<S> g =
          decode_backward(P, pass.dec[t], enc.conv1, enc.aff_cue(), Vec<S>(dactions.row(t).transpose()));
      encode_step_backward(P, enc, dz, &g, dcarry);
    } else {
      encode_step_backward<S>(P, enc, dz, nullptr, dcarry);
    }
  }
}

#define AFFCUE_MODEL_INSTANTIATE(S)                                                                           \
  template struct TrajectoryPass<S>;                                                                          \
  template Carry<S> Model::fresh_carry<S>() const;                                                            \
  template EncoderStep<S> Model::encode_step<S>(const ParamRef<S>&, const float*, const Vec<S>&,              \
                                                const Vec<S>&, const Carry<S>&) const;                        \
  template void Model::encode_step_backward<S>(const ParamRef<S>&, const EncoderStep<S>&, const Vec<S>&,      \
                                               const DecoderInputGrad<S>*, Carry<S>&) const;                  \
  template DecoderStep<S> Model::decode_action<S>(const ParamRef<S>&, const Vec<S>&, const EncoderStep<S>&)   \
      const;                                                                                                  \
  template DecoderStep<S> Model::decode_from<S>(const ParamRef<S>&, const Vec<S>&, const FMap<S>&,            \
                                                const Vec<S>&, const Vec<S>&) const;                          \
  template DecoderInputGrad<S> Model::decode_backward<S>(const ParamRef<S>&, const DecoderStep<S>&,           \
                                                         const FMap<S>&, const Vec<S>&, const Vec<S>&) const; \
  template SegmentPass<S> Model::encode_segment<S>(const ParamRef<S>&, const InteractionSegment&) const;      \
  template void Model::encode_segment_backward<S>(const ParamRef<S>&, const SegmentPass<S>&, const Vec<S>&)   \
      const;                                                                                                  \
  template BaselineStep<S> Model::baseline_step<S>(const ParamRef<S>&, const float*, const Vec<S>&,           \
                                                   const Vec<S>&, const Carry<S>&) const;                     \
  template void Model::baseline_step_backward<S>(const ParamRef<S>&, const BaselineStep<S>&, const Vec<S>&,   \
                                                 Carry<S>&) const;                                            \
  template TrajectoryPass<S> Model::forward<S>(const ParamRef<S>&, const Trajectory&,                         \
                                               const InteractionSegment*, const PassOptions&) const;          \
  template void Model::backward<S>(const ParamRef<S>&, const TrajectoryPass<S>&, const Vec<S>*,               \
                                   const std::vector<Vec<S>>&, const Mat<S>&) const;

AFFCUE_MODEL_INSTANTIATE(float)
AFFCUE_MODEL_INSTANTIATE(double)

}  // namespace affcue
