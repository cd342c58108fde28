#include <fstream>

#include <gtest/gtest.h>

#include "affcue/attention_export.hpp"
#include "affcue/evaluation.hpp"
#include "affcue/training.hpp"
#include "test_support.hpp"

namespace affcue {
namespace {

namespace fs = std::filesystem;
using testing::throws_kind;

SimConfig small_sim() {
  SimConfig s;
  s.camera = SimConfig::default_camera(16);
  return s;
}

const std::vector<MugSpec>& mugs() {
  static const auto m = generate_mug_catalog(12, 2, small_sim());
  return m;
}

Checkpoint micro_checkpoint(Variant v = Variant::Full) {
  Checkpoint c;
  c.model = ModelConfig::micro(v);
  c.sim = small_sim();
  const auto p = testing::jittered_params(Model(c.model), 5, 0.2);
  c.params.assign(p.data(), p.data() + p.size());
  for (auto& x : c.params) x = static_cast<float>(x);
  return c;
}

TEST(Rollout, ExpertScriptSucceedsOnEveryAffordance) {
  for (const auto& m : mugs()) {
    for (auto c : m.affordable) {
      ScriptPolicy policy(c, small_sim());
      const EpisodeTrace ep = rollout_policy(policy, m, small_sim());
      EXPECT_TRUE(ep.success) << m.id << " " << category_name(c);
      EXPECT_LE(ep.steps_taken, 7);
      EXPECT_EQ(ep.classification, c) << m.id;
      ASSERT_TRUE(ep.attach_step.has_value());
    }
  }
}

TEST(Rollout, ZeroPolicyFails) {
  ZeroPolicy z;
  const EpisodeTrace ep = rollout_policy(z, mugs().front(), small_sim());
  EXPECT_FALSE(ep.success);
  EXPECT_EQ(ep.steps_taken, 7);
  EXPECT_EQ(ep.states.size(), 8u);
  EXPECT_EQ(ep.depths.size(), 8u);
  EXPECT_FALSE(ep.attach_step.has_value());
}

TEST(Rollout, NetworkPolicyIsDeterministic) {
  const Checkpoint c = micro_checkpoint();
  const auto a = rollout_policy(c, mugs()[1]);
  const auto b = rollout_policy(c, mugs()[1]);
  ASSERT_EQ(a.states.size(), b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i], b.states[i]);
  EXPECT_EQ(a.actions, b.actions);
}

TEST(Rollout, NetworkPolicyFeedsBackItsOwnActions) {
  for (Variant v : {Variant::Full, Variant::BaselineBc}) {
    const Checkpoint c = micro_checkpoint(v);
    NetworkPolicy policy(c);
    const auto ep = rollout_policy(policy, mugs()[2], c.sim);
    const auto& rec = policy.records();
    ASSERT_EQ(static_cast<int>(rec.size()), ep.steps_taken);
    EXPECT_TRUE(rec[0].a_prev.isZero(0.0f));
    for (std::size_t t = 1; t < rec.size(); ++t) EXPECT_EQ(rec[t].a_prev, rec[t - 1].output) << t;
    for (std::size_t t = 0; t < rec.size(); ++t) {
      const Eigen::VectorXf executed = policy.model().denormalize_action<float>(rec[t].output);
      EXPECT_EQ(executed.cast<double>(), ep.actions[t]);
      EXPECT_EQ(rec[t].cue.empty(), v == Variant::BaselineBc);
    }
  }
}

TEST(Evaluate, ReportCountsAndJson) {
  ScriptPolicy policy(AffordanceCategory::BodyGrasp, small_sim());
  const EvalReport r = evaluate(policy, mugs(), 20, 0, small_sim());
  EXPECT_EQ(r.n_episodes, 20);
  EXPECT_EQ(r.episodes.size(), 20u);
  EXPECT_EQ(r.success_rate, 1.0);
  int attempts = 0;
  for (const auto& [a, s] : r.per_category) attempts += a;
  EXPECT_EQ(attempts, 20);
  const Json j = r.to_json();
  for (const char* k : {"schema_version", "n_episodes", "successes", "success_rate", "per_category_breakdown",
                        "per_episode"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(j["per_episode"].size(), 20u);

  ZeroPolicy z;
  EXPECT_EQ(evaluate(z, mugs(), 5, 0, small_sim()).success_rate, 0.0);
  EXPECT_TRUE(throws_kind([&] { evaluate(z, mugs(), 0, 0, small_sim()); }, ErrorKind::InvalidArgument));
}

TEST(Evaluate, SameSeedSameMugs) {
  ZeroPolicy z;
  const auto a = evaluate(z, mugs(), 10, 3, small_sim());
  const auto b = evaluate(z, mugs(), 10, 3, small_sim());
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Checkpoint, RoundTripAndImmutableUnderEval) {
  Checkpoint c = micro_checkpoint();
  c.epoch = 7;
  c.eval_success = 0.25;
  c.train = to_json(TrainConfig{});
  const fs::path dir = testing::temp_dir("ckpt");
  save_checkpoint(c, dir);
  const std::string cfg = testing::read_file(dir / "config.json");
  const std::string bin = testing::read_file(dir / "params.bin");
  const Checkpoint back = load_checkpoint(dir);
  EXPECT_EQ(back.params, c.params);
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.epoch, 7);
  EXPECT_EQ(back.eval_success, 0.25);
  evaluate(back, mugs(), 3, 0);
  EXPECT_EQ(testing::read_file(dir / "config.json"), cfg);
  EXPECT_EQ(testing::read_file(dir / "params.bin"), bin);
}

TEST(Checkpoint, MismatchListsDifferingFields) {
  const fs::path dir = testing::temp_dir("ckpt_mm");
  save_checkpoint(micro_checkpoint(), dir);
  ModelConfig other = ModelConfig::micro();
  other.encoder.embed_dim = 16;
  other.decoder.fc_hidden = {8, 9};
  try {
    load_checkpoint(dir, other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CheckpointError);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("embed_dim"), std::string::npos) << msg;
    EXPECT_NE(msg.find("fc_hidden"), std::string::npos) << msg;
  }
  EXPECT_NO_THROW(load_checkpoint(dir, ModelConfig::micro()));
}

TEST(Checkpoint, CorruptFilesRejected) {
  const fs::path dir = testing::temp_dir("ckpt_bad");
  save_checkpoint(micro_checkpoint(), dir);
  std::string bin = testing::read_file(dir / "params.bin");
  std::ofstream(dir / "params.bin", std::ios::binary) << bin.substr(0, bin.size() - 4);
  EXPECT_TRUE(throws_kind([&] { load_checkpoint(dir); }, ErrorKind::CheckpointError));
  EXPECT_TRUE(throws_kind([&] { load_checkpoint(testing::temp_dir("empty")); }, ErrorKind::CheckpointError));
}

TEST(AttentionExport, OneMapPerStep) {
  const Checkpoint c = micro_checkpoint();
  const Model model(c.model);
  const Trajectory t = testing::random_trajectory(8, 16, 16, AffordanceCategory::BodyGrasp, 1);
  const auto maps = attention_for_trajectory(model, c.params, t);
  ASSERT_EQ(maps.size(), 8u);
  const fs::path dir = testing::temp_dir("attn");
  export_attention(maps, dir);
  int f32 = 0, pgm = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    f32 += e.path().extension() == ".f32";
    pgm += e.path().extension() == ".pgm";
  }
  EXPECT_EQ(f32, 8);
  EXPECT_EQ(pgm, 8);
  EXPECT_EQ(read_attention_raw(dir / "attn_003.f32"), maps[2].values);
  EXPECT_EQ(maps[2].step, 3);
  EXPECT_EQ(maps[2].H, 8);
}

TEST(AttentionExport, EpisodeRecordsMatchSteps) {
  const Checkpoint c = micro_checkpoint();
  NetworkPolicy policy(c);
  const auto ep = rollout_policy(policy, mugs()[0], c.sim);
  EXPECT_EQ(static_cast<int>(attention_from_records(policy).size()), ep.steps_taken);
  EXPECT_EQ(ep.depths.size(), ep.states.size());
}

std::string pixels(const std::string& pgm) {
  // P5 header is three whitespace-terminated lines.
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) pos = pgm.find('\n', pos) + 1;
  return pgm.substr(pos);
}

TEST(AttentionExport, GrayscaleNormalization) {
  EXPECT_EQ(pixels(pgm_bytes(std::vector<float>(6, 0.5f), 2, 3)), std::string(6, static_cast<char>(128)));
  const std::string px = pixels(pgm_bytes({0.0f, 0.5f, 1.0f, 0.25f}, 2, 2));
  ASSERT_EQ(px.size(), 4u);
  EXPECT_EQ(static_cast<unsigned char>(px[0]), 0);
  EXPECT_EQ(static_cast<unsigned char>(px[1]), 128);  // 127.5 rounds to even
  EXPECT_EQ(static_cast<unsigned char>(px[2]), 255);
  EXPECT_EQ(static_cast<unsigned char>(px[3]), 64);   // 63.75
  EXPECT_EQ(pgm_bytes({1.0f}, 1, 1).rfind("P5\n1 1\n255\n", 0), 0u);
}

}  // namespace
}  // namespace affcue
