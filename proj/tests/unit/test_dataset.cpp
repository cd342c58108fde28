#include <map>

#include <gtest/gtest.h>

#include "affcue/dataset.hpp"
#include "test_support.hpp"

namespace affcue {
namespace {

using testing::throws_kind;

constexpr std::size_t kHeaderBytes = 30;

std::vector<AffordanceCategory> cats_9_9_9() {
  std::vector<AffordanceCategory> c;
  for (auto cat : kAllCategories) c.insert(c.end(), 9, cat);
  return c;
}

TEST(TrajectoryIo, RoundTripIsBitExact) {
  Trajectory t = testing::random_trajectory(5, 7, 6, AffordanceCategory::HandleFrontBack, 3);
  t.gt_segment = std::pair{2, 4};
  const auto dir = testing::temp_dir("traj");
  save_trajectory(t, dir / "rand_3.afft");
  // The file carries neither id nor mug id: id is the file stem, mug id lives in the manifest.
  Trajectory expected = t;
  expected.mug_id.clear();
  EXPECT_EQ(load_trajectory(dir / "rand_3.afft"), expected);

  t.gt_segment.reset();
  expected = t;
  expected.id.clear();
  expected.mug_id.clear();
  EXPECT_EQ(decode_trajectory(encode_trajectory(t)), expected);
}

TEST(TrajectoryIo, WrongMagic) {
  auto bytes = encode_trajectory(testing::random_trajectory(2, 2, 2, AffordanceCategory::BodyGrasp, 1));
  bytes[0] = 'X';
  EXPECT_TRUE(throws_kind([&] { decode_trajectory(bytes); }, ErrorKind::FormatError));
}

TEST(TrajectoryIo, TruncatedDepthReportsOffset) {
  auto bytes = encode_trajectory(testing::random_trajectory(3, 4, 4, AffordanceCategory::BodyGrasp, 1));
  bytes.resize(kHeaderBytes + 10);
  try {
    decode_trajectory(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FormatError);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("depth block"), std::string::npos) << msg;
    EXPECT_NE(msg.find("byte offset 30"), std::string::npos) << msg;
  }
}

TEST(TrajectoryIo, TrailingBytesRejected) {
  auto bytes = encode_trajectory(testing::random_trajectory(2, 2, 2, AffordanceCategory::BodyGrasp, 1));
  bytes.push_back(0);
  EXPECT_TRUE(throws_kind([&] { decode_trajectory(bytes); }, ErrorKind::FormatError));
}

TEST(TrajectoryIo, MissingFileIsIoError) {
  EXPECT_TRUE(throws_kind([] { load_trajectory("/nonexistent/x.afft"); }, ErrorKind::IOError));
}

std::vector<Pose6> static_trace(int T) { return std::vector<Pose6>(static_cast<std::size_t>(T), Pose6::Zero()); }

TEST(InteractionSegment, LiftOnsetBounds) {
  auto trace = static_trace(8);
  for (int t = 6; t <= 8; ++t) trace[t - 1][2] = 0.02 * (t - 5);
  EXPECT_EQ(detect_interaction_bounds(trace), (std::pair{6, 8}));

  const Trajectory tr = testing::random_trajectory(8, 2, 2, AffordanceCategory::BodyGrasp, 2);
  const InteractionSegment seg = extract_interaction_segment(tr, trace);
  ASSERT_EQ(seg.size(), 3u);
  for (int t = 6; t <= 8; ++t) {
    EXPECT_EQ(seg.states[t - 6], tr.state_row(t - 1).cast<double>());
    EXPECT_EQ(seg.prev_actions[t - 6], tr.action_row(t - 2).cast<double>());
  }
}

TEST(InteractionSegment, RotationOnlyMotionCounts) {
  auto trace = static_trace(6);
  trace[3][5] = 0.01;
  trace[4][5] = 0.01;
  trace[5][5] = 0.01;
  EXPECT_EQ(detect_interaction_bounds(trace), (std::pair{4, 4}));
}

TEST(InteractionSegment, StaticTraceHasNoInteraction) {
  EXPECT_TRUE(throws_kind([] { detect_interaction_bounds(static_trace(8)); }, ErrorKind::NoInteraction));
}

TEST(InteractionSegment, SubThresholdMotionHasNoInteraction) {
  auto trace = static_trace(8);
  for (int t = 0; t < 8; ++t) trace[t][0] = 1e-6 * t;
  EXPECT_TRUE(throws_kind([&] { detect_interaction_bounds(trace, {1e-4, 1e-3}); }, ErrorKind::NoInteraction));
}

TEST(InteractionSegment, FirstStepUsesDummyAction) {
  const Trajectory tr = testing::random_trajectory(4, 2, 2, AffordanceCategory::BodyGrasp, 5);
  const auto seg = segment_from_bounds(tr, {1, 2});
  EXPECT_EQ(seg.prev_actions[0], Eigen::VectorXd::Zero(kActionDim));
  EXPECT_TRUE(throws_kind([&] { segment_from_bounds(tr, {3, 5}); }, ErrorKind::ShapeError));
}

TEST(DummyAction, FirstRowIsZero) {
  const Trajectory tr = testing::random_trajectory(5, 2, 2, AffordanceCategory::BodyGrasp, 6);
  const Eigen::MatrixXd a = prepend_dummy_action(tr);
  ASSERT_EQ(a.rows(), 5);
  EXPECT_EQ(a.row(0), Eigen::RowVectorXd::Zero(kActionDim));
  for (int t = 1; t < 5; ++t) EXPECT_EQ(a.row(t).transpose(), tr.action_row(t - 1).cast<double>());
}

TEST(Triplets, InvariantsAndDeterminism) {
  const auto c = cats_9_9_9();
  const TripletBatch b = sample_triplets(c, 8, 0);
  ASSERT_EQ(b.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NE(b.anchors[i], b.positives[i]);
    EXPECT_EQ(c[b.anchors[i]], c[b.positives[i]]);
    EXPECT_NE(c[b.anchors[i]], c[b.negatives[i]]);
  }
  const TripletBatch again = sample_triplets(c, 8, 0);
  EXPECT_EQ(b.anchors, again.anchors);
  EXPECT_EQ(b.positives, again.positives);
  EXPECT_EQ(b.negatives, again.negatives);
}

TEST(Triplets, SingleCategoryIsInsufficient) {
  const std::vector<AffordanceCategory> c(5, AffordanceCategory::BodyGrasp);
  EXPECT_TRUE(throws_kind([&] { sample_triplets(c, 4, 0); }, ErrorKind::InsufficientData));
}

TEST(Triplets, NegativeCategoryFrequencyIsUniform) {
  const auto c = cats_9_9_9();
  const TripletBatch b = sample_triplets(c, 10000, 17);
  std::map<std::pair<AffordanceCategory, AffordanceCategory>, int> pair;
  std::map<AffordanceCategory, int> anchors;
  for (std::size_t i = 0; i < b.size(); ++i) {
    ++anchors[c[b.anchors[i]]];
    ++pair[{c[b.anchors[i]], c[b.negatives[i]]}];
  }
  for (auto a : kAllCategories) {
    EXPECT_NEAR(anchors[a] / 10000.0, 1.0 / 3.0, 0.05);
    for (auto n : kAllCategories) {
      if (a == n) continue;
      EXPECT_NEAR(static_cast<double>(pair[{a, n}]) / anchors[a], 0.5, 0.05);
    }
  }
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto d = testing::small_dataset(16, 9, 2, 1);
  const auto dir = testing::temp_dir("dsrt");
  save_dataset(d.data, dir);
  const Dataset back = load_dataset(dir);
  ASSERT_EQ(back.size(), d.data.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.trajectories[i], d.data.trajectories[i]);
    EXPECT_EQ(back.mug_traces[i], d.data.mug_traces[i]);
  }
  EXPECT_EQ(back.sim.camera.width, 16);
}

}  // namespace
}  // namespace affcue
