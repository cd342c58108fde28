#include <cmath>

#include <gtest/gtest.h>

#include "affcue/rng.hpp"
#include "affcue/training.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace affcue {
namespace {

using nn::Vec;
using testing::RefMember;
using testing::RVec;

RVec random_rvec(Rng& r, int n, double scale = 1.0) {
  RVec v(static_cast<std::size_t>(n));
  for (auto& x : v) x = r.uniform(-scale, scale);
  return v;
}

Vec<double> as_vec(const RVec& v) { return Eigen::Map<const Vec<double>>(v.data(), static_cast<Eigen::Index>(v.size())); }

EmbeddingList<double> as_list(const std::vector<RVec>& l) {
  EmbeddingList<double> out;
  for (const auto& v : l) out.push_back(as_vec(v));
  return out;
}

RefMember random_member(Rng& r, int dim, int T) {
  RefMember m{random_rvec(r, dim), {}};
  for (int t = 0; t < T; ++t) m.z_obs.push_back(random_rvec(r, dim));
  return m;
}

TEST(TripletLoss, EqualEmbeddingsGiveNMargin) {
  const EmbeddingList<double> A(5, Vec<double>::Ones(4));
  EXPECT_EQ(triplet_loss(A, A, A, 0.7), 5 * 0.7);
}

TEST(TripletLoss, ActiveHingeGivesZero) {
  const double M = 1.0;
  const Vec<double> a = Vec<double>::Zero(3);
  Vec<double> n = Vec<double>::Zero(3);
  n[0] = std::sqrt(M + 1);  // |a - n|^2 = M + 1
  EXPECT_NEAR(triplet_loss<double>({a}, {a}, {n}, M), 0.0, 1e-15);
}

TEST(TripletLoss, ShapeMismatchRejected) {
  const EmbeddingList<double> A(2, Vec<double>::Zero(3)), B(3, Vec<double>::Zero(3));
  EXPECT_TRUE(testing::throws_kind([&] { triplet_loss(A, A, B, 1.0); }, ErrorKind::ShapeError));
}

TEST(TripletLoss, MatchesScalarReference) {
  Rng r(1);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(r.uniform_index(6));
    std::vector<RVec> A, P, N;
    for (int i = 0; i < n; ++i) {
      A.push_back(random_rvec(r, 32, 0.3));
      P.push_back(random_rvec(r, 32, 0.3));
      N.push_back(random_rvec(r, 32, 0.3));
    }
    const double M = r.uniform(0.1, 2.0);
    const double ref = testing::ref_triplet(A, P, N, M);
    ASSERT_NEAR(triplet_loss(as_list(A), as_list(P), as_list(N), M), ref, 1e-9 * std::max(1.0, ref));
  }
}

TEST(TripletLoss, NonDecreasingInMargin) {
  Rng r(2);
  std::vector<RVec> A, P, N;
  for (int i = 0; i < 6; ++i) {
    A.push_back(random_rvec(r, 8));
    P.push_back(random_rvec(r, 8));
    N.push_back(random_rvec(r, 8));
  }
  double prev = -1;
  for (double M = 0.0; M < 5.0; M += 0.25) {
    const double l = triplet_loss(as_list(A), as_list(P), as_list(N), M);
    EXPECT_GE(l, prev);
    prev = l;
  }
}

TEST(TripletHinge, GradientMatchesFiniteDifference) {
  Rng r(3);
  for (int trial = 0; trial < 20; ++trial) {
    Vec<double> a = as_vec(random_rvec(r, 5)), p = as_vec(random_rvec(r, 5)), n = as_vec(random_rvec(r, 5));
    const double M = 3.0;  // keep the hinge active
    Vec<double> da = Vec<double>::Zero(5), dp = da, dn = da;
    if (triplet_hinge(a, p, n, M, 1.0, &da, &dp, &dn) <= 0) continue;
    const double h = 1e-6;
    for (int i = 0; i < 5; ++i) {
      Vec<double> ap = a, am = a;
      ap[i] += h;
      am[i] -= h;
      EXPECT_NEAR(da[i], (triplet_hinge(ap, p, n, M) - triplet_hinge(am, p, n, M)) / (2 * h), 1e-6);
      Vec<double> np = n, nm = n;
      np[i] += h;
      nm[i] -= h;
      EXPECT_NEAR(dn[i], (triplet_hinge(a, p, np, M) - triplet_hinge(a, p, nm, M)) / (2 * h), 1e-6);
    }
  }
}

TEST(CoupledLoss, EqualEmbeddingsGiveFullMargin) {
  const int T = 8, N = 4;
  const double M = 1.5;
  const RefMember m{RVec(6, 0.25), std::vector<RVec>(T, RVec(6, 0.25))};
  const std::vector<MemberEmbedding<double>> all(N, testing::to_member(m));
  EXPECT_EQ(coupled_triplet_loss(all, all, all, M), N * (1 + T) * M);
  EXPECT_EQ(coupled_triplet_loss(all, all, all, M, CouplingDirection::AnchorObservation), N * (1 + T) * M);
}

TEST(CoupledLoss, ZeroStepsReducesToTriplet) {
  Rng r(4);
  std::vector<MemberEmbedding<double>> A, P, N;
  EmbeddingList<double> a, p, n;
  for (int i = 0; i < 5; ++i) {
    A.push_back(testing::to_member(random_member(r, 6, 0)));
    P.push_back(testing::to_member(random_member(r, 6, 0)));
    N.push_back(testing::to_member(random_member(r, 6, 0)));
    a.push_back(A.back().z_aff);
    p.push_back(P.back().z_aff);
    n.push_back(N.back().z_aff);
  }
  EXPECT_EQ(coupled_triplet_loss(A, P, N, 1.0), triplet_loss(a, p, n, 1.0));
}

TEST(CoupledLoss, MatchesScalarReferenceBothDirections) {
  Rng r(5);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(r.uniform_index(4));
    const int T = 1 + static_cast<int>(r.uniform_index(8));
    std::vector<RefMember> A, P, N;
    for (int i = 0; i < n; ++i) {
      A.push_back(random_member(r, 8, T));
      P.push_back(random_member(r, 8, T));
      N.push_back(random_member(r, 8, T));
    }
    std::vector<MemberEmbedding<double>> a, p, nn;
    for (int i = 0; i < n; ++i) {
      a.push_back(testing::to_member(A[i]));
      p.push_back(testing::to_member(P[i]));
      nn.push_back(testing::to_member(N[i]));
    }
    for (bool obs : {false, true}) {
      const double ref = testing::ref_coupled(A, P, N, 1.0, obs);
      const auto dir = obs ? CouplingDirection::AnchorObservation : CouplingDirection::AnchorAffordance;
      ASSERT_NEAR(coupled_triplet_loss(a, p, nn, 1.0, dir), ref, 1e-9 * std::max(1.0, ref));
    }
  }
}

TEST(CoupledLoss, ThroughEncoderMatchesScalarReference) {
  const Model model(ModelConfig::micro());
  const Vec<double> p = testing::jittered_params(model, 2, 0.3);
  const nn::ParamRef<double> P{&model.layout(), p.data(), nullptr};
  std::vector<Trajectory> trajs;
  std::vector<InteractionSegment> segs;
  for (int i = 0; i < 6; ++i) {
    trajs.push_back(testing::random_trajectory(3, 16, 16, kAllCategories[i % 3], 100 + i));
    segs.push_back(segment_from_bounds(trajs.back(), {2, 3}));
  }
  std::vector<AffordanceCategory> cats;
  for (const auto& t : trajs) cats.push_back(t.category);
  const TripletBatch b = sample_triplets(cats, 4, 3);
  std::vector<RefMember> A, Pp, N;
  for (std::size_t i = 0; i < b.size(); ++i) {
    A.push_back(testing::ref_embeddings(model, P, trajs[b.anchors[i]], segs[b.anchors[i]]));
    Pp.push_back(testing::ref_embeddings(model, P, trajs[b.positives[i]], segs[b.positives[i]]));
    N.push_back(testing::ref_embeddings(model, P, trajs[b.negatives[i]], segs[b.negatives[i]]));
  }
  for (double M : {0.01, 1.0, 5.0}) {
    const double ref = testing::ref_coupled(A, Pp, N, M);
    EXPECT_NEAR(coupled_triplet_loss(model, P, trajs, segs, b, M), ref, 1e-9 * std::max(1.0, ref));
  }
}

TEST(StepTriplet, PairsByStepIndex) {
  Rng r(6);
  std::vector<RVec> A, P, N;
  for (int t = 0; t < 5; ++t) {
    A.push_back(random_rvec(r, 4));
    P.push_back(random_rvec(r, 4));
    N.push_back(random_rvec(r, 4));
  }
  EXPECT_NEAR(step_triplet_term(as_list(A), as_list(P), as_list(N), 1.0), testing::ref_triplet(A, P, N, 1.0), 1e-12);
}

TEST(BcLoss, GradientMatchesFiniteDifference) {
  Rng r(7);
  nn::Mat<double> a(3, 7), b(3, 7);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = r.uniform(-1, 1);
    b.data()[i] = r.uniform(-1, 1);
  }
  for (bool sq : {true, false}) {
    nn::Mat<double> g = nn::Mat<double>::Zero(3, 7);
    bc_loss(a, b, sq, 1.0, &g);
    const double h = 1e-7;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      nn::Mat<double> bp = b, bm = b;
      bp.data()[i] += h;
      bm.data()[i] -= h;
      EXPECT_NEAR(g.data()[i], (bc_loss(a, bp, sq) - bc_loss(a, bm, sq)) / (2 * h), 1e-5);
    }
  }
}

TEST(Coupling, NamesRoundTrip) {
  for (auto d : {CouplingDirection::AnchorAffordance, CouplingDirection::AnchorObservation}) {
    EXPECT_EQ(coupling_from_name(coupling_name(d)), d);
  }
}

}  // namespace
}  // namespace affcue
