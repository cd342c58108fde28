#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace affcue::testing {

double ref_sqdist(const RVec& a, const RVec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double ref_hinge(const RVec& a, const RVec& p, const RVec& n, double margin) {
  return std::max(0.0, ref_sqdist(a, p) - ref_sqdist(a, n) + margin);
}

double ref_triplet(const std::vector<RVec>& A, const std::vector<RVec>& P, const std::vector<RVec>& N,
                   double margin) {
  double s = 0;
  for (std::size_t i = 0; i < A.size(); ++i) s += ref_hinge(A[i], P[i], N[i], margin);
  return s;
}

double ref_coupled(const std::vector<RefMember>& A, const std::vector<RefMember>& P,
                   const std::vector<RefMember>& N, double margin, bool anchor_observation) {
  double s = 0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    s += ref_hinge(A[i].z_aff, P[i].z_aff, N[i].z_aff, margin);
    if (anchor_observation) {
      for (const RVec& zo : A[i].z_obs) s += ref_hinge(zo, P[i].z_aff, N[i].z_aff, margin);
    } else {
      for (std::size_t t = 0; t < P[i].z_obs.size(); ++t) {
        s += ref_hinge(A[i].z_aff, P[i].z_obs[t], N[i].z_obs[t], margin);
      }
    }
  }
  return s;
}

double ref_bc(const nn::Mat<double>& a_star, const nn::Mat<double>& a_hat) {
  double s = 0;
  for (Eigen::Index i = 0; i < a_star.rows(); ++i) {
    for (Eigen::Index j = 0; j < a_star.cols(); ++j) {
      const double d = a_star(i, j) - a_hat(i, j);
      s += std::fabs(d) + d * d;
    }
  }
  return s;
}

RVec to_rvec(const nn::Vec<double>& v) { return RVec(v.data(), v.data() + v.size()); }

MemberEmbedding<double> to_member(const RefMember& m) {
  MemberEmbedding<double> out;
  out.z_aff = Eigen::Map<const nn::Vec<double>>(m.z_aff.data(), static_cast<Eigen::Index>(m.z_aff.size()));
  for (const RVec& z : m.z_obs) {
    out.z_obs.emplace_back(Eigen::Map<const nn::Vec<double>>(z.data(), static_cast<Eigen::Index>(z.size())));
  }
  return out;
}

RefMember ref_embeddings(const Model& model, const nn::ParamRef<double>& P, const Trajectory& t,
                         const InteractionSegment& seg) {
  RefMember m;
  m.z_aff = to_rvec(model.encode_segment(P, seg).z_aff);
  Carry<double> carry = model.fresh_carry<double>();
  for (int k = 0; k < t.T; ++k) {
    const nn::Vec<double> s = t.state_row(k).cast<double>();
    nn::Vec<double> a = nn::Vec<double>::Zero(kActionDim);
    if (k > 0) {
      for (int j = 0; j < kActionDim; ++j) {
        a[j] = t.action_row(k - 1)[j] / (j < 6 ? model.config().action_scale[static_cast<std::size_t>(j)] : 1.0);
      }
    }
    const auto st = model.encode_step(P, t.frame(k), s, a, carry);
    m.z_obs.push_back(to_rvec(st.z_obs));
    carry = st.carry;
  }
  return m;
}

}  // namespace affcue::testing

#include "affcue/training.hpp"
#include "test_support.hpp"

namespace affcue::testing {

std::vector<GroupCheck> finite_difference_check(Variant v, std::size_t per_group, double h, bool stop_gradient_on_cue) {
  ModelConfig mc = ModelConfig::micro(v);
  mc.init_seed = 3;
  mc.encoder.stop_gradient_on_cue = stop_gradient_on_cue;
  const Model model(mc);
  Dataset ds;
  ds.trajectories = {random_trajectory(2, 16, 16, AffordanceCategory::BodyGrasp, 1),
                     random_trajectory(2, 16, 16, AffordanceCategory::BodyGrasp, 2),
                     random_trajectory(2, 16, 16, AffordanceCategory::HandleLeftRight, 3)};
  const auto segs = dataset_segments(ds);
  TrainConfig cfg;
  cfg.variant = v;
  cfg.margin = 5.0;  // keeps every hinge active so the objective is smooth
  Batch b;
  b.triplets.anchors = {0, 1};
  b.triplets.positives = {1, 0};
  b.triplets.negatives = {2, 2};
  b.plain = {0, 1, 2};

  nn::Vec<double> p = jittered_params(model, 9, 0.1);
  nn::Vec<double> g = nn::Vec<double>::Zero(p.size());
  batch_objective<double>(model, {&model.layout(), p.data(), g.data()}, ds.trajectories, segs, b, cfg);
  auto loss = [&] {
    return batch_objective<double>(model, {&model.layout(), p.data(), nullptr}, ds.trajectories, segs, b, cfg).total;
  };

  std::vector<GroupCheck> out;
  for (const auto& group : model.layout().groups()) {
    const auto idx = model.layout().group_indices(group);
    GroupCheck gc{group, 0, 0.0};
    const std::size_t stride = std::max<std::size_t>(1, idx.size() / per_group);
    for (std::size_t k = 0; k < idx.size(); k += stride) {
      const std::size_t i = idx[k];
      const double orig = p[static_cast<Eigen::Index>(i)];
      p[static_cast<Eigen::Index>(i)] = orig + h;
      const double lp = loss();
      p[static_cast<Eigen::Index>(i)] = orig - h;
      const double lm = loss();
      p[static_cast<Eigen::Index>(i)] = orig;
      const double fd = (lp - lm) / (2 * h);
      const double an = g[static_cast<Eigen::Index>(i)];
      const double rel = std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an));
      gc.max_rel = std::max(gc.max_rel, rel);
      ++gc.checked;
    }
    out.push_back(gc);
  }
  return out;
}

}  // namespace affcue::testing

#include <numbers>

#include "affcue/render.hpp"
#include "affcue/rng.hpp"

namespace affcue::testing {
namespace {

Vec3 random_unit(Rng& r) { return Vec3(r.normal(), r.normal(), r.normal()).normalized(); }

RigidTransform random_frame(Rng& r) {
  Pose6 p;
  p << r.uniform(-1, 1), r.uniform(-1, 1), r.uniform(-1, 1), r.uniform(-3, 3), r.uniform(-1.5, 1.5), r.uniform(-3, 3);
  return RigidTransform::from_pose(p);
}

// On a convex solid, a point whose outward normal faces the ray is its first hit.
Ray ray_onto(const Vec3& point, const Vec3& outward, Rng& r, double& expected) {
  Vec3 d;
  do {
    d = random_unit(r);
  } while (d.dot(outward) > -0.2);
  expected = r.uniform(0.05, 2.0);
  return {point - expected * d, d};
}

}  // namespace

RenderOracleResult renderer_oracle(int n, std::uint64_t seed) {
  Rng r(seed);
  RenderOracleResult res;
  auto record = [&](std::optional<double> got, double want) {
    ++res.cases;
    if (!got) {
      ++res.misses;
      return;
    }
    res.max_rel = std::max(res.max_rel, std::abs(*got - want) / std::abs(want));
  };
  while (res.cases < n) {
    switch (res.cases % 4) {
      case 0: {
        const BoxPrimitive box{random_frame(r), Vec3(r.uniform(0.01, 0.2), r.uniform(0.01, 0.2), r.uniform(0.01, 0.2))};
        const int axis = static_cast<int>(r.uniform_index(3));
        const double sign = r.bernoulli(0.5) ? 1.0 : -1.0;
        Vec3 local;
        for (int k = 0; k < 3; ++k) local[k] = r.uniform(-0.95, 0.95) * box.half_extents[k];
        local[axis] = sign * box.half_extents[axis];
        Vec3 normal = Vec3::Zero();
        normal[axis] = sign;
        double want = 0;
        const Ray ray = ray_onto(box.frame.apply(local), box.frame.rotation * normal, r, want);
        record(intersect(ray, box), want);
        break;
      }
      case 1: {
        const CylinderPrimitive cyl{random_frame(r), r.uniform(0.01, 0.1), r.uniform(0.02, 0.2), r.bernoulli(0.5),
                                    r.bernoulli(0.5)};
        const double phi = r.uniform(-std::numbers::pi, std::numbers::pi);
        const Vec3 radial(std::cos(phi), std::sin(phi), 0.0);
        const Vec3 local = cyl.radius * radial + Vec3(0, 0, r.uniform(0.05, 0.95) * cyl.height);
        double want = 0;
        const Ray ray = ray_onto(cyl.frame.apply(local), cyl.frame.rotation * radial, r, want);
        record(intersect(ray, cyl), want);
        break;
      }
      case 2: {
        const CylinderPrimitive cyl{random_frame(r), r.uniform(0.01, 0.1), r.uniform(0.02, 0.2), true, true};
        const bool top = r.bernoulli(0.5);
        const double rho = cyl.radius * std::sqrt(r.uniform(0.0, 0.9));
        const double phi = r.uniform(-std::numbers::pi, std::numbers::pi);
        const Vec3 local(rho * std::cos(phi), rho * std::sin(phi), top ? cyl.height : 0.0);
        double want = 0;
        const Ray ray = ray_onto(cyl.frame.apply(local), cyl.frame.rotation * Vec3(0, 0, top ? 1.0 : -1.0), r, want);
        record(intersect(ray, cyl), want);
        break;
      }
      default: {
        const PlanePrimitive plane{Vec3(r.uniform(-1, 1), r.uniform(-1, 1), r.uniform(-1, 1)), random_unit(r)};
        const Vec3 o(r.uniform(-2, 2), r.uniform(-2, 2), r.uniform(-2, 2));
        Vec3 d = random_unit(r);
        if (std::abs(d.dot(plane.normal)) < 0.1) continue;
        const double num = (plane.point - o).dot(plane.normal);
        if (num * d.dot(plane.normal) <= 0) d = -d;
        record(intersect(Ray{o, d}, plane), num / d.dot(plane.normal));
        break;
      }
    }
  }
  return res;
}

}  // namespace affcue::testing
