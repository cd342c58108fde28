#include "affcue/losses.hpp"

#include <cmath>

#include "affcue/error.hpp"

namespace affcue {

using nn::Mat;
using nn::Vec;

std::string coupling_name(CouplingDirection d) {
  return d == CouplingDirection::AnchorAffordance ? "anchor_affordance" : "anchor_observation";
}

CouplingDirection coupling_from_name(const std::string& name) {
  if (name == "anchor_affordance") return CouplingDirection::AnchorAffordance;
  if (name == "anchor_observation") return CouplingDirection::AnchorObservation;
  throw Error(ErrorKind::ConfigError, "unknown coupling direction '" + name + "'");
}

template <class S>
S triplet_hinge(const Vec<S>& a, const Vec<S>& p, const Vec<S>& n, S margin, S scale, Vec<S>* da, Vec<S>* dp,
                Vec<S>* dn) {
  if (a.size() != p.size() || a.size() != n.size()) throw Error(ErrorKind::ShapeError, "embedding dims differ");
  const Vec<S> ap = a - p;
  const Vec<S> an = a - n;
  const S v = ap.squaredNorm() - an.squaredNorm() + margin;
  if (v <= S(0)) return S(0);
  const S two = S(2) * scale;
  if (da) *da += two * (ap - an);
  if (dp) *dp -= two * ap;
  if (dn) *dn += two * an;
  return v;
}

template <class S>
S triplet_loss(const EmbeddingList<S>& A, const EmbeddingList<S>& P, const EmbeddingList<S>& N, S margin) {
  if (A.size() != P.size() || A.size() != N.size()) throw Error(ErrorKind::ShapeError, "triplet lists differ in length");
  S total = 0;
  for (std::size_t i = 0; i < A.size(); ++i) total += triplet_hinge(A[i], P[i], N[i], margin);
  return total;
}

template <class S>
MemberGrad<S> MemberGrad<S>::zeros_like(const MemberEmbedding<S>& m) {
  MemberGrad g;
  g.dz_aff = Vec<S>::Zero(m.z_aff.size());
  for (const auto& z : m.z_obs) g.dz_obs.push_back(Vec<S>::Zero(z.size()));
  return g;
}

template <class S>
S coupled_triplet_term(const MemberEmbedding<S>& a, const MemberEmbedding<S>& p, const MemberEmbedding<S>& n,
                       S margin, CouplingDirection dir, S scale, MemberGrad<S>* ga, MemberGrad<S>* gp,
                       MemberGrad<S>* gn) {
  S total = triplet_hinge(a.z_aff, p.z_aff, n.z_aff, margin, scale, ga ? &ga->dz_aff : nullptr,
                          gp ? &gp->dz_aff : nullptr, gn ? &gn->dz_aff : nullptr);
  if (dir == CouplingDirection::AnchorAffordance) {
    if (p.z_obs.size() != n.z_obs.size()) {
      throw Error(ErrorKind::ShapeError, "positive and negative trajectories differ in length");
    }
    for (std::size_t t = 0; t < p.z_obs.size(); ++t) {
      total += triplet_hinge(a.z_aff, p.z_obs[t], n.z_obs[t], margin, scale, ga ? &ga->dz_aff : nullptr,
                             gp ? &gp->dz_obs[t] : nullptr, gn ? &gn->dz_obs[t] : nullptr);
    }
  } else {
    for (std::size_t t = 0; t < a.z_obs.size(); ++t) {
      total += triplet_hinge(a.z_obs[t], p.z_aff, n.z_aff, margin, scale, ga ? &ga->dz_obs[t] : nullptr,
                             gp ? &gp->dz_aff : nullptr, gn ? &gn->dz_aff : nullptr);
    }
  }
  return total;
}

template <class S>
S coupled_triplet_loss(const std::vector<MemberEmbedding<S>>& A, const std::vector<MemberEmbedding<S>>& P,
                       const std::vector<MemberEmbedding<S>>& N, S margin, CouplingDirection dir) {
  if (A.size() != P.size() || A.size() != N.size()) throw Error(ErrorKind::ShapeError, "triplet lists differ in length");
  S total = 0;
  for (std::size_t i = 0; i < A.size(); ++i) total += coupled_triplet_term(A[i], P[i], N[i], margin, dir);
  return total;
}

template <class S>
S step_triplet_term(const EmbeddingList<S>& a, const EmbeddingList<S>& p, const EmbeddingList<S>& n, S margin,
                    S scale, EmbeddingList<S>* da, EmbeddingList<S>* dp, EmbeddingList<S>* dn) {
  if (a.size() != p.size() || a.size() != n.size()) {
    throw Error(ErrorKind::ShapeError, "per-step triplet needs trajectories of equal length");
  }
  S total = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    total += triplet_hinge(a[t], p[t], n[t], margin, scale, da ? &(*da)[t] : nullptr, dp ? &(*dp)[t] : nullptr,
                           dn ? &(*dn)[t] : nullptr);
  }
  return total;
}

template <class S>
S bc_loss(const Mat<S>& a_star, const Mat<S>& a_hat, bool l2_squared, S scale, Mat<S>* da_hat) {
  if (a_star.rows() != a_hat.rows() || a_star.cols() != a_hat.cols()) {
    throw Error(ErrorKind::ShapeError, "action matrices differ in shape");
  }
  const Mat<S> e = a_hat - a_star;
  S total = e.cwiseAbs().sum();
  if (l2_squared) {
    total += e.squaredNorm();
  } else {
    for (Eigen::Index r = 0; r < e.rows(); ++r) total += e.row(r).norm();
  }
  if (da_hat) {
    Mat<S> g = e.unaryExpr([](S v) { return v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0)); });
    if (l2_squared) {
      g += S(2) * e;
    } else {
      for (Eigen::Index r = 0; r < e.rows(); ++r) {
        const S nrm = e.row(r).norm();
        if (nrm > S(0)) g.row(r) += e.row(r) / nrm;
      }
    }
    *da_hat += scale * g;
  }
  return total;
}

template <class S>
S bc_loss_batch(const std::vector<Mat<S>>& a_star, const std::vector<Mat<S>>& a_hat, bool l2_squared) {
  if (a_star.size() != a_hat.size() || a_star.empty()) throw Error(ErrorKind::ShapeError, "bc batch mismatch");
  S total = 0;
  for (std::size_t i = 0; i < a_star.size(); ++i) total += bc_loss(a_star[i], a_hat[i], l2_squared);
  return total / static_cast<S>(a_star.size());
}

#define AFFCUE_LOSS_INSTANTIATE(S)                                                                               \
  template S triplet_hinge<S>(const Vec<S>&, const Vec<S>&, const Vec<S>&, S, S, Vec<S>*, Vec<S>*, Vec<S>*);     \
  template S triplet_loss<S>(const EmbeddingList<S>&, const EmbeddingList<S>&, const EmbeddingList<S>&, S);      \
  template struct MemberGrad<S>;                                                                                 \
  template S coupled_triplet_term<S>(const MemberEmbedding<S>&, const MemberEmbedding<S>&,                       \
                                     const MemberEmbedding<S>&, S, CouplingDirection, S, MemberGrad<S>*,         \
                                     MemberGrad<S>*, MemberGrad<S>*);                                            \
  template S coupled_triplet_loss<S>(const std::vector<MemberEmbedding<S>>&,                                     \
                                     const std::vector<MemberEmbedding<S>>&,                                     \
                                     const std::vector<MemberEmbedding<S>>&, S, CouplingDirection);              \
  template S step_triplet_term<S>(const EmbeddingList<S>&, const EmbeddingList<S>&, const EmbeddingList<S>&, S,  \
                                  S, EmbeddingList<S>*, EmbeddingList<S>*, EmbeddingList<S>*);                   \
  template S bc_loss<S>(const Mat<S>&, const Mat<S>&, bool, S, Mat<S>*);                                         \
  template S bc_loss_batch<S>(const std::vector<Mat<S>>&, const std::vector<Mat<S>>&, bool);

AFFCUE_LOSS_INSTANTIATE(float)
AFFCUE_LOSS_INSTANTIATE(double)

}  // namespace affcue
