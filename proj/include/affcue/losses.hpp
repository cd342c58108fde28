#pragma once

#include <string>
#include <vector>

#include "affcue/nn/params.hpp"

namespace affcue {

enum class CouplingDirection {
  AnchorAffordance,   ///< anchor Z^A against per-step z_obs of positive/negative
  AnchorObservation,  ///< anchor per-step z_obs against Z^A of positive/negative
};

std::string coupling_name(CouplingDirection d);
CouplingDirection coupling_from_name(const std::string& name);

template <class S>
using EmbeddingList = std::vector<nn::Vec<S>>;

/// sum_i max(0, |A_i - P_i|^2 - |A_i - N_i|^2 + M).
template <class S>
S triplet_loss(const EmbeddingList<S>& A, const EmbeddingList<S>& P, const EmbeddingList<S>& N, S margin);

/// Single hinge; adds d(loss)/d(a,p,n) scaled by `scale` when pointers are set.
template <class S>
S triplet_hinge(const nn::Vec<S>& a, const nn::Vec<S>& p, const nn::Vec<S>& n, S margin, S scale = S(1),
                nn::Vec<S>* da = nullptr, nn::Vec<S>* dp = nullptr, nn::Vec<S>* dn = nullptr);

/// Embeddings of one trajectory: Z^A and per-step observation embeddings.
template <class S>
struct MemberEmbedding {
  nn::Vec<S> z_aff;
  EmbeddingList<S> z_obs;
};

template <class S>
struct MemberGrad {
  nn::Vec<S> dz_aff;
  EmbeddingList<S> dz_obs;
  static MemberGrad zeros_like(const MemberEmbedding<S>& m);
};

/// One triplet's coupled loss: hinge on Z^A plus one hinge per step.
/// Positive and negative must have equally many steps.
template <class S>
S coupled_triplet_term(const MemberEmbedding<S>& a, const MemberEmbedding<S>& p, const MemberEmbedding<S>& n,
                       S margin, CouplingDirection dir, S scale = S(1), MemberGrad<S>* ga = nullptr,
                       MemberGrad<S>* gp = nullptr, MemberGrad<S>* gn = nullptr);

template <class S>
S coupled_triplet_loss(const std::vector<MemberEmbedding<S>>& A, const std::vector<MemberEmbedding<S>>& P,
                       const std::vector<MemberEmbedding<S>>& N, S margin,
                       CouplingDirection dir = CouplingDirection::AnchorAffordance);

/// Triplet loss on per-step observation embeddings, paired by step index.
template <class S>
S step_triplet_term(const EmbeddingList<S>& a, const EmbeddingList<S>& p, const EmbeddingList<S>& n, S margin,
                    S scale = S(1), EmbeddingList<S>* da = nullptr, EmbeddingList<S>* dp = nullptr,
                    EmbeddingList<S>* dn = nullptr);

/// Sum over rows of (L1 + L2) action error; L2 is squared unless told otherwise.
template <class S>
S bc_loss(const nn::Mat<S>& a_star, const nn::Mat<S>& a_hat, bool l2_squared = true, S scale = S(1),
          nn::Mat<S>* da_hat = nullptr);

/// Per-trajectory bc_loss summed over the batch and divided by its size.
template <class S>
S bc_loss_batch(const std::vector<nn::Mat<S>>& a_star, const std::vector<nn::Mat<S>>& a_hat, bool l2_squared = true);

}  // namespace affcue
