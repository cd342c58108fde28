#pragma once

#include <string>

#include "affcue/nn/params.hpp"

namespace affcue::nn {

/// Feature map stored as channels x (H*W); pixel (y, x) is column y*W + x.
template <class S>
struct FMap {
  Mat<S> data;
  int H = 0;
  int W = 0;
  int channels() const { return static_cast<int>(data.rows()); }
};

template <class S>
void im2col(const Mat<S>& x, int H, int W, int k, int s, int p, int Ho, int Wo, Mat<S>& cols);
template <class S>
void col2im(const Mat<S>& cols, int C, int H, int W, int k, int s, int p, int Ho, int Wo, Mat<S>& x);

template <class S>
void relu_inplace(Mat<S>& x) {
  x = x.cwiseMax(S(0));
}
/// dy masked by y > 0 (y is the post-activation value).
template <class S, class A, class B>
Mat<S> relu_backward(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& dy) {
  return (y.array() > S(0)).select(dy, S(0));
}

struct Linear {
  int w = -1;
  int b = -1;
  int in = 0;
  int out = 0;

  static Linear make(ParamLayout& L, const std::string& name, const std::string& group, int in, int out,
                     Init init = Init::HeUniform);
  template <class S>
  Vec<S> forward(const ParamRef<S>& P, const Vec<S>& x) const;
  /// Accumulates parameter gradients; returns dL/dx.
  template <class S>
  Vec<S> backward(const ParamRef<S>& P, const Vec<S>& x, const Vec<S>& dy) const;
};

struct Conv2d {
  int w = -1;
  int b = -1;
  int cin = 0;
  int cout = 0;
  int k = 0;
  int stride = 1;
  int pad = 0;

  static Conv2d make(ParamLayout& L, const std::string& name, const std::string& group, int cin, int cout,
                     int k, int stride, Init init = Init::HeUniform);
  int out_size(int n) const { return (n + 2 * pad - k) / stride + 1; }
  template <class S>
  FMap<S> forward(const ParamRef<S>& P, const FMap<S>& x, Mat<S>& cols) const;
  template <class S>
  FMap<S> backward(const ParamRef<S>& P, const Mat<S>& cols, int H, int W, const FMap<S>& dy,
                   bool need_dx) const;
};

/// Transposed convolution; output size (n - 1) * stride - 2 * pad + k.
struct ConvTranspose2d {
  int w = -1;  ///< (k*k*cout) x cin
  int b = -1;
  int cin = 0;
  int cout = 0;
  int k = 0;
  int stride = 1;
  int pad = 0;

  static ConvTranspose2d make(ParamLayout& L, const std::string& name, const std::string& group, int cin,
                              int cout, int k, int stride, int pad, Init init = Init::HeUniform);
  int out_size(int n) const { return (n - 1) * stride - 2 * pad + k; }
  template <class S>
  FMap<S> forward(const ParamRef<S>& P, const FMap<S>& x) const;
  template <class S>
  FMap<S> backward(const ParamRef<S>& P, const FMap<S>& x, const FMap<S>& dy, bool need_dx) const;
};

template <class S>
struct LstmCache {
  Vec<S> x, h_prev, c_prev, i, f, g, o, c, tanh_c;
};

/// Gate order i, f, g, o.
struct LstmCell {
  int wx = -1;
  int wh = -1;
  int b = -1;
  int in = 0;
  int hidden = 0;

  static LstmCell make(ParamLayout& L, const std::string& name, const std::string& group, int in, int hidden);
  template <class S>
  void forward(const ParamRef<S>& P, const Vec<S>& x, const Vec<S>& h_prev, const Vec<S>& c_prev,
               LstmCache<S>& cache, Vec<S>& h, Vec<S>& c) const;
  /// dh, dc: gradients w.r.t. this step's outputs. Writes gradients for the
  /// previous carry and (optionally) the input.
  template <class S>
  void backward(const ParamRef<S>& P, const LstmCache<S>& cache, const Vec<S>& dh, const Vec<S>& dc,
                Vec<S>* dx, Vec<S>& dh_prev, Vec<S>& dc_prev) const;
};

template <class S>
S sigmoid(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

}  // namespace affcue::nn
