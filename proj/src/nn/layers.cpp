#include "affcue/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "affcue/error.hpp"
#include "affcue/rng.hpp"

namespace affcue::nn {

int ParamLayout::add(std::string name, std::string group, int rows, int cols, Init init, int fan_in) {
  ParamEntry e;
  e.name = std::move(name);
  e.group = std::move(group);
  e.rows = rows;
  e.cols = cols;
  e.offset = size_;
  e.init = init;
  e.fan_in = std::max(1, fan_in);
  size_ += e.size();
  entries_.push_back(std::move(e));
  return static_cast<int>(entries_.size()) - 1;
}

std::vector<std::string> ParamLayout::groups() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (std::find(out.begin(), out.end(), e.group) == out.end()) out.push_back(e.group);
  }
  return out;
}

std::vector<std::size_t> ParamLayout::group_indices(const std::string& group) const {
  std::vector<std::size_t> out;
  for (const auto& e : entries_) {
    if (e.group != group) continue;
    for (std::size_t k = 0; k < e.size(); ++k) out.push_back(e.offset + k);
  }
  return out;
}

template <class S>
Vec<S> ParamLayout::initialize(std::uint64_t seed) const {
  Vec<S> v = Vec<S>::Zero(static_cast<Eigen::Index>(size_));
  for (std::size_t idx = 0; idx < entries_.size(); ++idx) {
    const auto& e = entries_[idx];
    Rng rng(mix_seed(seed, idx));
    Eigen::Map<Mat<S>> m(v.data() + e.offset, e.rows, e.cols);
    switch (e.init) {
      case Init::Zeros:
        break;
      case Init::HeUniform:
      case Init::LecunUniform: {
        const double bound = std::sqrt((e.init == Init::HeUniform ? 6.0 : 3.0) / e.fan_in);
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<S>(rng.uniform(-bound, bound));
        break;
      }
      case Init::Orthogonal: {
        const int n = e.cols;
        for (int block = 0; block + n <= e.rows; block += n) {
          Eigen::MatrixXd a(n, n);
          for (int c = 0; c < n; ++c)
            for (int r = 0; r < n; ++r) a(r, c) = rng.normal();
          Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
          Eigen::MatrixXd q = qr.householderQ();
          // Sign fix makes the distribution uniform over orthogonal matrices.
          for (int c = 0; c < n; ++c) {
            if (qr.matrixQR()(c, c) < 0) q.col(c) *= -1.0;
          }
          m.block(block, 0, n, n) = q.cast<S>();
        }
        break;
      }
      case Init::ForgetBias: {
        const int h = e.rows / 4;
        m.block(h, 0, h, e.cols).setOnes();
        break;
      }
    }
  }
  return v;
}

template <class S>
void im2col(const Mat<S>& x, int H, int W, int k, int s, int p, int Ho, int Wo, Mat<S>& cols) {
  const int C = static_cast<int>(x.rows());
  const Eigen::Index rows = static_cast<Eigen::Index>(k) * k * C;
  cols.setZero(rows, static_cast<Eigen::Index>(Ho) * Wo);
  const S* src = x.data();
  S* dst = cols.data();
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      S* col = dst + (static_cast<Eigen::Index>(oy) * Wo + ox) * rows;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * s - p + ky;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * s - p + kx;
          if (ix < 0 || ix >= W) continue;
          std::memcpy(col + (ky * k + kx) * C, src + (static_cast<Eigen::Index>(iy) * W + ix) * C,
                      sizeof(S) * static_cast<std::size_t>(C));
        }
      }
    }
  }
}

template <class S>
void col2im(const Mat<S>& cols, int C, int H, int W, int k, int s, int p, int Ho, int Wo, Mat<S>& x) {
  const Eigen::Index rows = static_cast<Eigen::Index>(k) * k * C;
  x.setZero(C, static_cast<Eigen::Index>(H) * W);
  const S* src = cols.data();
  S* dst = x.data();
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      const S* col = src + (static_cast<Eigen::Index>(oy) * Wo + ox) * rows;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * s - p + ky;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * s - p + kx;
          if (ix < 0 || ix >= W) continue;
          S* out = dst + (static_cast<Eigen::Index>(iy) * W + ix) * C;
          const S* in = col + (ky * k + kx) * C;
          for (int c = 0; c < C; ++c) out[c] += in[c];
        }
      }
    }
  }
}

Linear Linear::make(ParamLayout& L, const std::string& name, const std::string& group, int in, int out,
                    Init init) {
  Linear l;
  l.in = in;
  l.out = out;
  l.w = L.add(name + ".weight", group, out, in, init, in);
  l.b = L.add(name + ".bias", group, out, 1, Init::Zeros);
  return l;
}

template <class S>
Vec<S> Linear::forward(const ParamRef<S>& P, const Vec<S>& x) const {
  if (x.size() != in) throw Error(ErrorKind::ShapeError, "linear input size mismatch");
  Vec<S> y = P.w(b);
  y.noalias() += P.w(w) * x;
  return y;
}

template <class S>
Vec<S> Linear::backward(const ParamRef<S>& P, const Vec<S>& x, const Vec<S>& dy) const {
  if (P.has_grad()) {
    P.dw(w).noalias() += dy * x.transpose();
    P.dw(b) += dy;
  }
  return P.w(w).transpose() * dy;
}

Conv2d Conv2d::make(ParamLayout& L, const std::string& name, const std::string& group, int cin, int cout,
                    int k, int stride, Init init) {
  Conv2d c;
  c.cin = cin;
  c.cout = cout;
  c.k = k;
  c.stride = stride;
  c.pad = (k - 1) / 2;
  c.w = L.add(name + ".weight", group, cout, k * k * cin, init, k * k * cin);
  c.b = L.add(name + ".bias", group, cout, 1, Init::Zeros);
  return c;
}

template <class S>
FMap<S> Conv2d::forward(const ParamRef<S>& P, const FMap<S>& x, Mat<S>& cols) const {
  if (x.channels() != cin) throw Error(ErrorKind::ShapeError, "conv input channel mismatch");
  FMap<S> y;
  y.H = out_size(x.H);
  y.W = out_size(x.W);
  im2col(x.data, x.H, x.W, k, stride, pad, y.H, y.W, cols);
  y.data.noalias() = P.w(w) * cols;
  y.data.colwise() += P.w(b).col(0);
  return y;
}

template <class S>
FMap<S> Conv2d::backward(const ParamRef<S>& P, const Mat<S>& cols, int H, int W, const FMap<S>& dy,
                         bool need_dx) const {
  if (P.has_grad()) {
    P.dw(w).noalias() += dy.data * cols.transpose();
    P.dw(b) += dy.data.rowwise().sum();
  }
  FMap<S> dx;
  dx.H = H;
  dx.W = W;
  if (!need_dx) return dx;
  const Mat<S> dcols = P.w(w).transpose() * dy.data;
  col2im(dcols, cin, H, W, k, stride, pad, dy.H, dy.W, dx.data);
  return dx;
}

ConvTranspose2d ConvTranspose2d::make(ParamLayout& L, const std::string& name, const std::string& group,
                                      int cin, int cout, int k, int stride, int pad, Init init) {
  ConvTranspose2d c;
  c.cin = cin;
  c.cout = cout;
  c.k = k;
  c.stride = stride;
  c.pad = pad;
  const int fan_in = std::max(1, cin * k * k / (stride * stride));
  c.w = L.add(name + ".weight", group, k * k * cout, cin, init, fan_in);
  c.b = L.add(name + ".bias", group, cout, 1, Init::Zeros);
  return c;
}

template <class S>
FMap<S> ConvTranspose2d::forward(const ParamRef<S>& P, const FMap<S>& x) const {
  if (x.channels() != cin) throw Error(ErrorKind::ShapeError, "deconv input channel mismatch");
  FMap<S> y;
  y.H = out_size(x.H);
  y.W = out_size(x.W);
  const Mat<S> cols = P.w(w) * x.data;
  col2im(cols, cout, y.H, y.W, k, stride, pad, x.H, x.W, y.data);
  y.data.colwise() += P.w(b).col(0);
  return y;
}

template <class S>
FMap<S> ConvTranspose2d::backward(const ParamRef<S>& P, const FMap<S>& x, const FMap<S>& dy,
                                  bool need_dx) const {
  Mat<S> dcols;
  im2col(dy.data, dy.H, dy.W, k, stride, pad, x.H, x.W, dcols);
  if (P.has_grad()) {
    P.dw(w).noalias() += dcols * x.data.transpose();
    P.dw(b) += dy.data.rowwise().sum();
  }
  FMap<S> dx;
  dx.H = x.H;
  dx.W = x.W;
  if (need_dx) dx.data = P.w(w).transpose() * dcols;
  return dx;
}

LstmCell LstmCell::make(ParamLayout& L, const std::string& name, const std::string& group, int in, int hidden) {
  LstmCell l;
  l.in = in;
  l.hidden = hidden;
  l.wx = L.add(name + ".weight_ih", group, 4 * hidden, in, Init::LecunUniform, in);
  l.wh = L.add(name + ".weight_hh", group, 4 * hidden, hidden, Init::Orthogonal, hidden);
  l.b = L.add(name + ".bias", group, 4 * hidden, 1, Init::ForgetBias);
  return l;
}

template <class S>
void LstmCell::forward(const ParamRef<S>& P, const Vec<S>& x, const Vec<S>& h_prev, const Vec<S>& c_prev,
                       LstmCache<S>& cache, Vec<S>& h, Vec<S>& c) const {
  if (x.size() != in) throw Error(ErrorKind::ShapeError, "lstm input size mismatch");
  const int H = hidden;
  Vec<S> z = P.w(b);
  z.noalias() += P.w(wx) * x;
  z.noalias() += P.w(wh) * h_prev;
  cache.x = x;
  cache.h_prev = h_prev;
  cache.c_prev = c_prev;
  cache.i = z.segment(0, H).unaryExpr([](S v) { return sigmoid(v); });
  cache.f = z.segment(H, H).unaryExpr([](S v) { return sigmoid(v); });
  cache.g = z.segment(2 * H, H).array().tanh();
  cache.o = z.segment(3 * H, H).unaryExpr([](S v) { return sigmoid(v); });
  c = cache.f.cwiseProduct(c_prev) + cache.i.cwiseProduct(cache.g);
  cache.c = c;
  cache.tanh_c = c.array().tanh();
  h = cache.o.cwiseProduct(cache.tanh_c);
}

template <class S>
void LstmCell::backward(const ParamRef<S>& P, const LstmCache<S>& k, const Vec<S>& dh, const Vec<S>& dc_in,
                        Vec<S>* dx, Vec<S>& dh_prev, Vec<S>& dc_prev) const {
  const int H = hidden;
  const auto one = S(1);
  Vec<S> dc = dc_in + dh.cwiseProduct(k.o).cwiseProduct((one - k.tanh_c.array().square()).matrix());
  Vec<S> dz(4 * H);
  dz.segment(0, H) = (dc.array() * k.g.array() * k.i.array() * (one - k.i.array())).matrix();
  dz.segment(H, H) = (dc.array() * k.c_prev.array() * k.f.array() * (one - k.f.array())).matrix();
  dz.segment(2 * H, H) = (dc.array() * k.i.array() * (one - k.g.array().square())).matrix();
  dz.segment(3 * H, H) = (dh.array() * k.tanh_c.array() * k.o.array() * (one - k.o.array())).matrix();
  if (P.has_grad()) {
    P.dw(wx).noalias() += dz * k.x.transpose();
    P.dw(wh).noalias() += dz * k.h_prev.transpose();
    P.dw(b) += dz;
  }
  if (dx) *dx = P.w(wx).transpose() * dz;
  dh_prev = P.w(wh).transpose() * dz;
  dc_prev = dc.cwiseProduct(k.f);
}

#define AFFCUE_INSTANTIATE(S)                                                                              \
  template Vec<S> ParamLayout::initialize<S>(std::uint64_t) const;                                         \
  template void im2col<S>(const Mat<S>&, int, int, int, int, int, int, int, Mat<S>&);                      \
  template void col2im<S>(const Mat<S>&, int, int, int, int, int, int, int, int, Mat<S>&);                 \
  template Vec<S> Linear::forward<S>(const ParamRef<S>&, const Vec<S>&) const;                             \
  template Vec<S> Linear::backward<S>(const ParamRef<S>&, const Vec<S>&, const Vec<S>&) const;             \
  template FMap<S> Conv2d::forward<S>(const ParamRef<S>&, const FMap<S>&, Mat<S>&) const;                  \
  template FMap<S> Conv2d::backward<S>(const ParamRef<S>&, const Mat<S>&, int, int, const FMap<S>&, bool)  \
      const;                                                                                               \
  template FMap<S> ConvTranspose2d::forward<S>(const ParamRef<S>&, const FMap<S>&) const;                  \
  template FMap<S> ConvTranspose2d::backward<S>(const ParamRef<S>&, const FMap<S>&, const FMap<S>&, bool)  \
      const;                                                                                               \
  template void LstmCell::forward<S>(const ParamRef<S>&, const Vec<S>&, const Vec<S>&, const Vec<S>&,      \
                                     LstmCache<S>&, Vec<S>&, Vec<S>&) const;                               \
  template void LstmCell::backward<S>(const ParamRef<S>&, const LstmCache<S>&, const Vec<S>&,              \
                                      const Vec<S>&, Vec<S>*, Vec<S>&, Vec<S>&) const;

AFFCUE_INSTANTIATE(float)
AFFCUE_INSTANTIATE(double)

}  // namespace affcue::nn
