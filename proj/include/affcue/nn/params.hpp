#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace affcue::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class Init {
  HeUniform,     ///< U(-sqrt(6/fan_in), +sqrt(6/fan_in)), for layers feeding a ReLU
  LecunUniform,  ///< U(-sqrt(3/fan_in), +sqrt(3/fan_in))
  Zeros,
  Orthogonal,    ///< per square block of rows (recurrent weights)
  ForgetBias,    ///< LSTM bias: zeros with the forget block set to one
};

struct ParamEntry {
  std::string name;
  std::string group;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  Init init = Init::Zeros;
  int fan_in = 1;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Named tensors packed into one flat parameter vector.
class ParamLayout {
 public:
  int add(std::string name, std::string group, int rows, int cols, Init init, int fan_in = 1);

  const std::vector<ParamEntry>& entries() const { return entries_; }
  const ParamEntry& entry(int i) const { return entries_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return size_; }
  /// Group names in order of first appearance.
  std::vector<std::string> groups() const;
  /// Flat indices of all parameters in a group.
  std::vector<std::size_t> group_indices(const std::string& group) const;

  template <class S>
  Vec<S> initialize(std::uint64_t seed) const;

 private:
  std::vector<ParamEntry> entries_;
  std::size_t size_ = 0;
};

template <class S>
Eigen::Map<const Mat<S>> view(const ParamLayout& L, const S* base, int i) {
  const auto& e = L.entry(i);
  return {base + e.offset, e.rows, e.cols};
}

template <class S>
Eigen::Map<Mat<S>> view_mut(const ParamLayout& L, S* base, int i) {
  const auto& e = L.entry(i);
  return {base + e.offset, e.rows, e.cols};
}

/// Parameters plus an optional gradient accumulator of the same layout.
template <class S>
struct ParamRef {
  const ParamLayout* layout = nullptr;
  const S* p = nullptr;
  S* g = nullptr;

  Eigen::Map<const Mat<S>> w(int i) const { return view(*layout, p, i); }
  Eigen::Map<Mat<S>> dw(int i) const { return view_mut(*layout, g, i); }
  bool has_grad() const { return g != nullptr; }
};

}  // namespace affcue::nn
