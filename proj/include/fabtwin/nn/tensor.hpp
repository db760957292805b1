#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fabtwin/error.hpp"

namespace fabtwin::nn {

/// Dense NCHW tensor.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  std::size_t item_size() const { return static_cast<std::size_t>(c) * plane(); }
  std::size_t size() const { return data.size(); }

  T* item(int i) { return data.data() + static_cast<std::size_t>(i) * item_size(); }
  const T* item(int i) const { return data.data() + static_cast<std::size_t>(i) * item_size(); }
  T* channel(int i, int ch) { return item(i) + static_cast<std::size_t>(ch) * plane(); }
  const T* channel(int i, int ch) const { return item(i) + static_cast<std::size_t>(ch) * plane(); }

  T& at(int i, int ch, int y, int x) { return channel(i, ch)[static_cast<std::size_t>(y) * w + x]; }
  T at(int i, int ch, int y, int x) const { return channel(i, ch)[static_cast<std::size_t>(y) * w + x]; }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

/// Channel-wise concatenation [a, b].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) throw InvalidInput("concat: batch/spatial mismatch");
  Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
  for (int i = 0; i < a.n; ++i) {
    std::copy(a.item(i), a.item(i) + a.item_size(), out.item(i));
    std::copy(b.item(i), b.item(i) + b.item_size(), out.item(i) + a.item_size());
  }
  return out;
}

/// Stacks a then b along the batch axis.
template <typename T>
Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.c != b.c || a.h != b.h || a.w != b.w) throw InvalidInput("concat: item shape mismatch");
  Tensor<T> out(a.n + b.n, a.c, a.h, a.w);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

/// Inverse of concat_channels: first `ca` channels to `a`, rest to `b`.
template <typename T>
void split_channels(const Tensor<T>& in, int ca, Tensor<T>& a, Tensor<T>& b) {
  a = Tensor<T>(in.n, ca, in.h, in.w);
  b = Tensor<T>(in.n, in.c - ca, in.h, in.w);
  for (int i = 0; i < in.n; ++i) {
    std::copy(in.item(i), in.item(i) + a.item_size(), a.item(i));
    std::copy(in.item(i) + a.item_size(), in.item(i) + in.item_size(), b.item(i));
  }
}

template <typename T>
void add_into(Tensor<T>& acc, const Tensor<T>& g) {
  if (acc.data.empty()) {
    acc = g;
    return;
  }
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
}

}  // namespace fabtwin::nn
