#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fabtwin/nn/tensor.hpp"
#include "fabtwin/rng.hpp"

namespace fabtwin::nn {

/// Trainable array with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

/// Patch geometry shared by convolution and its transpose.
struct PatchGeometry {
  int channels, height, width;  // image side
  int kernel, stride, pad;
  int out_h, out_w;             // patch grid

  int rows() const { return channels * kernel * kernel; }
  int cols() const { return out_h * out_w; }
};

/// cols[(c*k + ky)*k + kx][oy*out_w + ox] = img[c][oy*s - p + ky][ox*s - p + kx]
template <typename T>
void im2col(const PatchGeometry& g, const T* img, T* cols) {
  const int k = g.kernel;
  for (int c = 0; c < g.channels; ++c) {
    const T* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * g.cols();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-adds columns back into the image.
template <typename T>
void col2im(const PatchGeometry& g, const T* cols, T* img) {
  const int k = g.kernel;
  std::fill(img, img + static_cast<std::size_t>(g.channels) * g.height * g.width, T(0));
  for (int c = 0; c < g.channels; ++c) {
    T* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * g.cols();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.width;
          const T* src = row + static_cast<std::size_t>(oy) * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

inline int conv_out_size(int in, int kernel, int stride, int pad) { return (in + 2 * pad - kernel) / stride + 1; }

/// Cross-correlation with bias. Weight layout [out][in][k][k].
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
        weight_(name + ".weight", {out_ch, in_ch, kernel, kernel}), bias_(name + ".bias", {out_ch}) {}

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  int pad() const { return pad_; }
  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

  PatchGeometry geometry(int h, int w) const {
    return {in_ch_, h, w, kernel_, stride_, pad_, conv_out_size(h, kernel_, stride_, pad_),
            conv_out_size(w, kernel_, stride_, pad_)};
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.c != in_ch_) throw InvalidInput("conv: channel mismatch");
    input_ = x;
    const auto g = geometry(x.h, x.w);
    if (g.out_h < 1 || g.out_w < 1) throw InvalidInput("conv: input too small");
    Tensor<T> y(x.n, out_ch_, g.out_h, g.out_w);
    cols_.resize(static_cast<std::size_t>(g.rows()) * g.cols());
    CMapMat<T> W(weight_.value.data(), out_ch_, g.rows());
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias_.value.data(), out_ch_);
    for (int i = 0; i < x.n; ++i) {
      im2col(g, x.item(i), cols_.data());
      MapMat<T> Y(y.item(i), out_ch_, g.cols());
      Y.noalias() = W * CMapMat<T>(cols_.data(), g.rows(), g.cols());
      Y.colwise() += b;
    }
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx when `need_input_grad`.
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) {
    const auto g = geometry(input_.h, input_.w);
    cols_.resize(static_cast<std::size_t>(g.rows()) * g.cols());
    std::vector<T> dcols(need_input_grad ? cols_.size() : 0);
    Tensor<T> dx;
    if (need_input_grad) dx = Tensor<T>(input_.n, input_.c, input_.h, input_.w);
    MapMat<T> dW(weight_.grad.data(), out_ch_, g.rows());
    CMapMat<T> W(weight_.value.data(), out_ch_, g.rows());
    for (int i = 0; i < input_.n; ++i) {
      CMapMat<T> dY(dy.item(i), out_ch_, g.cols());
      im2col(g, input_.item(i), cols_.data());
      dW.noalias() += dY * CMapMat<T>(cols_.data(), g.rows(), g.cols()).transpose();
      for (int o = 0; o < out_ch_; ++o) {
        const T* p = dy.channel(i, o);
        T s(0);
        for (int j = 0; j < g.cols(); ++j) s += p[j];
        bias_.grad[static_cast<std::size_t>(o)] += s;
      }
      if (need_input_grad) {
        MapMat<T>(dcols.data(), g.rows(), g.cols()).noalias() = W.transpose() * dY;
        col2im(g, dcols.data(), dx.item(i));
      }
    }
    return dx;
  }

  std::vector<Param<T>*> parameters() { return {&weight_, &bias_}; }

 private:
  int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 1, pad_ = 0;
  Param<T> weight_, bias_;
  Tensor<T> input_;
  std::vector<T> cols_;
};

/// Transposed convolution (k=4, stride 2, pad 1 doubles the spatial size).
/// Weight layout [in][out][k][k].
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
        weight_(name + ".weight", {in_ch, out_ch, kernel, kernel}), bias_(name + ".bias", {out_ch}) {}

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

  // The output image plays the role of the "input" of the adjoint conv.
  PatchGeometry geometry(int in_h, int in_w) const {
    const int oh = (in_h - 1) * stride_ - 2 * pad_ + kernel_;
    const int ow = (in_w - 1) * stride_ - 2 * pad_ + kernel_;
    return {out_ch_, oh, ow, kernel_, stride_, pad_, in_h, in_w};
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.c != in_ch_) throw InvalidInput("conv-transpose: channel mismatch");
    input_ = x;
    const auto g = geometry(x.h, x.w);
    Tensor<T> y(x.n, out_ch_, g.height, g.width);
    cols_.resize(static_cast<std::size_t>(g.rows()) * g.cols());
    CMapMat<T> W(weight_.value.data(), in_ch_, g.rows());
    for (int i = 0; i < x.n; ++i) {
      MapMat<T>(cols_.data(), g.rows(), g.cols()).noalias() =
          W.transpose() * CMapMat<T>(x.item(i), in_ch_, g.cols());
      col2im(g, cols_.data(), y.item(i));
      for (int o = 0; o < out_ch_; ++o) {
        T* p = y.channel(i, o);
        const T b = bias_.value[static_cast<std::size_t>(o)];
        for (std::size_t j = 0; j < y.plane(); ++j) p[j] += b;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) {
    const auto g = geometry(input_.h, input_.w);
    cols_.resize(static_cast<std::size_t>(g.rows()) * g.cols());
    Tensor<T> dx;
    if (need_input_grad) dx = Tensor<T>(input_.n, input_.c, input_.h, input_.w);
    MapMat<T> dW(weight_.grad.data(), in_ch_, g.rows());
    CMapMat<T> W(weight_.value.data(), in_ch_, g.rows());
    for (int i = 0; i < input_.n; ++i) {
      im2col(g, dy.item(i), cols_.data());
      CMapMat<T> dcols(cols_.data(), g.rows(), g.cols());
      dW.noalias() += CMapMat<T>(input_.item(i), in_ch_, g.cols()) * dcols.transpose();
      for (int o = 0; o < out_ch_; ++o) {
        const T* p = dy.channel(i, o);
        T s(0);
        for (std::size_t j = 0; j < dy.plane(); ++j) s += p[j];
        bias_.grad[static_cast<std::size_t>(o)] += s;
      }
      if (need_input_grad) MapMat<T>(dx.item(i), in_ch_, g.cols()).noalias() = W * dcols;
    }
    return dx;
  }

  std::vector<Param<T>*> parameters() { return {&weight_, &bias_}; }

 private:
  int in_ch_ = 0, out_ch_ = 0, kernel_ = 4, stride_ = 2, pad_ = 1;
  Param<T> weight_, bias_;
  Tensor<T> input_;
  std::vector<T> cols_;
};

/// Per-sample, per-channel normalization without affine parameters.
template <typename T>
class InstanceNorm {
 public:
  explicit InstanceNorm(T eps = T(1e-5)) : eps_(eps) {}

  Tensor<T> forward(const Tensor<T>& x) {
    y_ = Tensor<T>(x.n, x.c, x.h, x.w);
    inv_std_.assign(static_cast<std::size_t>(x.n) * x.c, T(0));
    const auto m = static_cast<double>(x.plane());
    for (int i = 0; i < x.n; ++i) {
      for (int ch = 0; ch < x.c; ++ch) {
        const T* p = x.channel(i, ch);
        double mean = 0.0;
        for (std::size_t j = 0; j < x.plane(); ++j) mean += p[j];
        mean /= m;
        double var = 0.0;
        for (std::size_t j = 0; j < x.plane(); ++j) var += (p[j] - mean) * (p[j] - mean);
        var /= m;
        const T inv = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
        inv_std_[static_cast<std::size_t>(i) * x.c + ch] = inv;
        T* q = y_.channel(i, ch);
        for (std::size_t j = 0; j < x.plane(); ++j) q[j] = static_cast<T>((p[j] - mean)) * inv;
      }
    }
    return y_;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    const auto m = static_cast<double>(dy.plane());
    for (int i = 0; i < dy.n; ++i) {
      for (int ch = 0; ch < dy.c; ++ch) {
        const T* g = dy.channel(i, ch);
        const T* y = y_.channel(i, ch);
        double mg = 0.0, mgy = 0.0;
        for (std::size_t j = 0; j < dy.plane(); ++j) {
          mg += g[j];
          mgy += static_cast<double>(g[j]) * y[j];
        }
        mg /= m;
        mgy /= m;
        const T inv = inv_std_[static_cast<std::size_t>(i) * dy.c + ch];
        T* d = dx.channel(i, ch);
        for (std::size_t j = 0; j < dy.plane(); ++j) {
          d[j] = inv * static_cast<T>(g[j] - mg - y[j] * mgy);
        }
      }
    }
    return dx;
  }

 private:
  T eps_;
  Tensor<T> y_;
  std::vector<T> inv_std_;
};

/// max(x, slope*x); slope 0 gives ReLU.
template <typename T>
class LeakyRelu {
 public:
  explicit LeakyRelu(T slope = T(0.2)) : slope_(slope) {}

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    Tensor<T> y = x;
    for (auto& v : y.data) v = v > T(0) ? v : slope_ * v;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
      if (!(input_.data[i] > T(0))) dx.data[i] *= slope_;
    }
    return dx;
  }

 private:
  T slope_;
  Tensor<T> input_;
};

template <typename T>
class Sigmoid {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    out_ = x;
    for (auto& v : out_.data) v = T(1) / (T(1) + std::exp(-v));
    return out_;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= out_.data[i] * (T(1) - out_.data[i]);
    return dx;
  }

 private:
  Tensor<T> out_;
};

/// Inverted dropout; identity when inactive or p == 0.
template <typename T>
class Dropout {
 public:
  Tensor<T> forward(const Tensor<T>& x, double p, Rng* rng) {
    active_ = rng != nullptr && p > 0.0;
    if (!active_) return x;
    scale_.resize(x.data.size());
    const T keep = static_cast<T>(1.0 / (1.0 - p));
    for (auto& s : scale_) s = rng->uniform() < p ? T(0) : keep;
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] *= scale_[i];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!active_) return dy;
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= scale_[i];
    return dx;
  }

 private:
  bool active_ = false;
  std::vector<T> scale_;
};

}  // namespace fabtwin::nn
