#ifndef GACKAN_NN_HPP
#define GACKAN_NN_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gackan/rng.hpp"

namespace gackan::nn {

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major tensor. Layout conventions: NCHW for feature maps,
// OIHW for convolution weights, NC for flattened features.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel(), T(0));
  }

  std::size_t numel() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }

  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  T& at4(int n, int c, int h, int w) {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) *
                    shape[3] +
                w];
  }
  const T& at4(int n, int c, int h, int w) const {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) *
                    shape[3] +
                w];
  }

  void fill(T v) { data.assign(data.size(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Learnable tensor with accumulated gradient.
template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  explicit Param(std::vector<int> s) : value(std::move(s)) {
    grad = Tensor<T>(value.shape);
  }

  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
struct NamedParam {
  std::string name;
  Param<T>* param;
};

// ---------------------------------------------------------------------------
// Low-level kernels.

// C(m x n) += A(m x k) * B(k x n), all row-major.
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m x n) += A(k x m)^T * B(k x n).
template <typename T>
void gemm_at_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const T* arow = a + static_cast<std::size_t>(p) * m;
    const T* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m x n) += A(m x k) * B(n x k)^T.
template <typename T>
void gemm_bt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

struct ConvSpec {
  int kh = 3;
  int kw = 3;
  int stride = 1;
  int pad_h = 1;
  int pad_w = 1;
  int groups = 1;
};

inline int conv_out_dim(int in, int k, int pad, int stride) {
  return (in + 2 * pad - k) / stride + 1;
}

// Patch matrix for one image and one channel group:
// rows = cg*kh*kw, cols = ho*wo. Zero padding.
template <typename T>
void im2col(const T* x, int cg, int h, int w, const ConvSpec& s, int ho, int wo,
            T* col) {
  for (int c = 0; c < cg; ++c) {
    for (int ki = 0; ki < s.kh; ++ki) {
      for (int kj = 0; kj < s.kw; ++kj) {
        T* row = col + ((static_cast<std::size_t>(c) * s.kh + ki) * s.kw + kj) *
                           (static_cast<std::size_t>(ho) * wo);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.pad_h + ki;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < wo; ++ox) row[oy * wo + ox] = T(0);
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.pad_w + kj;
            row[oy * wo + ox] = (ix < 0 || ix >= w) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

// Scatter-add of a patch matrix back into the (padded) image gradient.
template <typename T>
void col2im_acc(const T* col, int cg, int h, int w, const ConvSpec& s, int ho,
                int wo, T* gx) {
  for (int c = 0; c < cg; ++c) {
    for (int ki = 0; ki < s.kh; ++ki) {
      for (int kj = 0; kj < s.kw; ++kj) {
        const T* row =
            col + ((static_cast<std::size_t>(c) * s.kh + ki) * s.kw + kj) *
                      (static_cast<std::size_t>(ho) * wo);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.pad_h + ki;
          if (iy < 0 || iy >= h) continue;
          T* dst = gx + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.pad_w + kj;
            if (ix >= 0 && ix < w) dst[ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Functional ops. Each forward has a matching exact backward.

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w,
                         const Tensor<T>* bias, const ConvSpec& s) {
  if (x.ndim() != 4 || w.ndim() != 4) {
    throw DimensionError("conv2d expects 4-d input and weight");
  }
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const int cout = w.dim(0);
  if (cin % s.groups != 0 || cout % s.groups != 0) {
    throw DimensionError("conv2d channels not divisible by groups");
  }
  if (w.dim(1) != cin / s.groups || w.dim(2) != s.kh || w.dim(3) != s.kw) {
    throw DimensionError("conv2d weight shape mismatch");
  }
  const int ho = conv_out_dim(h, s.kh, s.pad_h, s.stride);
  const int wo = conv_out_dim(ww, s.kw, s.pad_w, s.stride);
  if (ho <= 0 || wo <= 0) throw DimensionError("conv2d output is empty");

  const int cg = cin / s.groups;
  const int og = cout / s.groups;
  const int krows = cg * s.kh * s.kw;
  Tensor<T> y({n, cout, ho, wo});
  std::vector<T> col(static_cast<std::size_t>(krows) * ho * wo);
  for (int i = 0; i < n; ++i) {
    for (int g = 0; g < s.groups; ++g) {
      const T* xg = x.data.data() +
                    (static_cast<std::size_t>(i) * cin + g * cg) * h * ww;
      im2col(xg, cg, h, ww, s, ho, wo, col.data());
      T* yg = y.data.data() +
              (static_cast<std::size_t>(i) * cout + g * og) * ho * wo;
      gemm_acc(w.data.data() + static_cast<std::size_t>(g) * og * krows,
               col.data(), yg, og, krows, ho * wo);
    }
  }
  if (bias) {
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < cout; ++c) {
        T* yc = y.data.data() +
                (static_cast<std::size_t>(i) * cout + c) * ho * wo;
        const T b = bias->data[static_cast<std::size_t>(c)];
        for (int p = 0; p < ho * wo; ++p) yc[p] += b;
      }
    }
  }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s,
                     const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>* gw,
                     Tensor<T>* gb) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const int cout = w.dim(0);
  const int ho = gy.dim(2), wo = gy.dim(3);
  const int cg = cin / s.groups;
  const int og = cout / s.groups;
  const int krows = cg * s.kh * s.kw;

  std::vector<T> col(static_cast<std::size_t>(krows) * ho * wo);
  std::vector<T> gcol(col.size());
  for (int i = 0; i < n; ++i) {
    for (int g = 0; g < s.groups; ++g) {
      const T* xg = x.data.data() +
                    (static_cast<std::size_t>(i) * cin + g * cg) * h * ww;
      const T* gyg = gy.data.data() +
                     (static_cast<std::size_t>(i) * cout + g * og) * ho * wo;
      if (gw) {
        im2col(xg, cg, h, ww, s, ho, wo, col.data());
        gemm_bt_acc(gyg, col.data(),
                    gw->data.data() + static_cast<std::size_t>(g) * og * krows,
                    og, ho * wo, krows);
      }
      if (gx) {
        std::fill(gcol.begin(), gcol.end(), T(0));
        gemm_at_acc(w.data.data() + static_cast<std::size_t>(g) * og * krows,
                    gyg, gcol.data(), krows, og, ho * wo);
        col2im_acc(gcol.data(), cg, h, ww, s, ho, wo,
                   gx->data.data() +
                       (static_cast<std::size_t>(i) * cin + g * cg) * h * ww);
      }
    }
  }
  if (gb) {
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < cout; ++c) {
        const T* gyc = gy.data.data() +
                       (static_cast<std::size_t>(i) * cout + c) * ho * wo;
        T acc = T(0);
        for (int p = 0; p < ho * wo; ++p) acc += gyc[p];
        gb->data[static_cast<std::size_t>(c)] += acc;
      }
    }
  }
}

template <typename T>
T sigmoid_val(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                   : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
T silu_val(T x) {
  return x * sigmoid_val(x);
}

// ---------------------------------------------------------------------------
// Layer modules. Each instance caches what its backward needs; the calling
// code runs backward in exact reverse order of forward.

template <typename T>
class Conv2d {
 public:
  Conv2d(int cin, int cout, int kh, int kw, int stride, int pad_h, int pad_w,
         int groups, bool with_bias, std::uint64_t init_seed)
      : spec_{kh, kw, stride, pad_h, pad_w, groups},
        weight_({cout, cin / groups, kh, kw}),
        has_bias_(with_bias) {
    if (with_bias) bias_ = Param<T>({cout});
    // Kaiming-uniform, fan_in = (cin/groups)*kh*kw.
    const double fan_in = static_cast<double>(cin / groups) * kh * kw;
    const double bound = std::sqrt(6.0 / fan_in);
    Pcg32 rng(init_seed, 0x9d);
    for (auto& v : weight_.value.data) {
      v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
    }
  }

  Tensor<T> forward(const Tensor<T>& x) {
    cached_x_ = x;
    return conv2d_forward(x, weight_.value, has_bias_ ? &bias_.value : nullptr,
                          spec_);
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx(cached_x_.shape);
    conv2d_backward(cached_x_, weight_.value, spec_, gy, &gx, &weight_.grad,
                    has_bias_ ? &bias_.grad : nullptr);
    return gx;
  }

  void collect(std::vector<NamedParam<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight_});
    if (has_bias_) out.push_back({prefix + ".bias", &bias_});
  }

  const ConvSpec& spec() const { return spec_; }
  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }

 private:
  ConvSpec spec_;
  Param<T> weight_;
  Param<T> bias_;
  bool has_bias_;
  Tensor<T> cached_x_;
};

template <typename T>
class BatchNorm2d {
 public:
  explicit BatchNorm2d(int channels, T momentum = T(0.1), T eps = T(1e-5))
      : c_(channels),
        momentum_(momentum),
        eps_(eps),
        gamma_({channels}),
        beta_({channels}),
        running_mean_({channels}),
        running_var_({channels}) {
    gamma_.value.fill(T(1));
    running_var_.fill(T(1));
  }

  // Accepts NCHW or NC (treated as H=W=1).
  Tensor<T> forward(const Tensor<T>& x, bool train) {
    const bool flat = x.ndim() == 2;
    if ((flat ? x.dim(1) : x.dim(1)) != c_) {
      throw DimensionError("batchnorm channel mismatch");
    }
    const int n = x.dim(0);
    const int hw = flat ? 1 : x.dim(2) * x.dim(3);
    if (train && n < 2) throw ModeError("batchnorm train mode needs batch >= 2");
    const std::size_t m = static_cast<std::size_t>(n) * hw;

    train_ = train;
    cached_x_ = x;
    mean_.assign(c_, T(0));
    inv_std_.assign(c_, T(0));
    Tensor<T> y(x.shape);

    for (int c = 0; c < c_; ++c) {
      T mu, var;
      if (train) {
        T acc = T(0);
        for (int i = 0; i < n; ++i) {
          const T* xc = channel_ptr(x, i, c, hw);
          for (int p = 0; p < hw; ++p) acc += xc[p];
        }
        mu = acc / static_cast<T>(m);
        T vacc = T(0);
        for (int i = 0; i < n; ++i) {
          const T* xc = channel_ptr(x, i, c, hw);
          for (int p = 0; p < hw; ++p) {
            const T d = xc[p] - mu;
            vacc += d * d;
          }
        }
        var = vacc / static_cast<T>(m);
        running_mean_.data[c] =
            (T(1) - momentum_) * running_mean_.data[c] + momentum_ * mu;
        running_var_.data[c] =
            (T(1) - momentum_) * running_var_.data[c] + momentum_ * var;
      } else {
        mu = running_mean_.data[c];
        var = running_var_.data[c];
      }
      const T istd = T(1) / std::sqrt(var + eps_);
      mean_[c] = mu;
      inv_std_[c] = istd;
      const T g = gamma_.value.data[c], b = beta_.value.data[c];
      for (int i = 0; i < n; ++i) {
        const T* xc = channel_ptr(x, i, c, hw);
        T* yc = channel_ptr(y, i, c, hw);
        for (int p = 0; p < hw; ++p) yc[p] = g * (xc[p] - mu) * istd + b;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const Tensor<T>& x = cached_x_;
    const bool flat = x.ndim() == 2;
    const int n = x.dim(0);
    const int hw = flat ? 1 : x.dim(2) * x.dim(3);
    const std::size_t m = static_cast<std::size_t>(n) * hw;
    Tensor<T> gx(x.shape);

    for (int c = 0; c < c_; ++c) {
      const T mu = mean_[c], istd = inv_std_[c], g = gamma_.value.data[c];
      T sum_gy = T(0), sum_gy_xhat = T(0);
      for (int i = 0; i < n; ++i) {
        const T* xc = channel_ptr(x, i, c, hw);
        const T* gc = channel_ptr(gy, i, c, hw);
        for (int p = 0; p < hw; ++p) {
          sum_gy += gc[p];
          sum_gy_xhat += gc[p] * (xc[p] - mu) * istd;
        }
      }
      gamma_.grad.data[c] += sum_gy_xhat;
      beta_.grad.data[c] += sum_gy;
      for (int i = 0; i < n; ++i) {
        const T* xc = channel_ptr(x, i, c, hw);
        const T* gc = channel_ptr(gy, i, c, hw);
        T* gxc = channel_ptr(gx, i, c, hw);
        if (train_) {
          for (int p = 0; p < hw; ++p) {
            const T xhat = (xc[p] - mu) * istd;
            gxc[p] = g * istd *
                     (gc[p] - sum_gy / static_cast<T>(m) -
                      xhat * sum_gy_xhat / static_cast<T>(m));
          }
        } else {
          for (int p = 0; p < hw; ++p) gxc[p] = g * istd * gc[p];
        }
      }
    }
    return gx;
  }

  void collect(std::vector<NamedParam<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &gamma_});
    out.push_back({prefix + ".beta", &beta_});
  }

  // Running stats are state, not optimized parameters; checkpoints store them
  // through this accessor pair.
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }
  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  T eps() const { return eps_; }
  int channels() const { return c_; }

 private:
  template <typename Tn>
  static auto channel_ptr(Tn& t, int i, int c, int hw) {
    return t.data.data() +
           (static_cast<std::size_t>(i) * t.dim(1) + c) * hw;
  }

  int c_;
  T momentum_, eps_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> cached_x_;
  std::vector<T> mean_, inv_std_;
  bool train_ = true;
};

template <typename T>
class Silu {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    cached_x_ = x;
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      y.data[i] = silu_val(x.data[i]);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx(cached_x_.shape);
    for (std::size_t i = 0; i < gx.data.size(); ++i) {
      const T s = sigmoid_val(cached_x_.data[i]);
      gx.data[i] = gy.data[i] * (s + cached_x_.data[i] * s * (T(1) - s));
    }
    return gx;
  }

 private:
  Tensor<T> cached_x_;
};

template <typename T>
class Sigmoid {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    cached_y_ = Tensor<T>(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      cached_y_.data[i] = sigmoid_val(x.data[i]);
    }
    return cached_y_;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx(cached_y_.shape);
    for (std::size_t i = 0; i < gx.data.size(); ++i) {
      const T s = cached_y_.data[i];
      gx.data[i] = gy.data[i] * s * (T(1) - s);
    }
    return gx;
  }

  const Tensor<T>& output() const { return cached_y_; }

 private:
  Tensor<T> cached_y_;
};

enum class PoolKind { kMax, kAvg };

template <typename T>
class Pool2d {
 public:
  Pool2d(PoolKind kind, int kernel, int stride)
      : kind_(kind), k_(kernel), stride_(stride) {}

  Tensor<T> forward(const Tensor<T>& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h < k_ || w < k_) throw DimensionError("pool kernel exceeds input");
    const int ho = (h - k_) / stride_ + 1;
    const int wo = (w - k_) / stride_ + 1;
    in_shape_ = x.shape;
    Tensor<T> y({n, c, ho, wo});
    if (kind_ == PoolKind::kMax) {
      argmax_.assign(y.numel(), 0);
    }
    std::size_t oi = 0;
    for (int i = 0; i < n; ++i) {
      for (int cc = 0; cc < c; ++cc) {
        const T* xc =
            x.data.data() + (static_cast<std::size_t>(i) * c + cc) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox, ++oi) {
            if (kind_ == PoolKind::kMax) {
              T best = xc[(oy * stride_) * w + ox * stride_];
              std::size_t besti =
                  static_cast<std::size_t>(oy * stride_) * w + ox * stride_;
              for (int ky = 0; ky < k_; ++ky) {
                for (int kx = 0; kx < k_; ++kx) {
                  const std::size_t idx =
                      static_cast<std::size_t>(oy * stride_ + ky) * w +
                      ox * stride_ + kx;
                  if (xc[idx] > best) {
                    best = xc[idx];
                    besti = idx;
                  }
                }
              }
              y.data[oi] = best;
              argmax_[oi] =
                  (static_cast<std::size_t>(i) * c + cc) * h * w + besti;
            } else {
              T acc = T(0);
              for (int ky = 0; ky < k_; ++ky) {
                for (int kx = 0; kx < k_; ++kx) {
                  acc += xc[static_cast<std::size_t>(oy * stride_ + ky) * w +
                            ox * stride_ + kx];
                }
              }
              y.data[oi] = acc / static_cast<T>(k_ * k_);
            }
          }
        }
      }
    }
    out_shape_ = y.shape;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx(in_shape_);
    if (kind_ == PoolKind::kMax) {
      for (std::size_t i = 0; i < gy.data.size(); ++i) {
        gx.data[argmax_[i]] += gy.data[i];
      }
      return gx;
    }
    const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2],
              w = in_shape_[3];
    const int ho = out_shape_[2], wo = out_shape_[3];
    const T scale = T(1) / static_cast<T>(k_ * k_);
    std::size_t oi = 0;
    for (int i = 0; i < n; ++i) {
      for (int cc = 0; cc < c; ++cc) {
        T* gxc =
            gx.data.data() + (static_cast<std::size_t>(i) * c + cc) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox, ++oi) {
            const T g = gy.data[oi] * scale;
            for (int ky = 0; ky < k_; ++ky) {
              for (int kx = 0; kx < k_; ++kx) {
                gxc[static_cast<std::size_t>(oy * stride_ + ky) * w +
                    ox * stride_ + kx] += g;
              }
            }
          }
        }
      }
    }
    return gx;
  }

 private:
  PoolKind kind_;
  int k_, stride_;
  std::vector<int> in_shape_, out_shape_;
  std::vector<std::size_t> argmax_;
};

// NCHW -> NC per-channel spatial mean.
template <typename T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    in_shape_ = x.shape;
    const int n = x.dim(0), c = x.dim(1);
    const int hw = x.dim(2) * x.dim(3);
    Tensor<T> y({n, c});
    for (int i = 0; i < n; ++i) {
      for (int cc = 0; cc < c; ++cc) {
        const T* xc =
            x.data.data() + (static_cast<std::size_t>(i) * c + cc) * hw;
        T acc = T(0);
        for (int p = 0; p < hw; ++p) acc += xc[p];
        y.data[static_cast<std::size_t>(i) * c + cc] = acc / static_cast<T>(hw);
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx(in_shape_);
    const int n = in_shape_[0], c = in_shape_[1];
    const int hw = in_shape_[2] * in_shape_[3];
    const T scale = T(1) / static_cast<T>(hw);
    for (int i = 0; i < n; ++i) {
      for (int cc = 0; cc < c; ++cc) {
        const T g = gy.data[static_cast<std::size_t>(i) * c + cc] * scale;
        T* gxc =
            gx.data.data() + (static_cast<std::size_t>(i) * c + cc) * hw;
        for (int p = 0; p < hw; ++p) gxc[p] = g;
      }
    }
    return gx;
  }

 private:
  std::vector<int> in_shape_;
};

// ---------------------------------------------------------------------------
// Channel-dimension concat/split used by the composite blocks.

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
  const int n = parts[0]->dim(0), h = parts[0]->dim(2), w = parts[0]->dim(3);
  int ctot = 0;
  for (auto* p : parts) ctot += p->dim(1);
  Tensor<T> y({n, ctot, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    std::size_t coff = 0;
    for (auto* p : parts) {
      const int pc = p->dim(1);
      std::copy(
          p->data.begin() + static_cast<std::size_t>(i) * pc * hw,
          p->data.begin() + static_cast<std::size_t>(i + 1) * pc * hw,
          y.data.begin() + (static_cast<std::size_t>(i) * ctot + coff) * hw);
      coff += pc;
    }
  }
  return y;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int c0, int count) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor<T> y({n, count, h, w});
  for (int i = 0; i < n; ++i) {
    std::copy(x.data.begin() + (static_cast<std::size_t>(i) * c + c0) * hw,
              x.data.begin() +
                  (static_cast<std::size_t>(i) * c + c0 + count) * hw,
              y.data.begin() + static_cast<std::size_t>(i) * count * hw);
  }
  return y;
}

template <typename T>
void add_into_channels(Tensor<T>& dst, const Tensor<T>& src, int c0) {
  const int n = dst.dim(0), c = dst.dim(1), h = dst.dim(2), w = dst.dim(3);
  const int sc = src.dim(1);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    T* d = dst.data.data() + (static_cast<std::size_t>(i) * c + c0) * hw;
    const T* s = src.data.data() + static_cast<std::size_t>(i) * sc * hw;
    for (std::size_t p = 0; p < static_cast<std::size_t>(sc) * hw; ++p) {
      d[p] += s[p];
    }
  }
}

}  // namespace gackan::nn

#endif  // GACKAN_NN_HPP
