#ifndef GACKAN_MODEL_HPP
#define GACKAN_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gackan/nn.hpp"

namespace gackan::nn {

class FusionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// B-spline basis over a uniform grid on [-g, g] with G intervals, order p.
// Knot vector has p extended knots on each side; G + p basis functions.

struct BsplineGrid {
  double range = 2.0;
  int intervals = 5;
  int order = 3;

  int num_basis() const { return intervals + order; }

  std::vector<double> knots() const {
    const double step = 2.0 * range / intervals;
    std::vector<double> t(intervals + 2 * order + 1);
    for (int i = 0; i < static_cast<int>(t.size()); ++i) {
      t[i] = -range + step * (i - order);
    }
    return t;
  }
};

// Cox-de Boor, iterative over degree. x is clamped to the grid range.
// Writes num_basis() values; deriv may be null.
inline void bspline_basis(double x, const BsplineGrid& grid, double* basis,
                          double* deriv = nullptr) {
  const int p = grid.order;
  const int nb = grid.num_basis();
  const auto t = grid.knots();
  x = std::clamp(x, -grid.range, grid.range);
  // Nudge the right endpoint into the last interior interval so the
  // half-open degree-0 indicators stay well defined.
  const int nfun0 = grid.intervals + 2 * p;
  std::vector<double> b(nfun0, 0.0);
  {
    int cell = static_cast<int>(
        std::floor((x + grid.range) / (2.0 * grid.range / grid.intervals)));
    cell = std::clamp(cell, 0, grid.intervals - 1);
    b[cell + p] = 1.0;
  }
  std::vector<double> prev;
  for (int d = 1; d <= p; ++d) {
    if (deriv && d == p) prev = b;
    for (int i = 0; i + d < nfun0; ++i) {
      const double den1 = t[i + d] - t[i];
      const double den2 = t[i + d + 1] - t[i + 1];
      double v = 0.0;
      if (den1 != 0.0) v += (x - t[i]) / den1 * b[i];
      if (den2 != 0.0) v += (t[i + d + 1] - x) / den2 * b[i + 1];
      b[i] = v;
    }
  }
  for (int i = 0; i < nb; ++i) basis[i] = b[i];
  if (deriv) {
    for (int i = 0; i < nb; ++i) {
      const double den1 = t[i + p] - t[i];
      const double den2 = t[i + p + 1] - t[i + 1];
      double v = 0.0;
      if (den1 != 0.0) v += p / den1 * prev[i];
      if (den2 != 0.0) v -= p / den2 * prev[i + 1];
      deriv[i] = v;
    }
  }
}

// ---------------------------------------------------------------------------
// Asymmetric convolution: parallel d x d, d x 1, 1 x d kernels, each with its
// own batch norm; branch outputs are summed. fuse() folds the batch norms and
// collapses the three kernels into one d x d kernel plus bias.

template <typename T>
class AcbConv {
 public:
  AcbConv(int cin, int cout, int k, int stride, int groups,
          std::uint64_t init_seed)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), groups_(groups) {
    const int p = (k - 1) / 2;
    square_ = std::make_unique<Conv2d<T>>(cin, cout, k, k, stride, p, p,
                                          groups, false, mix64(init_seed ^ 1));
    ver_ = std::make_unique<Conv2d<T>>(cin, cout, k, 1, stride, p, 0, groups,
                                       false, mix64(init_seed ^ 2));
    hor_ = std::make_unique<Conv2d<T>>(cin, cout, 1, k, stride, 0, p, groups,
                                       false, mix64(init_seed ^ 3));
    bn_square_ = std::make_unique<BatchNorm2d<T>>(cout);
    bn_ver_ = std::make_unique<BatchNorm2d<T>>(cout);
    bn_hor_ = std::make_unique<BatchNorm2d<T>>(cout);
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (fused_) {
      const int p = (k_ - 1) / 2;
      ConvSpec s{k_, k_, stride_, p, p, groups_};
      return conv2d_forward(x, fused_weight_, &fused_bias_, s);
    }
    Tensor<T> y = bn_square_->forward(square_->forward(x), train);
    Tensor<T> yv = bn_ver_->forward(ver_->forward(x), train);
    Tensor<T> yh = bn_hor_->forward(hor_->forward(x), train);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      y.data[i] += yv.data[i] + yh.data[i];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    if (fused_) throw ModeError("fused conv has no backward");
    Tensor<T> gx = square_->backward(bn_square_->backward(gy));
    Tensor<T> gv = ver_->backward(bn_ver_->backward(gy));
    Tensor<T> gh = hor_->backward(bn_hor_->backward(gy));
    for (std::size_t i = 0; i < gx.data.size(); ++i) {
      gx.data[i] += gv.data[i] + gh.data[i];
    }
    return gx;
  }

  // Fold each branch's batch norm into its kernel, then add the asymmetric
  // kernels into the central column/row of the square kernel.
  void fuse() {
    if (fused_) return;
    const int p = (k_ - 1) / 2;
    fused_weight_ = Tensor<T>({cout_, cin_ / groups_, k_, k_});
    fused_bias_ = Tensor<T>({cout_});
    const int cg = cin_ / groups_;
    auto fold = [&](Conv2d<T>& conv, BatchNorm2d<T>& bn, int kh, int kw,
                    int oy, int ox) {
      for (int o = 0; o < cout_; ++o) {
        const T var = bn.running_var().data[o];
        if (!std::isfinite(static_cast<double>(var))) {
          throw FusionError("non-finite running stats");
        }
        const T istd = T(1) / std::sqrt(var + bn.eps());
        const T scale = bn.gamma().value.data[o] * istd;
        for (int c = 0; c < cg; ++c) {
          for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
              fused_weight_.data[((static_cast<std::size_t>(o) * cg + c) * k_ +
                                  oy + ki) *
                                     k_ +
                                 ox + kj] +=
                  scale *
                  conv.weight()
                      .value
                      .data[((static_cast<std::size_t>(o) * cg + c) * kh + ki) *
                                kw +
                            kj];
            }
          }
        }
        fused_bias_.data[o] += bn.beta().value.data[o] -
                               scale * bn.running_mean().data[o];
      }
    };
    fold(*square_, *bn_square_, k_, k_, 0, 0);
    fold(*ver_, *bn_ver_, k_, 1, 0, p);
    fold(*hor_, *bn_hor_, 1, k_, p, 0);
    fused_ = true;
    square_.reset();
    ver_.reset();
    hor_.reset();
    bn_square_.reset();
    bn_ver_.reset();
    bn_hor_.reset();
  }

  void collect(std::vector<NamedParam<T>>& out, const std::string& prefix) {
    if (fused_) return;  // fused tensors are exposed via collect_state
    square_->collect(out, prefix + ".square");
    ver_->collect(out, prefix + ".ver");
    hor_->collect(out, prefix + ".hor");
    bn_square_->collect(out, prefix + ".bn_square");
    bn_ver_->collect(out, prefix + ".bn_ver");
    bn_hor_->collect(out, prefix + ".bn_hor");
  }

  void collect_state(std::vector<std::pair<std::string, Tensor<T>*>>& out,
                     const std::string& prefix) {
    if (fused_) {
      out.push_back({prefix + ".fused.weight", &fused_weight_});
      out.push_back({prefix + ".fused.bias", &fused_bias_});
      return;
    }
    out.push_back({prefix + ".bn_square.running_mean",
                   &bn_square_->running_mean()});
    out.push_back({prefix + ".bn_square.running_var",
                   &bn_square_->running_var()});
    out.push_back({prefix + ".bn_ver.running_mean", &bn_ver_->running_mean()});
    out.push_back({prefix + ".bn_ver.running_var", &bn_ver_->running_var()});
    out.push_back({prefix + ".bn_hor.running_mean", &bn_hor_->running_mean()});
    out.push_back({prefix + ".bn_hor.running_var", &bn_hor_->running_var()});
  }

  bool fused() const { return fused_; }
  int kernel() const { return k_; }
  int cin() const { return cin_; }
  int cout() const { return cout_; }
  int stride() const { return stride_; }
  int groups() const { return groups_; }
  const Tensor<T>& fused_weight() const { return fused_weight_; }
  const Tensor<T>& fused_bias() const { return fused_bias_; }
  Conv2d<T>& square() { return *square_; }
  Conv2d<T>& ver() { return *ver_; }
  Conv2d<T>& hor() { return *hor_; }
  BatchNorm2d<T>& bn_square() { return *bn_square_; }
  BatchNorm2d<T>& bn_ver() { return *bn_ver_; }
  BatchNorm2d<T>& bn_hor() { return *bn_hor_; }

 private:
  int cin_, cout_, k_, stride_, groups_;
  std::unique_ptr<Conv2d<T>> square_, ver_, hor_;
  std::unique_ptr<BatchNorm2d<T>> bn_square_, bn_ver_, bn_hor_;
  bool fused_ = false;
  Tensor<T> fused_weight_, fused_bias_;
};

// ---------------------------------------------------------------------------
// Coordinate attention: per-height and per-width sigmoid gates from pooled
// 1D descriptors through a shared bottleneck.
//   y_c(i,j) = x_c(i,j) * g^h_c(i) * g^w_c(j)

template <typename T>
class CoordAttention {
 public:
  CoordAttention(int channels, int reduction, std::uint64_t init_seed)
      : c_(channels) {
    cr_ = std::max(8, channels / reduction);
    conv1_ = std::make_unique<Conv2d<T>>(channels, cr_, 1, 1, 1, 0, 0, 1, true,
                                         mix64(init_seed ^ 11));
    conv_h_ = std::make_unique<Conv2d<T>>(cr_, channels, 1, 1, 1, 0, 0, 1,
                                          true, mix64(init_seed ^ 12));
    conv_w_ = std::make_unique<Conv2d<T>>(cr_, channels, 1, 1, 1, 0, 0, 1,
                                          true, mix64(init_seed ^ 13));
  }

  // Test hook: fixes both gates to a constant, bypassing the gate network.
  void set_gate_override(double v) {
    override_ = true;
    override_val_ = static_cast<T>(v);
  }
  void clear_gate_override() { override_ = false; }

  Tensor<T> forward(const Tensor<T>& x, bool) {
    cached_x_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (override_) {
      Tensor<T> y(x.shape);
      const T g2 = override_val_ * override_val_;
      for (std::size_t i = 0; i < y.data.size(); ++i) {
        y.data[i] = x.data[i] * g2;
      }
      return y;
    }
    // Directional average pools, stacked along the height axis.
    Tensor<T> cat({n, c_, h + w, 1});
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < c_; ++c) {
        const T* xc = x.data.data() +
                      (static_cast<std::size_t>(i) * c_ + c) * h * w;
        T* dst = cat.data.data() +
                 (static_cast<std::size_t>(i) * c_ + c) * (h + w);
        for (int yy = 0; yy < h; ++yy) {
          T acc = T(0);
          for (int xx = 0; xx < w; ++xx) acc += xc[yy * w + xx];
          dst[yy] = acc / static_cast<T>(w);
        }
        for (int xx = 0; xx < w; ++xx) {
          T acc = T(0);
          for (int yy = 0; yy < h; ++yy) acc += xc[yy * w + xx];
          dst[h + xx] = acc / static_cast<T>(h);
        }
      }
    }
    Tensor<T> a = act_.forward(conv1_->forward(cat));
    Tensor<T> ah({n, cr_, h, 1}), aw({n, cr_, w, 1});
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < cr_; ++c) {
        const T* src = a.data.data() +
                       (static_cast<std::size_t>(i) * cr_ + c) * (h + w);
        std::copy(src, src + h,
                  ah.data.data() + (static_cast<std::size_t>(i) * cr_ + c) * h);
        std::copy(src + h, src + h + w,
                  aw.data.data() + (static_cast<std::size_t>(i) * cr_ + c) * w);
      }
    }
    gh_ = sig_h_.forward(conv_h_->forward(ah));
    gw_ = sig_w_.forward(conv_w_->forward(aw));

    Tensor<T> y(x.shape);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < c_; ++c) {
        const T* xc = x.data.data() +
                      (static_cast<std::size_t>(i) * c_ + c) * h * w;
        T* yc = y.data.data() + (static_cast<std::size_t>(i) * c_ + c) * h * w;
        const T* ghc =
            gh_.data.data() + (static_cast<std::size_t>(i) * c_ + c) * h;
        const T* gwc =
            gw_.data.data() + (static_cast<std::size_t>(i) * c_ + c) * w;
        for (int yy = 0; yy < h; ++yy) {
          for (int xx = 0; xx < w; ++xx) {
            yc[yy * w + xx] = xc[yy * w + xx] * ghc[yy] * gwc[xx];
          }
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const Tensor<T>& x = cached_x_;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    Tensor<T> gx(x.shape);
    if (override_) {
      const T g2 = override_val_ * override_val_;
      for (std::size_t i = 0; i < gx.data.size(); ++i) {
        gx.data[i] = gy.data[i] * g2;
      }
      return gx;
    }
    Tensor<T> ggh({n, c_, h, 1}), ggw({n, c_, w, 1});
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < c_; ++c) {
        const std::size_t base = (static_cast<std::size_t>(i) * c_ + c);
        const T* xc = x.data.data() + base * h * w;
        const T* gc = gy.data.data() + base * h * w;
        const T* ghc = gh_.data.data() + base * h;
        const T* gwc = gw_.data.data() + base * w;
        T* gxc = gx.data.data() + base * h * w;
        T* gghc = ggh.data.data() + base * h;
        T* ggwc = ggw.data.data() + base * w;
        for (int yy = 0; yy < h; ++yy) {
          for (int xx = 0; xx < w; ++xx) {
            const T g = gc[yy * w + xx];
            gxc[yy * w + xx] = g * ghc[yy] * gwc[xx];
            gghc[yy] += g * xc[yy * w + xx] * gwc[xx];
            ggwc[xx] += g * xc[yy * w + xx] * ghc[yy];
          }
        }
      }
    }
    Tensor<T> g_ah = conv_h_->backward(sig_h_.backward(ggh));
    Tensor<T> g_aw = conv_w_->backward(sig_w_.backward(ggw));
    Tensor<T> g_a({n, cr_, h + w, 1});
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < cr_; ++c) {
        T* dst = g_a.data.data() +
                 (static_cast<std::size_t>(i) * cr_ + c) * (h + w);
        const T* sh =
            g_ah.data.data() + (static_cast<std::size_t>(i) * cr_ + c) * h;
        const T* sw =
            g_aw.data.data() + (static_cast<std::size_t>(i) * cr_ + c) * w;
        std::copy(sh, sh + h, dst);
        std::copy(sw, sw + w, dst + h);
      }
    }
    Tensor<T> g_cat = conv1_->backward(act_.backward(g_a));
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < c_; ++c) {
        const std::size_t base = (static_cast<std::size_t>(i) * c_ + c);
        const T* gp = g_cat.data.data() + base * (h + w);
        T* gxc = gx.data.data() + base * h * w;
        for (int yy = 0; yy < h; ++yy) {
          const T gph = gp[yy] / static_cast<T>(w);
          for (int xx = 0; xx < w; ++xx) gxc[yy * w + xx] += gph;
        }
        for (int xx = 0; xx < w; ++xx) {
          const T gpw = gp[h + xx] / static_cast<T>(h);
          for (int yy = 0; yy < h; ++yy) gxc[yy * w + xx] += gpw;
        }
      }
    }
    return gx;
  }

  void collect(std::vector<NamedParam<T>>& out, const std::string& prefix) {
    conv1_->collect(out, prefix + ".conv1");
    conv_h_->collect(out, prefix + ".conv_h");
    conv_w_->collect(out, prefix + ".conv_w");
  }

  int reduced_channels() const { return cr_; }
  int channels() const { return c_; }

 private:
  int c_, cr_;
  std::unique_ptr<Conv2d<T>> conv1_, conv_h_, conv_w_;
  Silu<T> act_;
  Sigmoid<T> sig_h_, sig_w_;
  Tensor<T> cached_x_, gh_, gw_;
  bool override_ = false;
  T override_val_ = T(1);
};

// ---------------------------------------------------------------------------
// Ghost unit: primary ACB produces the intrinsic half of the channels, a
// cheap depthwise 3x3 ACB derives the ghost half, coordinate attention gates
// the concatenation.

template <typename T>
class GhostUnit {
 public:
  GhostUnit(int cin, int cout, int k, int ca_reduction,
            std::uint64_t init_seed)
      : cout_(cout), intrinsic_((cout + 1) / 2) {
    primary_ = std::make_unique<AcbConv<T>>(cin, intrinsic_, k, 1, 1,
                                            mix64(init_seed ^ 21));
    cheap_ = std::make_unique<AcbConv<T>>(intrinsic_, intrinsic_, 3, 1,
                                          intrinsic_, mix64(init_seed ^ 22));
    ca_ = std::make_unique<CoordAttention<T>>(cout, ca_reduction,
                                              mix64(init_seed ^ 23));
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> p = primary_->forward(x, train);
    Tensor<T> g = cheap_->forward(p, train);
    cached_p_shape_ = p.shape;
    Tensor<T> cat = concat_channels<T>({&p, &g});
    Tensor<T> trimmed =
        cat.dim(1) == cout_ ? std::move(cat) : slice_channels(cat, 0, cout_);
    return ca_->forward(trimmed, train);
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gcat = ca_->backward(gy);
    Tensor<T> gp = slice_channels(gcat, 0, intrinsic_);
    const int ghost = cout_ - intrinsic_;
    Tensor<T> gg(cached_p_shape_);
    if (ghost > 0) {
      Tensor<T> gslice = slice_channels(gcat, intrinsic_, ghost);
      add_into_channels(gg, gslice, 0);
    }
    Tensor<T> gp2 = cheap_->backward(gg);
    for (std::size_t i = 0; i < gp.data.size(); ++i) {
      gp.data[i] += gp2.data[i];
    }
    return primary_->backward(gp);
  }

  void fuse() {
    primary_->fuse();
    cheap_->fuse();
  }

  void collect(std::vector<NamedParam<T>>& out, const std::string& prefix) {
    primary_->collect(out, prefix + ".primary");
    cheap_->collect(out, prefix + ".cheap");
    ca_->collect(out, prefix + ".ca");
  }

  void collect_state(std::vector<std::pair<std::string, Tensor<T>*>>& out,
                     const std::string& prefix) {
    primary_->collect_state(out, prefix + ".primary");
    cheap_->collect_state(out, prefix + ".cheap");
  }

  AcbConv<T>& primary() { return *primary_; }
  AcbConv<T>& cheap() { return *cheap_; }
  CoordAttention<T>& ca() { return *ca_; }
  int intrinsic() const { return intrinsic_; }
  int cout() const { return cout_; }

 private:
  int cout_, intrinsic_;
  std::unique_ptr<AcbConv<T>> primary_, cheap_;
  std::unique_ptr<CoordAttention<T>> ca_;
  std::vector<int> cached_p_shape_;
};

// ---------------------------------------------------------------------------
// MS-GAC block: ghost units at kernel sizes 3/5/7 in parallel, concatenated,
// then paired 2x2 max/avg pooling halves the spatial dims.

template <typename T>
class MsGacBlock {
 public:
  MsGacBlock(int cin, int cb, int ca_reduction, std::uint64_t init_seed)
      : cb_(cb),
        maxpool_(PoolKind::kMax, 2, 2),
        avgpool_(PoolKind::kAvg, 2, 2) {
    const int kernels[3] = {3, 5, 7};
    for (int i = 0; i < 3; ++i) {
      branches_.push_back(std::make_unique<GhostUnit<T>>(
          cin, cb, kernels[i], ca_reduction,
          mix64(init_seed ^ (0x31 + static_cast<std::uint64_t>(i)))));
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (x.dim(2) < 2 || x.dim(3) < 2) {
      throw DimensionError("ms-gac block input too small");
    }
    std::vector<Tensor<T>> outs;
    outs.reserve(3);
    for (auto& b : branches_) outs.push_back(b->forward(x, train));
    Tensor<T> z = concat_channels<T>({&outs[0], &outs[1], &outs[2]});
    z = pad_to_even(z);
    Tensor<T> m = maxpool_.forward(z);
    Tensor<T> a = avgpool_.forward(z);
    return concat_channels<T>({&m, &a});
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const int c3 = 3 * cb_;
    Tensor<T> gm = slice_channels(gy, 0, c3);
    Tensor<T> ga = slice_channels(gy, c3, c3);
    Tensor<T> gz = maxpool_.backward(gm);
    Tensor<T> gza = avgpool_.backward(ga);
    for (std::size_t i = 0; i < gz.data.size(); ++i) {
      gz.data[i] += gza.data[i];
    }
    gz = unpad_from_even(gz);
    Tensor<T> gx;
    for (int i = 0; i < 3; ++i) {
      Tensor<T> gb = branches_[static_cast<std::size_t>(i)]->backward(
          slice_channels(gz, i * cb_, cb_));
      if (i == 0) {
        gx = std::move(gb);
      } else {
        for (std::size_t j = 0; j < gx.data.size(); ++j) {
          gx.data[j] += gb.data[j];
        }
      }
    }
    return gx;
  }

  void fuse() {
    for (auto& b : branches_) b->fuse();
  }

  void collect(std::vector<NamedParam<T>>& out, const std::string& prefix) {
    const char* names[3] = {".k3", ".k5", ".k7"};
    for (int i = 0; i < 3; ++i) {
      branches_[static_cast<std::size_t>(i)]->collect(out, prefix + names[i]);
    }
  }

  void collect_state(std::vector<std::pair<std::string, Tensor<T>*>>& out,
                     const std::string& prefix) {
    const char* names[3] = {".k3", ".k5", ".k7"};
    for (int i = 0; i < 3; ++i) {
      branches_[static_cast<std::size_t>(i)]->collect_state(out,
                                                            prefix + names[i]);
    }
  }

  GhostUnit<T>& branch(int i) { return *branches_[static_cast<std::size_t>(i)]; }
  int cb() const { return cb_; }

 private:
  // Right/bottom zero-pad to even spatial dims before pooling.
  Tensor<T> pad_to_even(const Tensor<T>& z) {
    padded_h_ = z.dim(2) % 2;
    padded_w_ = z.dim(3) % 2;
    pre_pad_shape_ = z.shape;
    if (!padded_h_ && !padded_w_) return z;
    const int n = z.dim(0), c = z.dim(1), h = z.dim(2), w = z.dim(3);
    Tensor<T> out({n, c, h + padded_h_, w + padded_w_});
    for (int i = 0; i < n; ++i) {
      for (int cc = 0; cc < c; ++cc) {
        for (int yy = 0; yy < h; ++yy) {
          for (int xx = 0; xx < w; ++xx) {
            out.at4(i, cc, yy, xx) = z.at4(i, cc, yy, xx);
          }
        }
      }
    }
    return out;
  }

  Tensor<T> unpad_from_even(const Tensor<T>& gz) {
    if (!padded_h_ && !padded_w_) return gz;
    Tensor<T> out(pre_pad_shape_);
    const int n = out.dim(0), c = out.dim(1), h = out.dim(2), w = out.dim(3);
    for (int i = 0; i < n; ++i) {
      for (int cc = 0; cc < c; ++cc) {
        for (int yy = 0; yy < h; ++yy) {
          for (int xx = 0; xx < w; ++xx) {
            out.at4(i, cc, yy, xx) =
                gz.data[((static_cast<std::size_t>(i) * c + cc) *
                             (h + padded_h_) +
                         yy) *
                            (w + padded_w_) +
                        xx];
          }
        }
      }
    }
    return out;
  }

  int cb_;
  std::vector<std::unique_ptr<GhostUnit<T>>> branches_;
  Pool2d<T> maxpool_, avgpool_;
  int padded_h_ = 0, padded_w_ = 0;
  std::vector<int> pre_pad_shape_;
};

// ---------------------------------------------------------------------------
// KAN layer: every input-output edge carries
//   phi(x) = w_b * SiLU(x) + w_s * sum_i c_i B_i(x)
// with a shared B-spline grid. Output j sums phi over the inputs.

template <typename T>
class KanLayer {
 public:
  KanLayer(int d_in, int d_out, const BsplineGrid& grid,
           std::uint64_t init_seed)
      : d_in_(d_in),
        d_out_(d_out),
        grid_(grid),
        nb_(grid.num_basis()),
        w_b_({d_out, d_in}),
        w_s_({d_out, d_in}),
        coeff_({d_out, d_in, nb_}) {
    Pcg32 rng(init_seed, 0x6b);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (auto& v : w_b_.value.data) {
      v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
    }
    w_s_.value.fill(T(1));
    for (auto& v : coeff_.value.data) {
      v = static_cast<T>((2.0 * rng.uniform() - 1.0) * 0.1 * bound);
    }
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.ndim() != 2 || x.dim(1) != d_in_) {
      throw DimensionError("kan input width mismatch");
    }
    const int n = x.dim(0);
    cached_x_ = x;
    basis_.assign(static_cast<std::size_t>(n) * d_in_ * nb_, 0.0);
    dbasis_.assign(basis_.size(), 0.0);
    silu_.assign(static_cast<std::size_t>(n) * d_in_, T(0));
    dsilu_.assign(silu_.size(), T(0));
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < d_in_; ++d) {
        const std::size_t e = static_cast<std::size_t>(i) * d_in_ + d;
        const T xv = x.data[e];
        const T s = sigmoid_val(xv);
        silu_[e] = xv * s;
        dsilu_[e] = s + xv * s * (T(1) - s);
        bspline_basis(static_cast<double>(xv), grid_, &basis_[e * nb_],
                      &dbasis_[e * nb_]);
        if (static_cast<double>(xv) < -grid_.range ||
            static_cast<double>(xv) > grid_.range) {
          for (int b = 0; b < nb_; ++b) dbasis_[e * nb_ + b] = 0.0;
        }
      }
    }
    Tensor<T> y({n, d_out_});
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d_out_; ++j) {
        double acc = 0.0;
        for (int d = 0; d < d_in_; ++d) {
          const std::size_t e = static_cast<std::size_t>(i) * d_in_ + d;
          const std::size_t w = static_cast<std::size_t>(j) * d_in_ + d;
          double spline = 0.0;
          for (int b = 0; b < nb_; ++b) {
            spline += static_cast<double>(
                          coeff_.value.data[w * nb_ + b]) *
                      basis_[e * nb_ + b];
          }
          acc += static_cast<double>(w_b_.value.data[w]) *
                     static_cast<double>(silu_[e]) +
                 static_cast<double>(w_s_.value.data[w]) * spline;
        }
        y.data[static_cast<std::size_t>(i) * d_out_ + j] = static_cast<T>(acc);
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const int n = cached_x_.dim(0);
    Tensor<T> gx({n, d_in_});
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < d_in_; ++d) {
        const std::size_t e = static_cast<std::size_t>(i) * d_in_ + d;
        double gxe = 0.0;
        for (int j = 0; j < d_out_; ++j) {
          const double g = static_cast<double>(
              gy.data[static_cast<std::size_t>(i) * d_out_ + j]);
          if (g == 0.0) continue;
          const std::size_t w = static_cast<std::size_t>(j) * d_in_ + d;
          double spline = 0.0, dspline = 0.0;
          for (int b = 0; b < nb_; ++b) {
            const double c = static_cast<double>(coeff_.value.data[w * nb_ + b]);
            spline += c * basis_[e * nb_ + b];
            dspline += c * dbasis_[e * nb_ + b];
            coeff_.grad.data[w * nb_ + b] += static_cast<T>(
                g * static_cast<double>(w_s_.value.data[w]) *
                basis_[e * nb_ + b]);
          }
          w_b_.grad.data[w] +=
              static_cast<T>(g * static_cast<double>(silu_[e]));
          w_s_.grad.data[w] += static_cast<T>(g * spline);
          gxe += g * (static_cast<double>(w_b_.value.data[w]) *
                          static_cast<double>(dsilu_[e]) +
                      static_cast<double>(w_s_.value.data[w]) * dspline);
        }
        gx.data[e] = static_cast<T>(gxe);
      }
    }
    return gx;
  }

  // L1 over spline coefficients only (Eq.-16 regularizer).
  double l1() const {
    double acc = 0.0;
    for (const T& c : coeff_.value.data) {
      acc += std::abs(static_cast<double>(c));
    }
    return acc;
  }

  // Subgradient of the L1 term; 0 at exact zeros.
  void add_l1_grad(double lambda) {
    for (std::size_t i = 0; i < coeff_.value.data.size(); ++i) {
      const T c = coeff_.value.data[i];
      if (c > T(0)) {
        coeff_.grad.data[i] += static_cast<T>(lambda);
      } else if (c < T(0)) {
        coeff_.grad.data[i] -= static_cast<T>(lambda);
      }
    }
  }

  void collect(std::vector<NamedParam<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".w_b", &w_b_});
    out.push_back({prefix + ".w_s", &w_s_});
    out.push_back({prefix + ".coeff", &coeff_});
  }

  int d_in() const { return d_in_; }
  int d_out() const { return d_out_; }
  const BsplineGrid& grid() const { return grid_; }
  Param<T>& w_b() { return w_b_; }
  Param<T>& w_s() { return w_s_; }
  Param<T>& coeff() { return coeff_; }

 private:
  int d_in_, d_out_;
  BsplineGrid grid_;
  int nb_;
  Param<T> w_b_, w_s_, coeff_;
  Tensor<T> cached_x_;
  std::vector<double> basis_, dbasis_;
  std::vector<T> silu_, dsilu_;
};

// ---------------------------------------------------------------------------
// Model assembly.

struct ArchConfig {
  std::string name = "reference";
  int in_channels = 3;
  int stem_channels = 16;
  std::vector<int> block_cb = {8, 16, 24};
  int ca_reduction = 8;
  int num_classes = 7;
  int input_size = 224;
  BsplineGrid kan_grid;

  static ArchConfig reference() { return ArchConfig{}; }

  static ArchConfig desk() {
    ArchConfig a;
    a.name = "desk";
    a.stem_channels = 8;
    a.block_cb = {4, 8};
    a.input_size = 64;
    return a;
  }
};

template <typename T>
class GacKanModel {
 public:
  GacKanModel(const ArchConfig& arch, std::uint64_t init_seed)
      : arch_(arch),
        stem_conv_(arch.in_channels, arch.stem_channels, 3, 3, 2, 1, 1, 1,
                   false, mix64(init_seed ^ 0x51)),
        stem_bn_(arch.stem_channels) {
    int c = arch.stem_channels;
    int s = (arch.input_size + 1) / 2;
    for (std::size_t i = 0; i < arch.block_cb.size(); ++i) {
      blocks_.push_back(std::make_unique<MsGacBlock<T>>(
          c, arch.block_cb[i], arch.ca_reduction,
          mix64(init_seed ^ (0x61 + static_cast<std::uint64_t>(i)))));
      c = 6 * arch.block_cb[i];
      s = (s + 1) / 2;
      if (s < 1) throw ConfigError("architecture collapses spatial dims");
    }
    feat_bn_ = std::make_unique<BatchNorm2d<T>>(c);
    kan_ = std::make_unique<KanLayer<T>>(c, arch.num_classes, arch.kan_grid,
                                         mix64(init_seed ^ 0x71));
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> h = stem_act_.forward(stem_bn_.forward(stem_conv_.forward(x), train));
    for (auto& b : blocks_) h = b->forward(h, train);
    h = gap_.forward(h);
    h = feat_bn_->forward(h, train);
    return kan_->forward(h);
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> g = feat_bn_->backward(kan_->backward(gy));
    g = gap_.backward(g);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
      g = (*it)->backward(g);
    }
    return stem_conv_.backward(stem_bn_.backward(stem_act_.backward(g)));
  }

  void fuse() {
    for (auto& b : blocks_) b->fuse();
    fused_ = true;
  }

  std::vector<NamedParam<T>> params() {
    std::vector<NamedParam<T>> out;
    stem_conv_.collect(out, "stem.conv");
    stem_bn_.collect(out, "stem.bn");
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i]->collect(out, "block" + std::to_string(i));
    }
    feat_bn_->collect(out, "feat_bn");
    kan_->collect(out, "kan");
    return out;
  }

  // Non-optimized state: batch-norm running stats and, after fusion, the
  // fused kernels/biases.
  std::vector<std::pair<std::string, Tensor<T>*>> state() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    out.push_back({"stem.bn.running_mean", &stem_bn_.running_mean()});
    out.push_back({"stem.bn.running_var", &stem_bn_.running_var()});
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i]->collect_state(out, "block" + std::to_string(i));
    }
    out.push_back({"feat_bn.running_mean", &feat_bn_->running_mean()});
    out.push_back({"feat_bn.running_var", &feat_bn_->running_var()});
    return out;
  }

  std::size_t count_params() {
    std::size_t n = 0;
    for (const auto& np : params()) n += np.param->value.numel();
    if (fused_) {
      // Fused kernels live in state; count them in place of the removed
      // branch parameters.
      for (const auto& [name, t] : state()) {
        if (name.find(".fused.") != std::string::npos) n += t->numel();
      }
    }
    return n;
  }

  double kan_l1() const { return kan_->l1(); }
  void add_kan_l1_grad(double lambda) { kan_->add_l1_grad(lambda); }

  const ArchConfig& arch() const { return arch_; }
  bool fused() const { return fused_; }
  Conv2d<T>& stem_conv() { return stem_conv_; }
  BatchNorm2d<T>& stem_bn() { return stem_bn_; }
  MsGacBlock<T>& block(int i) { return *blocks_[static_cast<std::size_t>(i)]; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  BatchNorm2d<T>& feat_bn() { return *feat_bn_; }
  KanLayer<T>& kan() { return *kan_; }

 private:
  ArchConfig arch_;
  Conv2d<T> stem_conv_;
  BatchNorm2d<T> stem_bn_;
  Silu<T> stem_act_;
  std::vector<std::unique_ptr<MsGacBlock<T>>> blocks_;
  GlobalAvgPool<T> gap_;
  std::unique_ptr<BatchNorm2d<T>> feat_bn_;
  std::unique_ptr<KanLayer<T>> kan_;
  bool fused_ = false;
};

// ---------------------------------------------------------------------------
// FLOPs accounting. Convention: 1 multiply-accumulate = 2 FLOPs; batch norm
// in eval form is a per-element multiply-add (2 FLOPs); pooling, activation
// and gating products count 1 FLOP per output element.

struct LayerFlops {
  std::string name;
  std::int64_t flops;
};

inline std::int64_t conv_flops(int cin, int cout, int kh, int kw, int groups,
                               int ho, int wo, bool bias) {
  std::int64_t macs = static_cast<std::int64_t>(cin / groups) * kh * kw * cout *
                      ho * wo;
  std::int64_t f = 2 * macs;
  if (bias) f += static_cast<std::int64_t>(cout) * ho * wo;
  return f;
}

template <typename T>
std::vector<LayerFlops> count_flops_breakdown(GacKanModel<T>& model) {
  const ArchConfig& a = model.arch();
  std::vector<LayerFlops> out;
  const bool fused = model.fused();

  int s = (a.input_size + 1) / 2;
  out.push_back({"stem.conv",
                 conv_flops(a.in_channels, a.stem_channels, 3, 3, 1, s, s,
                            false)});
  out.push_back({"stem.bn",
                 2LL * a.stem_channels * s * s});
  out.push_back({"stem.silu", 1LL * a.stem_channels * s * s});

  auto acb = [&](const std::string& name, int cin, int cout, int k, int groups,
                 int hw) {
    if (fused) {
      out.push_back(
          {name, conv_flops(cin, cout, k, k, groups, hw, hw, true)});
      return;
    }
    std::int64_t f = conv_flops(cin, cout, k, k, groups, hw, hw, false) +
                     conv_flops(cin, cout, k, 1, groups, hw, hw, false) +
                     conv_flops(cin, cout, 1, k, groups, hw, hw, false);
    f += 3LL * 2 * cout * hw * hw;  // three batch norms
    f += 2LL * cout * hw * hw;      // branch sums
    out.push_back({name, f});
  };

  int cin = a.stem_channels;
  const int kernels[3] = {3, 5, 7};
  for (std::size_t bi = 0; bi < a.block_cb.size(); ++bi) {
    const int cb = a.block_cb[bi];
    const int intrinsic = (cb + 1) / 2;
    const std::string bn = "block" + std::to_string(bi);
    for (int br = 0; br < 3; ++br) {
      const std::string pn = bn + ".k" + std::to_string(kernels[br]);
      acb(pn + ".primary", cin, intrinsic, kernels[br], 1, s);
      acb(pn + ".cheap", intrinsic, intrinsic, 3, intrinsic, s);
      // Coordinate attention: pools, bottleneck convs, sigmoid, gating.
      const int cr = std::max(8, cb / a.ca_reduction);
      std::int64_t caf = 2LL * cb * s * s;  // directional average pools
      caf += conv_flops(cb, cr, 1, 1, 1, 2 * s, 1, true);
      caf += 1LL * cr * 2 * s;  // nonlinearity
      caf += conv_flops(cr, cb, 1, 1, 1, s, 1, true) * 2;
      caf += 1LL * cb * 2 * s;      // sigmoids
      caf += 2LL * cb * s * s;      // two gating products
      out.push_back({pn + ".ca", caf});
    }
    out.push_back({bn + ".pool", 2LL * 3 * cb * s * s});
    cin = 6 * cb;
    s = (s + 1) / 2;
  }
  out.push_back({"gap", static_cast<std::int64_t>(cin)});
  out.push_back({"feat_bn", 2LL * cin});
  // KAN: per edge one base MAC plus (G + p) spline MACs.
  const std::int64_t edges =
      static_cast<std::int64_t>(cin) * a.num_classes;
  out.push_back({"kan", 2 * edges * (1 + a.kan_grid.num_basis())});
  return out;
}

template <typename T>
std::int64_t count_flops(GacKanModel<T>& model) {
  std::int64_t total = 0;
  for (const auto& lf : count_flops_breakdown(model)) total += lf.flops;
  return total;
}

}  // namespace gackan::nn

#endif  // GACKAN_MODEL_HPP
