#include "gackan/image.hpp"

#include <algorithm>
#include <cmath>

namespace gackan::dsp {

namespace {

// Anchor colors at t = 0, .25, .5, .75, 1. Fixed so datasets are
// bit-reproducible.
constexpr double kAnchors[5][3] = {
    {0.03, 0.09, 0.42},
    {0.08, 0.35, 0.65},
    {0.12, 0.62, 0.60},
    {0.55, 0.82, 0.35},
    {1.00, 1.00, 0.00},
};

}  // namespace

std::array<double, 3> colormap(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * 4.0;
  const int seg = std::min(static_cast<int>(pos), 3);
  const double frac = pos - seg;
  std::array<double, 3> rgb;
  for (int c = 0; c < 3; ++c) {
    rgb[c] = kAnchors[seg][c] + frac * (kAnchors[seg + 1][c] - kAnchors[seg][c]);
  }
  return rgb;
}

std::vector<float> resize_bilinear(const std::vector<float>& src, int channels,
                                   int src_h, int src_w, int dst_h, int dst_w) {
  std::vector<float> dst(static_cast<std::size_t>(channels) * dst_h * dst_w);
  const double sy_scale = static_cast<double>(src_h) / dst_h;
  const double sx_scale = static_cast<double>(src_w) / dst_w;
  for (int y = 0; y < dst_h; ++y) {
    double sy = (y + 0.5) * sy_scale - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(src_h - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < dst_w; ++x) {
      double sx = (x + 0.5) * sx_scale - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(src_w - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, src_w - 1);
      const double fx = sx - x0;
      for (int c = 0; c < channels; ++c) {
        const std::size_t sbase = static_cast<std::size_t>(c) * src_h * src_w;
        const std::size_t dbase = static_cast<std::size_t>(c) * dst_h * dst_w;
        const double v00 = src[sbase + (std::size_t)y0 * src_w + x0];
        const double v01 = src[sbase + (std::size_t)y0 * src_w + x1];
        const double v10 = src[sbase + (std::size_t)y1 * src_w + x0];
        const double v11 = src[sbase + (std::size_t)y1 * src_w + x1];
        const double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                         fy * ((1 - fx) * v10 + fx * v11);
        dst[dbase + (std::size_t)y * dst_w + x] = static_cast<float>(v);
      }
    }
  }
  return dst;
}

SpectrogramImage image_pipeline(const ComplexSignal& sig,
                                const StftConfig& cfg) {
  const Spectrogram spec = stft(sig, cfg);
  const std::vector<double> logmag = log_magnitude(spec, cfg.eps);

  double lo = logmag[0], hi = logmag[0];
  for (double v : logmag) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;

  const int src_h = spec.rows;
  const int src_w = spec.frames;
  std::vector<float> rgb(static_cast<std::size_t>(3) * src_h * src_w);
  const std::size_t plane = static_cast<std::size_t>(src_h) * src_w;
  for (std::size_t i = 0; i < plane; ++i) {
    // Zero-range log images normalize to all-zeros (degenerate rule).
    double t = range > 0.0 ? (logmag[i] - lo) / range : 0.0;
    t = std::pow(t, cfg.gamma);
    const std::array<double, 3> color = colormap(t);
    rgb[i] = static_cast<float>(color[0]);
    rgb[plane + i] = static_cast<float>(color[1]);
    rgb[2 * plane + i] = static_cast<float>(color[2]);
  }

  SpectrogramImage img;
  img.channels = 3;
  img.height = cfg.out_height;
  img.width = cfg.out_width;
  img.pixels =
      resize_bilinear(rgb, 3, src_h, src_w, cfg.out_height, cfg.out_width);
  for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

}  // namespace gackan::dsp
