#ifndef GACKAN_IMAGE_HPP
#define GACKAN_IMAGE_HPP

#include <array>
#include <vector>

#include "gackan/dsp.hpp"
#include "gackan/signal.hpp"

namespace gackan::dsp {

// Float image tensor, CHW layout, 3 channels, values in [0, 1].
struct SpectrogramImage {
  int channels = 3;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // channels * height * width

  float at(int c, int y, int x) const {
    return pixels[((std::size_t)c * height + y) * width + x];
  }
};

// Blue-to-yellow colormap, piecewise linear in RGB over 5 anchors.
std::array<double, 3> colormap(double t);

// Bilinear resize with half-pixel centers, per channel. src is CHW.
std::vector<float> resize_bilinear(const std::vector<float>& src, int channels,
                                   int src_h, int src_w, int dst_h, int dst_w);

// stft -> log magnitude -> min-max normalize -> gamma -> colormap ->
// bilinear resize -> clamp. A constant log image normalizes to all-zeros.
SpectrogramImage image_pipeline(const ComplexSignal& sig,
                                const StftConfig& cfg);

}  // namespace gackan::dsp

#endif  // GACKAN_IMAGE_HPP
