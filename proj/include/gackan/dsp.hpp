#ifndef GACKAN_DSP_HPP
#define GACKAN_DSP_HPP

#include <cstddef>
#include <vector>

#include "gackan/signal.hpp"

namespace gackan::dsp {

struct StftConfig {
  int window_len = 128;
  int hop = 10;
  int nfft = 4096;
  double eps = 1e-10;
  double gamma = 0.9;
  int out_height = 224;
  int out_width = 224;

  void validate() const;

  static StftConfig desk_scale() {
    StftConfig c;
    c.window_len = 64;
    c.hop = 8;
    c.nfft = 256;
    c.out_height = 64;
    c.out_width = 64;
    return c;
  }
};

// Frequency-centered STFT matrix: rows = nfft frequency bins with row 0 at
// -fs/2, columns = M time frames. Row-major bins[k * frames + m].
struct Spectrogram {
  int rows = 0;    // nfft
  int frames = 0;  // M
  std::vector<cplx> bins;

  const cplx& at(int k, int m) const { return bins[(std::size_t)k * frames + m]; }
  cplx& at(int k, int m) { return bins[(std::size_t)k * frames + m]; }
};

std::vector<double> hann_window(int len);

Spectrogram stft(const ComplexSignal& sig, const StftConfig& cfg);

// 20*log10(|bins| + eps), same layout as Spectrogram::bins.
std::vector<double> log_magnitude(const Spectrogram& spec, double eps);

inline int stft_num_frames(std::size_t n, const StftConfig& cfg) {
  return static_cast<int>((n - cfg.window_len) / cfg.hop) + 1;
}

}  // namespace gackan::dsp

#endif  // GACKAN_DSP_HPP
