#include "gackan/dsp.hpp"

#include <cmath>
#include <stdexcept>

#include "gackan/fft.hpp"

namespace gackan::dsp {

namespace {
constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

void StftConfig::validate() const {
  if (hop < 1) throw std::invalid_argument("StftConfig: hop must be >= 1");
  if (nfft < window_len) {
    throw std::invalid_argument("StftConfig: nfft must be >= window_len");
  }
  if (!is_pow2(nfft)) {
    throw std::invalid_argument("StftConfig: nfft must be a power of two");
  }
  if (!(gamma > 0.0 && gamma <= 2.0)) {
    throw std::invalid_argument("StftConfig: gamma must lie in (0, 2]");
  }
  if (window_len < 2) {
    throw std::invalid_argument("StftConfig: window_len must be >= 2");
  }
  if (out_height < 1 || out_width < 1) {
    throw std::invalid_argument("StftConfig: output dims must be >= 1");
  }
}

std::vector<double> hann_window(int len) {
  if (len < 2) throw std::invalid_argument("hann_window: length must be >= 2");
  std::vector<double> w(len);
  for (int i = 0; i < len; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / (len - 1)));
  }
  return w;
}

Spectrogram stft(const ComplexSignal& sig, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t n = sig.size();
  if (n < static_cast<std::size_t>(cfg.window_len)) {
    throw std::invalid_argument("stft: signal shorter than one window");
  }
  const int frames = stft_num_frames(n, cfg);
  const std::vector<double> window = hann_window(cfg.window_len);

  Spectrogram out;
  out.rows = cfg.nfft;
  out.frames = frames;
  out.bins.resize(static_cast<std::size_t>(cfg.nfft) * frames);

  std::vector<cplx> frame(cfg.nfft);
  const int half = cfg.nfft / 2;
  for (int m = 0; m < frames; ++m) {
    const std::size_t start = static_cast<std::size_t>(m) * cfg.hop;
    for (int i = 0; i < cfg.window_len; ++i) {
      frame[i] = sig.samples[start + i] * window[i];
    }
    std::fill(frame.begin() + cfg.window_len, frame.end(), cplx(0.0, 0.0));
    fft(frame);
    // Center frequencies: row 0 = -fs/2 corresponds to FFT bin nfft/2.
    for (int k = 0; k < cfg.nfft; ++k) {
      out.at(k, m) = frame[(k + half) % cfg.nfft];
    }
  }
  return out;
}

std::vector<double> log_magnitude(const Spectrogram& spec, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("log_magnitude: eps must be > 0");
  std::vector<double> out(spec.bins.size());
  for (std::size_t i = 0; i < spec.bins.size(); ++i) {
    out[i] = 20.0 * std::log10(std::abs(spec.bins[i]) + eps);
  }
  return out;
}

}  // namespace gackan::dsp
