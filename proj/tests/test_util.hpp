#ifndef GACKAN_TEST_UTIL_HPP
#define GACKAN_TEST_UTIL_HPP

#include <cmath>
#include <complex>
#include <vector>

#include "gackan/signal.hpp"

namespace testutil {

inline constexpr double kPi = 3.14159265358979323846;

// Brute-force O(N^2) DFT, independent of the library FFT path.
inline std::vector<std::complex<double>> naive_dft(
    const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * kPi * static_cast<double>(k) *
                         static_cast<double>(i) / static_cast<double>(n);
      acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Phase-difference instantaneous frequency estimate at sample midpoints,
// in Hz. Valid while the per-sample phase increment stays below pi.
inline std::vector<double> inst_freq(const gackan::ComplexSignal& sig) {
  std::vector<double> f;
  f.reserve(sig.size() > 0 ? sig.size() - 1 : 0);
  for (std::size_t i = 0; i + 1 < sig.size(); ++i) {
    const std::complex<double> r =
        sig.samples[i + 1] * std::conj(sig.samples[i]);
    f.push_back(std::arg(r) / (2.0 * kPi) * sig.sample_rate_hz);
  }
  return f;
}

inline double max_abs_diff(const std::vector<std::complex<double>>& a,
                           const std::vector<std::complex<double>>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace testutil

#endif
