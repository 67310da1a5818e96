#ifndef GACKAN_SIGNAL_HPP
#define GACKAN_SIGNAL_HPP

#include <complex>
#include <vector>

namespace gackan {

using cplx = std::complex<double>;

// Sampled complex-baseband IQ sequence.
struct ComplexSignal {
  std::vector<cplx> samples;
  double sample_rate_hz = 0.0;

  std::size_t size() const { return samples.size(); }

  double mean_power() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (const cplx& s : samples) acc += std::norm(s);
    return acc / static_cast<double>(samples.size());
  }
};

}  // namespace gackan

#endif  // GACKAN_SIGNAL_HPP
