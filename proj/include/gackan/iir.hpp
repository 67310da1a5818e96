#ifndef GACKAN_IIR_HPP
#define GACKAN_IIR_HPP

#include <vector>

#include "gackan/signal.hpp"

namespace gackan::dsp {

struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;  // numerator
  double a1 = 0.0, a2 = 0.0;            // denominator (a0 normalized to 1)
};

// Cascade of second-order sections with design metadata.
struct IirFilter {
  std::vector<Biquad> sections;
  int order = 0;
  double cutoff_hz = 0.0;
  double sample_rate_hz = 0.0;

  bool is_stable() const;
  // Complex frequency response H(e^{j 2 pi f / fs}).
  cplx response(double freq_hz) const;
};

// Bilinear-transform Butterworth low-pass with cutoff prewarping.
// Even order only (pairs of conjugate poles -> one biquad each).
IirFilter butterworth_lowpass(int order, double cutoff_hz, double fs);

// Causal direct-form-II-transposed cascade, zero initial state, applied
// independently to real and imaginary parts.
ComplexSignal filter_apply(const IirFilter& f, const ComplexSignal& sig);
std::vector<double> filter_apply(const IirFilter& f,
                                 const std::vector<double>& x);

}  // namespace gackan::dsp

#endif  // GACKAN_IIR_HPP
