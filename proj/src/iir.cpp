#include "gackan/iir.hpp"

#include <cmath>
#include <stdexcept>

namespace gackan::dsp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

bool IirFilter::is_stable() const {
  // Schur-Cohn triangle for z^2 + a1 z + a2.
  for (const Biquad& s : sections) {
    if (!(std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2)) return false;
  }
  return true;
}

cplx IirFilter::response(double freq_hz) const {
  const double w = 2.0 * kPi * freq_hz / sample_rate_hz;
  const cplx z1 = std::polar(1.0, -w);   // z^-1
  const cplx z2 = z1 * z1;
  cplx h(1.0, 0.0);
  for (const Biquad& s : sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

IirFilter butterworth_lowpass(int order, double cutoff_hz, double fs) {
  if (order < 2 || order % 2 != 0) {
    throw std::invalid_argument("butterworth_lowpass: even order >= 2 required");
  }
  if (!(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0)) {
    throw std::invalid_argument(
        "butterworth_lowpass: cutoff must lie in (0, fs/2)");
  }

  // Prewarped analog cutoff (normalized, bilinear with T = 1 absorbed).
  const double wa = std::tan(kPi * cutoff_hz / fs);

  IirFilter f;
  f.order = order;
  f.cutoff_hz = cutoff_hz;
  f.sample_rate_hz = fs;

  const int pairs = order / 2;
  for (int k = 0; k < pairs; ++k) {
    // Normalized analog section s^2 + a s + 1 with a = 2 sin(theta).
    const double theta = kPi * (2.0 * k + 1.0) / (2.0 * order);
    const double a = 2.0 * std::sin(theta);

    const double w2 = wa * wa;
    const double d0 = 1.0 + a * wa + w2;
    Biquad s;
    s.b0 = w2 / d0;
    s.b1 = 2.0 * w2 / d0;
    s.b2 = w2 / d0;
    s.a1 = (2.0 * w2 - 2.0) / d0;
    s.a2 = (1.0 - a * wa + w2) / d0;
    f.sections.push_back(s);
  }
  return f;
}

std::vector<double> filter_apply(const IirFilter& f,
                                 const std::vector<double>& x) {
  std::vector<double> y = x;
  for (const Biquad& s : f.sections) {
    double s1 = 0.0, s2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + s1;
      s1 = s.b1 * in - s.a1 * out + s2;
      s2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

ComplexSignal filter_apply(const IirFilter& f, const ComplexSignal& sig) {
  const std::size_t n = sig.size();
  std::vector<double> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = sig.samples[i].real();
    im[i] = sig.samples[i].imag();
  }
  re = filter_apply(f, re);
  im = filter_apply(f, im);
  ComplexSignal out;
  out.sample_rate_hz = sig.sample_rate_hz;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = {re[i], im[i]};
  return out;
}

}  // namespace gackan::dsp
