#include "gackan/jammers.hpp"

#include <algorithm>
#include <cmath>

#include "gackan/iir.hpp"

namespace gackan::sigsynth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

void check_in_band(double freq_hz, double fs, const char* what) {
  if (!(std::abs(freq_hz) < fs / 2.0)) {
    throw ParameterError(std::string(what) + " frequency out of band: " +
                         std::to_string(freq_hz) + " Hz at fs=" +
                         std::to_string(fs));
  }
}

}  // namespace

const char* class_name(JammerClass c) {
  switch (c) {
    case JammerClass::STJ: return "STJ";
    case JammerClass::MTJ: return "MTJ";
    case JammerClass::LFM: return "LFM";
    case JammerClass::Pulse: return "Pulse";
    case JammerClass::PBNJ: return "PBNJ";
    case JammerClass::SCI: return "SCI";
    case JammerClass::None: return "None";
  }
  return "?";
}

JammerClass class_from_name(const std::string& name) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (name == class_name(static_cast<JammerClass>(i)))
      return static_cast<JammerClass>(i);
  }
  throw ParameterError("unknown jammer class: " + name);
}

ComplexSignal gen_stj(const StjParams& p, std::size_t n, double fs) {
  check_in_band(p.carrier_hz, fs, "STJ carrier");
  ComplexSignal out;
  out.sample_rate_hz = fs;
  out.samples.resize(n);
  const double w = kTwoPi * p.carrier_hz / fs;
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = std::polar(1.0, w * static_cast<double>(i) + p.phase_rad);
  }
  return out;
}

ComplexSignal gen_mtj(const MtjParams& p, std::size_t n, double fs) {
  if (p.tones.empty()) throw ParameterError("MTJ needs at least one tone");
  for (const MtjTone& t : p.tones) check_in_band(t.freq_hz, fs, "MTJ tone");
  const double min_sep = fs / static_cast<double>(n);
  for (std::size_t a = 0; a < p.tones.size(); ++a) {
    for (std::size_t b = a + 1; b < p.tones.size(); ++b) {
      if (std::abs(p.tones[a].freq_hz - p.tones[b].freq_hz) < min_sep) {
        throw ParameterError("MTJ tones closer than fs/n are unresolvable");
      }
    }
  }
  ComplexSignal out;
  out.sample_rate_hz = fs;
  out.samples.assign(n, cplx(0.0, 0.0));
  for (const MtjTone& t : p.tones) {
    const double amp = std::sqrt(t.power);
    const double w = kTwoPi * t.freq_hz / fs;
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] +=
          amp * std::polar(1.0, w * static_cast<double>(i) + t.phase_rad);
    }
  }
  return out;
}

ComplexSignal gen_lfm(const LfmParams& p, std::size_t n, double fs) {
  check_in_band(p.start_hz, fs, "LFM start");
  const double duration = static_cast<double>(n) / fs;
  const double f_end = p.start_hz + p.chirp_rate_hz_per_s * duration;
  if (!(f_end > -fs / 2.0 && f_end <= fs / 2.0)) {
    throw ParameterError("LFM sweep exits the Nyquist band");
  }
  ComplexSignal out;
  out.sample_rate_hz = fs;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double phase =
        kTwoPi * (p.start_hz * t + 0.5 * p.chirp_rate_hz_per_s * t * t);
    out.samples[i] = std::polar(1.0, phase);
  }
  return out;
}

ComplexSignal gen_pulse(const PulseParams& p, std::size_t n, double fs) {
  check_in_band(p.carrier_hz, fs, "Pulse carrier");
  if (p.pulse_count < 1) throw ParameterError("pulse_count must be >= 1");
  if (!(p.duty > 0.0 && p.duty <= 1.0)) {
    throw ParameterError("pulse duty must lie in (0, 1]");
  }
  const double pri = static_cast<double>(n) / p.pulse_count;
  if (std::llround(p.duty * pri) == 0) {
    throw ParameterError("pulse width rounds to zero samples");
  }
  ComplexSignal out = gen_stj({p.carrier_hz, p.phase_rad}, n, fs);
  const double width = p.duty * pri;
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = std::fmod(static_cast<double>(i), pri);
    if (!(phase < width)) out.samples[i] = 0.0;
  }
  return out;
}

ComplexSignal gen_pbnj(const PbnjParams& p, std::size_t n, double fs) {
  if (!(p.noise_bw_hz >= 0.10 * fs && p.noise_bw_hz <= 0.25 * fs)) {
    throw ParameterError("PBNJ bandwidth must lie in [0.10, 0.25] * fs");
  }
  if (!(std::abs(p.center_hz) + p.noise_bw_hz / 2.0 <= fs / 2.0)) {
    throw ParameterError("PBNJ band exceeds Nyquist");
  }
  ComplexSignal noise = gen_noise(n, 1.0, p.noise_seed, fs);
  const dsp::IirFilter lpf =
      dsp::butterworth_lowpass(4, p.noise_bw_hz / 2.0, fs);
  // Zero-phase application (forward + reversed pass). A single causal pass
  // leaves the 99%-energy bandwidth at roughly 1.4x B_J; two passes keep it
  // within a few percent of B_J.
  ComplexSignal filtered = dsp::filter_apply(lpf, noise);
  std::reverse(filtered.samples.begin(), filtered.samples.end());
  filtered = dsp::filter_apply(lpf, filtered);
  std::reverse(filtered.samples.begin(), filtered.samples.end());
  const double w = kTwoPi * p.center_hz / fs;
  for (std::size_t i = 0; i < n; ++i) {
    filtered.samples[i] *= std::polar(1.0, w * static_cast<double>(i));
  }
  const double power = filtered.mean_power();
  if (power <= 0.0) throw CalibrationError("PBNJ produced an all-zero signal");
  const double scale = 1.0 / std::sqrt(power);
  for (auto& s : filtered.samples) s *= scale;
  return filtered;
}

ComplexSignal gen_sci(const SciParams& p, std::size_t n, double fs) {
  if (!(std::abs(p.carrier_hz) + p.mod_index * p.mod_freq_hz < fs / 2.0)) {
    throw ParameterError("SCI frequency excursion exceeds Nyquist");
  }
  ComplexSignal out;
  out.sample_rate_hz = fs;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double phase = kTwoPi * p.carrier_hz * t +
                         p.mod_index * std::sin(kTwoPi * p.mod_freq_hz * t);
    out.samples[i] = std::polar(1.0, phase);
  }
  return out;
}

ComplexSignal gen_noise(std::size_t n, double variance, std::uint64_t seed,
                        double fs) {
  if (!(variance > 0.0)) throw ParameterError("noise variance must be > 0");
  Pcg32 rng(seed);
  const double sigma = std::sqrt(variance / 2.0);  // per I/Q component
  ComplexSignal out;
  out.sample_rate_hz = fs;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double re = sigma * rng.gaussian();
    const double im = sigma * rng.gaussian();
    out.samples[i] = {re, im};
  }
  return out;
}

ComplexSignal scale_to_jnr(const ComplexSignal& jam, double jnr_db,
                           double noise_variance) {
  const double measured = jam.mean_power();
  if (measured <= 0.0) {
    throw CalibrationError("scale_to_jnr: jamming signal has zero power");
  }
  const double target = noise_variance * std::pow(10.0, jnr_db / 10.0);
  const double scale = std::sqrt(target / measured);
  ComplexSignal out = jam;
  for (auto& s : out.samples) s *= scale;
  return out;
}

JammerParams draw_params(JammerClass cls, Pcg32& rng, double fs,
                         std::size_t n) {
  // 95% of the receiver bandwidth for carrier placement.
  const double band = 0.475 * fs;
  switch (cls) {
    case JammerClass::STJ: {
      StjParams p;
      p.carrier_hz = rng.uniform(-band, band);
      p.phase_rad = rng.uniform(0.0, kTwoPi);
      return p;
    }
    case JammerClass::MTJ: {
      MtjParams p;
      const int k = 3 + static_cast<int>(rng.bounded(3));  // {3,4,5}
      const double min_sep = fs / static_cast<double>(n);
      p.tones.resize(k);
      for (int i = 0; i < k; ++i) {
        // Resample until pairwise separation holds; bounded retries.
        for (int attempt = 0; attempt < 1000; ++attempt) {
          const double f = rng.uniform(-band, band);
          bool ok = true;
          for (int j = 0; j < i; ++j) {
            if (std::abs(p.tones[j].freq_hz - f) < min_sep) { ok = false; break; }
          }
          if (ok) { p.tones[i].freq_hz = f; break; }
        }
        p.tones[i].phase_rad = rng.uniform(0.0, kTwoPi);
        p.tones[i].power = 1.0 / k;  // equal split
      }
      return p;
    }
    case JammerClass::LFM: {
      LfmParams p;
      p.sweep_bw_hz = 0.5 * fs;  // half of the sampling rate
      p.start_hz = rng.uniform(-fs / 2.0, fs / 2.0 - p.sweep_bw_hz);
      const double duration = static_cast<double>(n) / fs;
      p.chirp_rate_hz_per_s = p.sweep_bw_hz / duration;  // one sweep per window
      return p;
    }
    case JammerClass::Pulse: {
      PulseParams p;
      p.carrier_hz = rng.uniform(-band, band);
      p.phase_rad = rng.uniform(0.0, kTwoPi);
      p.pulse_count = 6;
      p.duty = 0.3;
      return p;
    }
    case JammerClass::PBNJ: {
      PbnjParams p;
      p.noise_bw_hz = rng.uniform(0.10, 0.25) * fs;
      const double max_center = fs / 2.0 - p.noise_bw_hz / 2.0;
      p.center_hz = rng.uniform(-max_center, max_center);
      p.noise_seed = rng.next_u64();
      return p;
    }
    case JammerClass::SCI: {
      SciParams p;
      p.mod_freq_hz = rng.uniform(5.0e-4, 5.0e-3) * fs;  // 10-100 kHz at 20 MHz
      p.mod_index = rng.uniform(10.0, 50.0);
      const double excursion = p.mod_index * p.mod_freq_hz;
      const double max_carrier = band - excursion;
      p.carrier_hz = rng.uniform(-max_carrier, max_carrier);
      return p;
    }
    case JammerClass::None:
      break;
  }
  throw ParameterError("draw_params: class has no parameters");
}

ComplexSignal generate(const JammerParams& p, std::size_t n, double fs) {
  return std::visit(
      [&](const auto& v) -> ComplexSignal {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, StjParams>) return gen_stj(v, n, fs);
        else if constexpr (std::is_same_v<T, MtjParams>) return gen_mtj(v, n, fs);
        else if constexpr (std::is_same_v<T, LfmParams>) return gen_lfm(v, n, fs);
        else if constexpr (std::is_same_v<T, PulseParams>) return gen_pulse(v, n, fs);
        else if constexpr (std::is_same_v<T, PbnjParams>) return gen_pbnj(v, n, fs);
        else return gen_sci(v, n, fs);
      },
      p);
}

SampleComponents synth_sample_components(const SampleSpec& spec,
                                         const SimConfig& cfg) {
  const std::size_t n = cfg.num_samples();
  const double fs = cfg.sample_rate_hz;
  // Independent sub-streams for parameter draws and the noise realization.
  const std::uint64_t param_seed = mix64(spec.seed ^ 0ULL);
  const std::uint64_t noise_seed = mix64(spec.seed ^ 1ULL);

  SampleComponents out;
  out.noise = gen_noise(n, cfg.noise_variance, noise_seed, fs);
  if (spec.cls == JammerClass::None) {
    out.total = out.noise;
    return out;
  }
  Pcg32 param_rng(param_seed);
  const JammerParams params = draw_params(spec.cls, param_rng, fs, n);
  out.jamming =
      scale_to_jnr(generate(params, n, fs), spec.jnr_db, cfg.noise_variance);
  out.total.sample_rate_hz = fs;
  out.total.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.total.samples[i] = out.jamming.samples[i] + out.noise.samples[i];
  }
  return out;
}

ComplexSignal synth_sample(const SampleSpec& spec, const SimConfig& cfg) {
  return synth_sample_components(spec, cfg).total;
}

}  // namespace gackan::sigsynth
