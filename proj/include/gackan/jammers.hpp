#ifndef GACKAN_JAMMERS_HPP
#define GACKAN_JAMMERS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gackan/rng.hpp"
#include "gackan/signal.hpp"

namespace gackan::sigsynth {

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Stable class codes 0..6; used directly as labels.
enum class JammerClass : int {
  STJ = 0,
  MTJ = 1,
  LFM = 2,
  Pulse = 3,
  PBNJ = 4,
  SCI = 5,
  None = 6,
};

inline constexpr int kNumClasses = 7;

const char* class_name(JammerClass c);
JammerClass class_from_name(const std::string& name);

struct StjParams {
  double carrier_hz = 0.0;
  double phase_rad = 0.0;
};

struct MtjTone {
  double freq_hz = 0.0;
  double phase_rad = 0.0;
  double power = 1.0;
};

struct MtjParams {
  std::vector<MtjTone> tones;
};

struct LfmParams {
  double start_hz = 0.0;
  double chirp_rate_hz_per_s = 0.0;  // B_sweep / T_sweep
  double sweep_bw_hz = 0.0;
};

struct PulseParams {
  double carrier_hz = 0.0;
  double phase_rad = 0.0;
  int pulse_count = 6;
  double duty = 0.3;  // PW / PRI
};

struct PbnjParams {
  double noise_bw_hz = 0.0;
  double center_hz = 0.0;
  std::uint64_t noise_seed = 0;
};

struct SciParams {
  double carrier_hz = 0.0;
  double mod_freq_hz = 0.0;
  double mod_index = 0.0;
};

using JammerParams =
    std::variant<StjParams, MtjParams, LfmParams, PulseParams, PbnjParams,
                 SciParams>;

struct SampleSpec {
  JammerClass cls = JammerClass::None;
  double jnr_db = 0.0;
  std::uint64_t seed = 0;
};

struct SimConfig {
  double sample_rate_hz = 2.0e7;
  double duration_s = 1.0e-3;
  std::vector<double> jnr_grid_db = {-25, -20, -15, -10, -5, 0, 5, 10};
  int trials_per_cell = 1000;
  double noise_variance = 1.0;  // complex variance, 0.5 per I/Q component

  std::size_t num_samples() const {
    return static_cast<std::size_t>(sample_rate_hz * duration_s + 0.5);
  }
};

// Unit-mean-power generators. JNR scaling is applied afterwards by
// scale_to_jnr, so sqrt(P_J) factors are deliberately absent here.
ComplexSignal gen_stj(const StjParams& p, std::size_t n, double fs);
ComplexSignal gen_mtj(const MtjParams& p, std::size_t n, double fs);
ComplexSignal gen_lfm(const LfmParams& p, std::size_t n, double fs);
ComplexSignal gen_pulse(const PulseParams& p, std::size_t n, double fs);
ComplexSignal gen_pbnj(const PbnjParams& p, std::size_t n, double fs);
ComplexSignal gen_sci(const SciParams& p, std::size_t n, double fs);
ComplexSignal gen_noise(std::size_t n, double variance, std::uint64_t seed,
                        double fs);

// Rescales so 10*log10(mean_power / noise_variance) == jnr_db exactly.
ComplexSignal scale_to_jnr(const ComplexSignal& jam, double jnr_db,
                           double noise_variance);

// Randomized physical parameters. Ranges scale with fs so the desk-scale
// profile keeps the same relative band occupancy as the full profile.
JammerParams draw_params(JammerClass cls, Pcg32& rng, double fs,
                         std::size_t n);

ComplexSignal generate(const JammerParams& p, std::size_t n, double fs);

struct SampleComponents {
  ComplexSignal jamming;  // empty for JammerClass::None
  ComplexSignal noise;
  ComplexSignal total;
};

ComplexSignal synth_sample(const SampleSpec& spec, const SimConfig& cfg);
SampleComponents synth_sample_components(const SampleSpec& spec,
                                         const SimConfig& cfg);

}  // namespace gackan::sigsynth

#endif  // GACKAN_JAMMERS_HPP
