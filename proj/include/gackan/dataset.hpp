#ifndef GACKAN_DATASET_HPP
#define GACKAN_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gackan/dsp.hpp"
#include "gackan/jammers.hpp"
#include "gackan/train.hpp"

namespace gackan::dataset {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetProfile {
  sigsynth::SimConfig sim;
  dsp::StftConfig stft;

  static DatasetProfile full() { return {}; }

  static DatasetProfile desk() {
    DatasetProfile p;
    p.sim.sample_rate_hz = 2.0e6;
    p.sim.jnr_grid_db = {0.0, 5.0, 10.0};
    p.sim.trials_per_cell = 60;
    p.stft = dsp::StftConfig::desk_scale();
    return p;
  }
};

struct SampleRecord {
  std::string id;
  int class_code = 0;
  std::string class_name;
  double jnr_db = 0.0;
  std::uint64_t seed = 0;
  std::string path;  // relative to the dataset directory
  std::string split;
};

struct Manifest {
  int format_version = 1;
  DatasetProfile profile;
  std::uint64_t seed = 0;
  bool stratified = true;
  std::vector<SampleRecord> records;
};

// Per-sample seed, a pure function of (dataset seed, class, jnr index, trial)
// so generation order and parallelism cannot change any sample.
inline std::uint64_t sample_seed(std::uint64_t dataset_seed, int class_code,
                                 int jnr_index, int trial) {
  return mix_seed(dataset_seed, static_cast<std::uint64_t>(class_code),
                  static_cast<std::uint64_t>(jnr_index),
                  static_cast<std::uint64_t>(trial));
}

// Synthesizes every (class, jnr, trial) cell, writes one SptTensorFile per
// sample plus manifest.json. Output is identical for any parallel value.
Manifest generate_dataset(const std::string& out_dir,
                          const DatasetProfile& profile, std::uint64_t seed,
                          int parallel = 1, bool export_ppm = false);

void write_manifest(const std::string& dir, const Manifest& m);
Manifest read_manifest(const std::string& dir);

// Counts, id uniqueness, file presence. Throws ValidationError.
void validate_manifest(const std::string& dir, const Manifest& m);

std::vector<train::Sample> load_samples(const std::string& dir,
                                        const Manifest& m);

std::vector<int> indices_for_split(const Manifest& m, const std::string& split);

}  // namespace gackan::dataset

#endif  // GACKAN_DATASET_HPP
