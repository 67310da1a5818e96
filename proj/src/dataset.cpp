#include "gackan/dataset.hpp"

#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "gackan/image.hpp"
#include "gackan/io.hpp"
#include "json.hpp"

namespace gackan::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string record_id(int class_code, int jnr_index, int trial) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_j%d_t%04d",
                lower(sigsynth::class_name(
                          static_cast<sigsynth::JammerClass>(class_code)))
                    .c_str(),
                jnr_index, trial);
  return buf;
}

json profile_to_json(const DatasetProfile& p) {
  return {{"sim",
           {{"sample_rate_hz", p.sim.sample_rate_hz},
            {"duration_s", p.sim.duration_s},
            {"jnr_grid_db", p.sim.jnr_grid_db},
            {"trials_per_cell", p.sim.trials_per_cell},
            {"noise_variance", p.sim.noise_variance}}},
          {"stft",
           {{"window_len", p.stft.window_len},
            {"hop", p.stft.hop},
            {"nfft", p.stft.nfft},
            {"eps", p.stft.eps},
            {"gamma", p.stft.gamma},
            {"out_height", p.stft.out_height},
            {"out_width", p.stft.out_width}}}};
}

DatasetProfile profile_from_json(const json& j) {
  DatasetProfile p;
  const json& s = j.at("sim");
  p.sim.sample_rate_hz = s.at("sample_rate_hz").get<double>();
  p.sim.duration_s = s.at("duration_s").get<double>();
  p.sim.jnr_grid_db = s.at("jnr_grid_db").get<std::vector<double>>();
  p.sim.trials_per_cell = s.at("trials_per_cell").get<int>();
  p.sim.noise_variance = s.at("noise_variance").get<double>();
  const json& t = j.at("stft");
  p.stft.window_len = t.at("window_len").get<int>();
  p.stft.hop = t.at("hop").get<int>();
  p.stft.nfft = t.at("nfft").get<int>();
  p.stft.eps = t.at("eps").get<double>();
  p.stft.gamma = t.at("gamma").get<double>();
  p.stft.out_height = t.at("out_height").get<int>();
  p.stft.out_width = t.at("out_width").get<int>();
  return p;
}

void synth_and_write(const std::string& dir, const SampleRecord& rec,
                     const DatasetProfile& profile, bool export_ppm) {
  sigsynth::SampleSpec spec;
  spec.cls = static_cast<sigsynth::JammerClass>(rec.class_code);
  spec.jnr_db = rec.jnr_db;
  spec.seed = rec.seed;
  const ComplexSignal sig = sigsynth::synth_sample(spec, profile.sim);
  const dsp::SpectrogramImage img = dsp::image_pipeline(sig, profile.stft);
  io::write_spt(dir + "/" + rec.path, io::spt_from_image(img));
  if (export_ppm) {
    std::string ppm = rec.path;
    ppm.replace(ppm.size() - 4, 4, ".ppm");
    io::write_ppm(dir + "/" + ppm, img);
  }
}

}  // namespace

Manifest generate_dataset(const std::string& out_dir,
                          const DatasetProfile& profile, std::uint64_t seed,
                          int parallel, bool export_ppm) {
  profile.stft.validate();
  fs::create_directories(fs::path(out_dir) / "samples");

  Manifest m;
  m.profile = profile;
  m.seed = seed;
  const int num_jnr = static_cast<int>(profile.sim.jnr_grid_db.size());
  for (int cls = 0; cls < sigsynth::kNumClasses; ++cls) {
    for (int j = 0; j < num_jnr; ++j) {
      for (int trial = 0; trial < profile.sim.trials_per_cell; ++trial) {
        SampleRecord rec;
        rec.id = record_id(cls, j, trial);
        rec.class_code = cls;
        rec.class_name =
            sigsynth::class_name(static_cast<sigsynth::JammerClass>(cls));
        rec.jnr_db = profile.sim.jnr_grid_db[static_cast<std::size_t>(j)];
        rec.seed = sample_seed(seed, cls, j, trial);
        rec.path = "samples/" + rec.id + ".spt";
        m.records.push_back(std::move(rec));
      }
    }
  }

  std::vector<std::pair<int, double>> cells;
  cells.reserve(m.records.size());
  for (const auto& r : m.records) cells.emplace_back(r.class_code, r.jnr_db);
  const train::SplitIndices split =
      train::split_dataset(cells, 0.70, 0.15, 0.15, seed);
  m.stratified = split.stratified;
  for (int i : split.train) m.records[static_cast<std::size_t>(i)].split = "train";
  for (int i : split.val) m.records[static_cast<std::size_t>(i)].split = "val";
  for (int i : split.test) m.records[static_cast<std::size_t>(i)].split = "test";

  // Every sample is a pure function of its own record, so any partition of
  // the index range over workers produces identical files.
  const int workers = std::max(1, parallel);
  std::atomic<std::size_t> next{0};
  std::vector<std::string> failures(m.records.size());
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < m.records.size();
         i = next.fetch_add(1)) {
      try {
        synth_and_write(out_dir, m.records[i], profile, export_ppm);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) {
      throw io::IoError("sample " + m.records[i].id + ": " + failures[i]);
    }
  }

  write_manifest(out_dir, m);
  return m;
}

void write_manifest(const std::string& dir, const Manifest& m) {
  json j = profile_to_json(m.profile);
  j["format_version"] = m.format_version;
  j["seed"] = m.seed;
  j["stratified"] = m.stratified;
  json records = json::array();
  for (const auto& r : m.records) {
    records.push_back({{"id", r.id},
                       {"class", r.class_name},
                       {"class_code", r.class_code},
                       {"jnr_db", r.jnr_db},
                       {"seed", r.seed},
                       {"path", r.path},
                       {"split", r.split}});
  }
  j["records"] = std::move(records);
  std::ofstream f(dir + "/manifest.json", std::ios::binary | std::ios::trunc);
  if (!f) throw io::IoError("cannot write manifest in " + dir);
  f << j.dump(2) << "\n";
  if (!f) throw io::IoError("manifest write failed in " + dir);
}

Manifest read_manifest(const std::string& dir) {
  std::ifstream f(dir + "/manifest.json", std::ios::binary);
  if (!f) throw io::IoError("cannot open manifest in " + dir);
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) throw io::FormatError("manifest is not valid JSON");
  Manifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != 1) {
    throw io::FormatError("unsupported manifest format_version");
  }
  m.profile = profile_from_json(j);
  m.seed = j.at("seed").get<std::uint64_t>();
  m.stratified = j.at("stratified").get<bool>();
  for (const auto& e : j.at("records")) {
    SampleRecord r;
    r.id = e.at("id").get<std::string>();
    r.class_name = e.at("class").get<std::string>();
    r.class_code = e.at("class_code").get<int>();
    r.jnr_db = e.at("jnr_db").get<double>();
    r.seed = e.at("seed").get<std::uint64_t>();
    r.path = e.at("path").get<std::string>();
    r.split = e.at("split").get<std::string>();
    m.records.push_back(std::move(r));
  }
  return m;
}

void validate_manifest(const std::string& dir, const Manifest& m) {
  const std::size_t expected = static_cast<std::size_t>(sigsynth::kNumClasses) *
                               m.profile.sim.jnr_grid_db.size() *
                               static_cast<std::size_t>(m.profile.sim.trials_per_cell);
  if (m.records.size() != expected) {
    throw ValidationError("manifest record count " +
                          std::to_string(m.records.size()) + ", expected " +
                          std::to_string(expected));
  }
  std::set<std::string> ids;
  std::map<std::pair<int, double>, int> cell_counts;
  for (const auto& r : m.records) {
    if (!ids.insert(r.id).second) {
      throw ValidationError("duplicate sample id: " + r.id);
    }
    if (r.class_code < 0 || r.class_code >= sigsynth::kNumClasses) {
      throw ValidationError("bad class code in record " + r.id);
    }
    if (r.class_name !=
        sigsynth::class_name(static_cast<sigsynth::JammerClass>(r.class_code))) {
      throw ValidationError("class name/code mismatch in record " + r.id);
    }
    if (r.split != "train" && r.split != "val" && r.split != "test") {
      throw ValidationError("bad split label in record " + r.id);
    }
    if (!fs::exists(fs::path(dir) / r.path)) {
      throw ValidationError("missing sample file: " + r.path);
    }
    ++cell_counts[{r.class_code, r.jnr_db}];
  }
  for (const auto& [cell, count] : cell_counts) {
    if (count != m.profile.sim.trials_per_cell) {
      throw ValidationError("cell (" + std::to_string(cell.first) + ", " +
                            std::to_string(cell.second) + ") has " +
                            std::to_string(count) + " samples, expected " +
                            std::to_string(m.profile.sim.trials_per_cell));
    }
  }
}

std::vector<train::Sample> load_samples(const std::string& dir,
                                        const Manifest& m) {
  std::vector<train::Sample> samples;
  samples.reserve(m.records.size());
  for (const auto& r : m.records) {
    const io::SptTensor t = io::read_spt(dir + "/" + r.path);
    if (t.c != 3 || t.h != m.profile.stft.out_height ||
        t.w != m.profile.stft.out_width) {
      throw ValidationError("sample " + r.id + " dims do not match manifest");
    }
    train::Sample s;
    s.image = t.data;
    s.channels = t.c;
    s.height = t.h;
    s.width = t.w;
    s.label = r.class_code;
    s.jnr_db = r.jnr_db;
    s.id = r.id;
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<int> indices_for_split(const Manifest& m,
                                   const std::string& split) {
  std::vector<int> out;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    if (m.records[i].split == split) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace gackan::dataset
