#include "gackan_c.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <exception>
#include <string>
#include <vector>

#include "gackan/dataset.hpp"
#include "gackan/image.hpp"
#include "gackan/io.hpp"
#include "gackan/jammers.hpp"
#include "gackan/train.hpp"
#include "json.hpp"

using nlohmann::json;
using namespace gackan;

namespace {

thread_local std::string g_last_error = "no error";

template <typename F>
gk_status wrap(F&& f) {
  try {
    f();
    return GK_OK;
  } catch (const sigsynth::ParameterError& e) {
    g_last_error = e.what();
    return GK_ERR_INVALID_ARGUMENT;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return GK_ERR_INVALID_ARGUMENT;
  } catch (const io::FormatError& e) {
    g_last_error = e.what();
    return GK_ERR_FORMAT;
  } catch (const dataset::ValidationError& e) {
    g_last_error = e.what();
    return GK_ERR_VALIDATION;
  } catch (const nn::TrainingError& e) {
    g_last_error = e.what();
    return GK_ERR_TRAINING;
  } catch (const io::IoError& e) {
    g_last_error = e.what();
    return GK_ERR_IO;
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return GK_ERR_FORMAT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GK_ERR_INTERNAL;
  }
}

json parse_config(const char* config_json) {
  if (config_json == nullptr || config_json[0] == '\0') return json::object();
  json j = json::parse(config_json, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw std::invalid_argument("config must be a flat JSON object");
  }
  return j;
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

dataset::DatasetProfile profile_from_config(const json& cfg, bool desk_scale) {
  dataset::DatasetProfile p = desk_scale ? dataset::DatasetProfile::desk()
                                         : dataset::DatasetProfile::full();
  if (cfg.contains("sample_rate_hz")) p.sim.sample_rate_hz = cfg.at("sample_rate_hz").get<double>();
  if (cfg.contains("duration_s")) p.sim.duration_s = cfg.at("duration_s").get<double>();
  if (cfg.contains("jnr_grid_db")) p.sim.jnr_grid_db = cfg.at("jnr_grid_db").get<std::vector<double>>();
  if (cfg.contains("trials_per_cell")) p.sim.trials_per_cell = cfg.at("trials_per_cell").get<int>();
  if (cfg.contains("noise_variance")) p.sim.noise_variance = cfg.at("noise_variance").get<double>();
  if (cfg.contains("window_len")) p.stft.window_len = cfg.at("window_len").get<int>();
  if (cfg.contains("hop")) p.stft.hop = cfg.at("hop").get<int>();
  if (cfg.contains("nfft")) p.stft.nfft = cfg.at("nfft").get<int>();
  if (cfg.contains("eps")) p.stft.eps = cfg.at("eps").get<double>();
  if (cfg.contains("gamma")) p.stft.gamma = cfg.at("gamma").get<double>();
  if (cfg.contains("out_height")) p.stft.out_height = cfg.at("out_height").get<int>();
  if (cfg.contains("out_width")) p.stft.out_width = cfg.at("out_width").get<int>();
  return p;
}

train::TrainConfig train_config_from_json(const json& cfg) {
  train::TrainConfig tc;
  if (cfg.contains("epochs")) tc.epochs = cfg.at("epochs").get<int>();
  if (cfg.contains("batch_size")) tc.batch_size = cfg.at("batch_size").get<int>();
  if (cfg.contains("mixup_alpha")) tc.mixup_alpha = cfg.at("mixup_alpha").get<double>();
  if (cfg.contains("label_smoothing")) tc.label_smoothing = cfg.at("label_smoothing").get<double>();
  if (cfg.contains("kan_l1_lambda")) tc.kan_l1_lambda = cfg.at("kan_l1_lambda").get<double>();
  if (cfg.contains("base_lr")) tc.schedule.base_lr = cfg.at("base_lr").get<double>();
  if (cfg.contains("warmup_epochs")) tc.schedule.warmup_epochs = cfg.at("warmup_epochs").get<int>();
  if (cfg.contains("min_lr")) tc.schedule.min_lr = cfg.at("min_lr").get<double>();
  if (cfg.contains("weight_decay")) tc.weight_decay = cfg.at("weight_decay").get<double>();
  if (cfg.contains("seed")) tc.seed = cfg.at("seed").get<std::uint64_t>();
  tc.schedule.total_epochs = tc.epochs;
  return tc;
}

json train_config_to_json(const train::TrainConfig& tc) {
  return {{"epochs", tc.epochs},
          {"batch_size", tc.batch_size},
          {"mixup_alpha", tc.mixup_alpha},
          {"label_smoothing", tc.label_smoothing},
          {"kan_l1_lambda", tc.kan_l1_lambda},
          {"base_lr", tc.schedule.base_lr},
          {"warmup_epochs", tc.schedule.warmup_epochs},
          {"min_lr", tc.schedule.min_lr},
          {"weight_decay", tc.weight_decay},
          {"seed", tc.seed}};
}

// Desk-sized inputs get the desk architecture, 224-inputs the reference one;
// either way input_size follows the dataset images.
nn::ArchConfig arch_for(const json& cfg, int image_size) {
  std::string name = image_size >= 224 ? "reference" : "desk";
  if (cfg.contains("arch")) name = cfg.at("arch").get<std::string>();
  nn::ArchConfig arch;
  if (name == "reference") {
    arch = nn::ArchConfig::reference();
  } else if (name == "desk") {
    arch = nn::ArchConfig::desk();
  } else {
    throw std::invalid_argument("unknown arch: " + name);
  }
  arch.input_size = image_size;
  return arch;
}

train::Model model_from_checkpoint(const io::Checkpoint& ck) {
  train::Model model(io::arch_from_checkpoint(ck), 0);
  if (io::checkpoint_is_fused(ck)) model.fuse();
  io::load_model(model, ck);
  return model;
}

std::string report_base(const std::string& report_path) {
  const std::string suffix = ".json";
  if (report_path.size() > suffix.size() &&
      report_path.compare(report_path.size() - suffix.size(), suffix.size(),
                          suffix) == 0) {
    return report_path.substr(0, report_path.size() - suffix.size());
  }
  return report_path;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io::IoError("cannot open for writing: " + path);
  f << text;
  if (!f) throw io::IoError("write failed: " + path);
}

std::vector<std::string> class_labels() {
  std::vector<std::string> out;
  for (int i = 0; i < sigsynth::kNumClasses; ++i) {
    out.push_back(sigsynth::class_name(static_cast<sigsynth::JammerClass>(i)));
  }
  return out;
}

dsp::StftConfig stft_from_header(const json& header, int input_size) {
  dsp::StftConfig cfg = input_size <= 64 ? dsp::StftConfig::desk_scale()
                                         : dsp::StftConfig();
  cfg.out_height = input_size;
  cfg.out_width = input_size;
  if (header.contains("stft")) {
    const json& t = header.at("stft");
    cfg.window_len = t.at("window_len").get<int>();
    cfg.hop = t.at("hop").get<int>();
    cfg.nfft = t.at("nfft").get<int>();
    cfg.eps = t.at("eps").get<double>();
    cfg.gamma = t.at("gamma").get<double>();
    cfg.out_height = t.at("out_height").get<int>();
    cfg.out_width = t.at("out_width").get<int>();
  }
  return cfg;
}

}  // namespace

struct gk_model {
  train::Model model;
  json header;
};

extern "C" {

const char* gk_last_error(void) { return g_last_error.c_str(); }

void gk_string_free(char* s) { delete[] s; }

gk_status gk_generate_dataset(const char* out_dir, const char* config_json,
                              uint64_t seed, int desk_scale, int parallel,
                              int export_ppm) {
  return wrap([&] {
    require(out_dir != nullptr, "out_dir is required");
    const dataset::DatasetProfile profile =
        profile_from_config(parse_config(config_json), desk_scale != 0);
    dataset::generate_dataset(out_dir, profile, seed, parallel,
                              export_ppm != 0);
  });
}

gk_status gk_train(const char* data_dir, const char* ckpt_out,
                   const char* config_json, const char* history_out) {
  return wrap([&] {
    require(data_dir != nullptr, "data_dir is required");
    require(ckpt_out != nullptr, "ckpt_out is required");
    const json cfg = parse_config(config_json);
    const dataset::Manifest m = dataset::read_manifest(data_dir);
    dataset::validate_manifest(data_dir, m);
    require(m.profile.stft.out_height == m.profile.stft.out_width,
            "training requires square images");

    const std::vector<train::Sample> samples =
        dataset::load_samples(data_dir, m);
    const std::vector<int> train_idx = dataset::indices_for_split(m, "train");
    const std::vector<int> val_idx = dataset::indices_for_split(m, "val");
    require(!train_idx.empty() && !val_idx.empty(),
            "dataset has empty train or val split");

    const train::TrainConfig tc = train_config_from_json(cfg);
    const nn::ArchConfig arch = arch_for(cfg, m.profile.stft.out_height);
    train::Model model(arch, mix_seed(tc.seed, 0x494e4954, 0, 0));
    const train::FitResult fit = train::fit(model, samples, train_idx, val_idx, tc);

    json header;
    header["train_config"] = train_config_to_json(tc);
    header["epoch"] = fit.best_epoch;
    header["val_accuracy"] = fit.best_val_accuracy;
    header["stft"] = {{"window_len", m.profile.stft.window_len},
                      {"hop", m.profile.stft.hop},
                      {"nfft", m.profile.stft.nfft},
                      {"eps", m.profile.stft.eps},
                      {"gamma", m.profile.stft.gamma},
                      {"out_height", m.profile.stft.out_height},
                      {"out_width", m.profile.stft.out_width}};
    io::write_checkpoint(ckpt_out,
                         io::checkpoint_from_model(model, header.dump()));

    if (history_out != nullptr) {
      json hist = json::array();
      for (const auto& e : fit.history) {
        hist.push_back({{"epoch", e.epoch},
                        {"lr", e.lr},
                        {"train_loss", e.train_loss},
                        {"val_accuracy", e.val_accuracy}});
      }
      json report = {{"best_epoch", fit.best_epoch},
                     {"best_val_accuracy", fit.best_val_accuracy},
                     {"train_config", train_config_to_json(tc)},
                     {"history", std::move(hist)}};
      write_text(history_out, report.dump(2) + "\n");
    }
  });
}

gk_status gk_eval(const char* ckpt_path, const char* data_dir,
                  const char* report_path) {
  return wrap([&] {
    require(ckpt_path != nullptr, "ckpt_path is required");
    require(data_dir != nullptr, "data_dir is required");
    require(report_path != nullptr, "report_path is required");

    train::Model model = model_from_checkpoint(io::read_checkpoint(ckpt_path));
    const dataset::Manifest m = dataset::read_manifest(data_dir);
    dataset::validate_manifest(data_dir, m);
    require(m.profile.stft.out_height == model.arch().input_size,
            "dataset image size does not match the checkpoint");

    const std::vector<train::Sample> samples =
        dataset::load_samples(data_dir, m);
    const std::vector<int> test_idx = dataset::indices_for_split(m, "test");
    require(!test_idx.empty(), "dataset has no test split");
    const train::Metrics metrics = train::evaluate(model, samples, test_idx);

    json per_jnr = json::array();
    std::vector<double> jnr_x, jnr_y;
    for (const auto& [jnr, acc] : metrics.per_jnr_accuracy) {
      per_jnr.push_back({{"jnr_db", jnr},
                         {"accuracy", acc},
                         {"count", metrics.per_jnr_count.at(jnr)}});
      jnr_x.push_back(jnr);
      jnr_y.push_back(acc);
    }
    json report = {{"overall_accuracy", metrics.overall_accuracy},
                   {"total", metrics.total},
                   {"classes", class_labels()},
                   {"confusion", metrics.confusion},
                   {"confusion_layout", "rows = predicted, cols = true"},
                   {"per_jnr", std::move(per_jnr)},
                   {"checkpoint", ckpt_path}};
    write_text(report_path, report.dump(2) + "\n");

    const std::string base = report_base(report_path);
    io::write_line_plot_svg(base + ".jnr.svg", jnr_x, jnr_y,
                            "accuracy vs JNR", "JNR (dB)", "accuracy");
    io::write_heatmap_svg(base + ".confusion.svg", metrics.confusion,
                          class_labels(), "confusion matrix");
  });
}

gk_status gk_fuse(const char* ckpt_in, const char* ckpt_out,
                  int* already_fused) {
  return wrap([&] {
    require(ckpt_in != nullptr, "ckpt_in is required");
    require(ckpt_out != nullptr, "ckpt_out is required");
    const io::Checkpoint ck = io::read_checkpoint(ckpt_in);
    if (already_fused != nullptr) *already_fused = 0;
    if (io::checkpoint_is_fused(ck)) {
      if (already_fused != nullptr) *already_fused = 1;
      io::write_checkpoint(ckpt_out, ck);
      return;
    }
    train::Model model = model_from_checkpoint(ck);
    model.fuse();
    json header = json::parse(ck.header_json);
    header.erase("tensors");
    io::write_checkpoint(ckpt_out,
                         io::checkpoint_from_model(model, header.dump()));
  });
}

gk_status gk_report(const char* ckpt_path, char** json_out) {
  return wrap([&] {
    require(ckpt_path != nullptr, "ckpt_path is required");
    require(json_out != nullptr, "json_out is required");
    train::Model model = model_from_checkpoint(io::read_checkpoint(ckpt_path));
    json layers = json::array();
    std::int64_t total = 0;
    for (const auto& lf : nn::count_flops_breakdown(model)) {
      layers.push_back({{"name", lf.name}, {"flops", lf.flops}});
      total += lf.flops;
    }
    json report = {{"arch", model.arch().name},
                   {"input_size", model.arch().input_size},
                   {"fused", model.fused()},
                   {"params", model.count_params()},
                   {"flops", total},
                   {"per_layer", std::move(layers)}};
    *json_out = dup_string(report.dump(2) + "\n");
  });
}

gk_status gk_model_load(const char* ckpt_path, gk_model** out) {
  return wrap([&] {
    require(ckpt_path != nullptr, "ckpt_path is required");
    require(out != nullptr, "out is required");
    const io::Checkpoint ck = io::read_checkpoint(ckpt_path);
    *out = new gk_model{model_from_checkpoint(ck), json::parse(ck.header_json)};
  });
}

void gk_model_free(gk_model* model) { delete model; }

gk_status gk_model_infer_file(gk_model* model, const char* input_path,
                              const char* format, double sample_rate_hz,
                              char** json_out) {
  return wrap([&] {
    require(model != nullptr, "model is required");
    require(input_path != nullptr, "input_path is required");
    require(format != nullptr, "format is required");
    require(json_out != nullptr, "json_out is required");

    const int size = model->model.arch().input_size;
    io::SptTensor input;
    if (std::string(format) == "spt") {
      input = io::read_spt(input_path);
    } else if (std::string(format) == "iq") {
      require(sample_rate_hz > 0.0, "iq input needs a positive sample rate");
      const ComplexSignal sig = io::read_iq(input_path, sample_rate_hz);
      const dsp::StftConfig cfg = stft_from_header(model->header, size);
      input = io::spt_from_image(dsp::image_pipeline(sig, cfg));
    } else {
      throw std::invalid_argument("format must be \"spt\" or \"iq\"");
    }
    require(input.c == 3 && input.h == size && input.w == size,
            "input dims do not match the model");

    nn::Tensor<float> x({1, input.c, input.h, input.w});
    x.data = input.data;
    const nn::Tensor<float> logits = model->model.forward(x, false);

    double maxv = logits.data[0];
    for (float v : logits.data) maxv = std::max<double>(maxv, v);
    std::vector<double> probs(logits.data.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      probs[i] = std::exp(static_cast<double>(logits.data[i]) - maxv);
      sum += probs[i];
    }
    int best = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      probs[i] /= sum;
      if (probs[i] > probs[static_cast<std::size_t>(best)]) {
        best = static_cast<int>(i);
      }
    }
    json result = {
        {"class",
         sigsynth::class_name(static_cast<sigsynth::JammerClass>(best))},
        {"class_code", best},
        {"probabilities", probs}};
    *json_out = dup_string(result.dump(2) + "\n");
  });
}

}  // extern "C"
