// Command-line frontend for the gackan shared library. Talks to the core
// exclusively through the C API in gackan_c.h.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "gackan_c.h"

namespace {

int fail(const char* what) {
  std::fprintf(stderr, "error: %s: %s\n", what, gk_last_error());
  return 1;
}

// Returns the file contents, or an empty string when no path was given
// (the C API treats that as "all defaults").
bool read_config(const std::string& path, std::string& out) {
  out.clear();
  if (path.empty()) return true;
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    std::fprintf(stderr, "error: cannot open config file: %s\n", path.c_str());
    return false;
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  out = ss.str();
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNSS jamming spectrogram classifier toolkit"};
  app.require_subcommand(1);

  // gen-dataset
  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 0;
  bool gen_desk = false, gen_ppm = false;
  int gen_parallel = 1;
  auto* gen = app.add_subcommand("gen-dataset",
                                 "Synthesize a labeled spectrogram dataset");
  gen->add_option("--config", gen_config, "JSON config overrides");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Dataset seed");
  gen->add_flag("--desk-scale", gen_desk, "Use the reduced desk-scale profile");
  gen->add_option("--parallel", gen_parallel, "Worker threads")
      ->check(CLI::PositiveNumber);
  gen->add_flag("--export-ppm", gen_ppm, "Also write viewable PPM images");

  // train
  std::string train_data, train_out, train_config, train_history;
  auto* train = app.add_subcommand("train", "Train a classifier on a dataset");
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Output checkpoint path")->required();
  train->add_option("--config", train_config, "JSON training config overrides");
  train->add_option("--history", train_history,
                    "Training history JSON (default <out>.history.json)");

  // eval
  std::string eval_ckpt, eval_data, eval_report;
  auto* eval = app.add_subcommand("eval",
                                  "Evaluate a checkpoint on the test split");
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--report", eval_report, "Metrics report JSON path")
      ->required();

  // fuse
  std::string fuse_in, fuse_out;
  auto* fuse = app.add_subcommand(
      "fuse", "Fold branch convolutions into single inference kernels");
  fuse->add_option("--ckpt", fuse_in, "Input checkpoint")->required();
  fuse->add_option("--out", fuse_out, "Fused checkpoint path")->required();

  // report
  std::string report_ckpt;
  auto* report = app.add_subcommand("report",
                                    "Print parameter and FLOP accounting");
  report->add_option("--ckpt", report_ckpt, "Checkpoint path")->required();

  // infer
  std::string infer_ckpt, infer_input, infer_format = "spt";
  double infer_fs = 0.0;
  auto* infer = app.add_subcommand("infer", "Classify a single input file");
  infer->add_option("--ckpt", infer_ckpt, "Checkpoint path")->required();
  infer->add_option("--input", infer_input, "Input file")->required();
  infer->add_option("--format", infer_format, "Input format: spt or iq")
      ->check(CLI::IsMember({"spt", "iq"}));
  infer->add_option("--sample-rate", infer_fs,
                    "Sample rate in Hz (iq input only)");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    std::string cfg;
    if (!read_config(gen_config, cfg)) return 1;
    if (gk_generate_dataset(gen_out.c_str(), cfg.c_str(), gen_seed,
                            gen_desk ? 1 : 0, gen_parallel,
                            gen_ppm ? 1 : 0) != GK_OK) {
      return fail("gen-dataset");
    }
    std::printf("dataset written to %s\n", gen_out.c_str());
    return 0;
  }

  if (train->parsed()) {
    std::string cfg;
    if (!read_config(train_config, cfg)) return 1;
    if (train_history.empty()) train_history = train_out + ".history.json";
    if (gk_train(train_data.c_str(), train_out.c_str(), cfg.c_str(),
                 train_history.c_str()) != GK_OK) {
      return fail("train");
    }
    std::printf("checkpoint written to %s\nhistory written to %s\n",
                train_out.c_str(), train_history.c_str());
    return 0;
  }

  if (eval->parsed()) {
    if (gk_eval(eval_ckpt.c_str(), eval_data.c_str(), eval_report.c_str()) !=
        GK_OK) {
      return fail("eval");
    }
    std::printf("report written to %s\n", eval_report.c_str());
    return 0;
  }

  if (fuse->parsed()) {
    int already = 0;
    if (gk_fuse(fuse_in.c_str(), fuse_out.c_str(), &already) != GK_OK) {
      return fail("fuse");
    }
    if (already) {
      std::fprintf(stderr,
                   "warning: checkpoint is already fused; copied unchanged\n");
    }
    std::printf("fused checkpoint written to %s\n", fuse_out.c_str());
    return 0;
  }

  if (report->parsed()) {
    char* json = nullptr;
    if (gk_report(report_ckpt.c_str(), &json) != GK_OK) return fail("report");
    std::fputs(json, stdout);
    gk_string_free(json);
    return 0;
  }

  if (infer->parsed()) {
    gk_model* model = nullptr;
    if (gk_model_load(infer_ckpt.c_str(), &model) != GK_OK) {
      return fail("infer");
    }
    char* json = nullptr;
    const gk_status st = gk_model_infer_file(
        model, infer_input.c_str(), infer_format.c_str(), infer_fs, &json);
    if (st != GK_OK) {
      gk_model_free(model);
      return fail("infer");
    }
    std::fputs(json, stdout);
    gk_string_free(json);
    gk_model_free(model);
    return 0;
  }

  return 0;
}
