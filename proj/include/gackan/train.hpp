#ifndef GACKAN_TRAIN_HPP
#define GACKAN_TRAIN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gackan/model.hpp"
#include "gackan/optim.hpp"

namespace gackan::train {

using Model = nn::GacKanModel<float>;

struct Sample {
  std::vector<float> image;  // CHW, values in [0,1]
  int channels = 3;
  int height = 0;
  int width = 0;
  int label = 0;
  double jnr_db = 0.0;
  std::string id;
};

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
  bool stratified = true;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double mixup_alpha = 1.0;
  double label_smoothing = 0.1;
  double kan_l1_lambda = 1e-5;
  nn::LrSchedule schedule;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct FitResult {
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  std::vector<EpochRecord> history;
};

struct Metrics {
  double overall_accuracy = 0.0;
  // confusion[pred][true]
  std::vector<std::vector<int>> confusion;
  std::map<double, double> per_jnr_accuracy;
  std::map<double, int> per_jnr_count;
  int total = 0;
};

// Stratified 70/15/15 split over (class, jnr) cells. Falls back to a global
// shuffle (stratified = false) when any cell is too small to split.
SplitIndices split_dataset(const std::vector<std::pair<int, double>>& cells,
                           double r_train, double r_val, double r_test,
                           std::uint64_t seed);

struct MixupResult {
  double lambda = 1.0;
  std::vector<int> partner;  // permutation over the batch
};

// Mixes the batch in place: x := lambda * x + (1 - lambda) * x[perm].
MixupResult mixup(nn::Tensor<float>& batch, double alpha, Pcg32& rng);

// Mean label-smoothed cross entropy over the batch. grad, when non-null,
// receives d(loss)/d(logits).
double smooth_ce(const nn::Tensor<float>& logits,
                 const std::vector<int>& targets, double smoothing,
                 nn::Tensor<float>* grad = nullptr);

double total_loss(const nn::Tensor<float>& logits, double lambda_mix,
                  const std::vector<int>& targets_a,
                  const std::vector<int>& targets_b, double smoothing,
                  double l1_lambda, const Model& model,
                  nn::Tensor<float>* grad = nullptr);

FitResult fit(Model& model, const std::vector<Sample>& samples,
              const std::vector<int>& train_idx,
              const std::vector<int>& val_idx, const TrainConfig& cfg);

Metrics evaluate(Model& model, const std::vector<Sample>& samples,
                 const std::vector<int>& idx, int batch_size = 32);

}  // namespace gackan::train

#endif  // GACKAN_TRAIN_HPP
