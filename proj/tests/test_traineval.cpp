#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <vector>

#include "doctest.h"
#include "gackan/train.hpp"

using namespace gackan;
using namespace gackan::train;

namespace {

std::vector<std::pair<int, double>> make_cells(int classes, int jnrs,
                                               int trials) {
  std::vector<std::pair<int, double>> cells;
  for (int c = 0; c < classes; ++c) {
    for (int j = 0; j < jnrs; ++j) {
      for (int t = 0; t < trials; ++t) {
        cells.push_back({c, 5.0 * j});
      }
    }
  }
  return cells;
}

// Tiny synthetic classification set: class-dependent blob position plus
// deterministic noise, on a small desk-style model input.
std::vector<Sample> make_synthetic(int per_class, int size,
                                   std::uint64_t seed) {
  std::vector<Sample> out;
  Pcg32 rng(seed);
  for (int c = 0; c < 7; ++c) {
    for (int t = 0; t < per_class; ++t) {
      Sample s;
      s.channels = 3;
      s.height = size;
      s.width = size;
      s.label = c;
      s.jnr_db = 5.0 * (t % 3);
      s.id = "syn_" + std::to_string(c) + "_" + std::to_string(t);
      s.image.assign(static_cast<std::size_t>(3 * size * size), 0.0f);
      const int row = (c * size) / 7;
      for (int ch = 0; ch < 3; ++ch) {
        for (int x = 0; x < size; ++x) {
          s.image[static_cast<std::size_t>((ch * size + row) * size + x)] =
              1.0f;
        }
      }
      for (auto& v : s.image) {
        v += 0.05f * static_cast<float>(rng.uniform());
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  return idx;
}

}  // namespace

TEST_CASE("split_dataset stratifies the full-protocol counts") {
  auto cells = make_cells(7, 8, 1000);
  REQUIRE(cells.size() == 56000);
  auto s = split_dataset(cells, 0.70, 0.15, 0.15, 17);
  CHECK(s.stratified);
  CHECK(s.train.size() == 39200);
  CHECK(s.val.size() == 8400);
  CHECK(s.test.size() == 8400);

  // Per-cell counts are exactly 700/150/150.
  std::map<std::pair<int, double>, int> tr_count;
  for (int i : s.train) tr_count[cells[static_cast<std::size_t>(i)]] += 1;
  for (const auto& [key, n] : tr_count) CHECK(n == 700);
}

TEST_CASE("split_dataset partitions without overlap") {
  auto cells = make_cells(7, 3, 60);
  auto s = split_dataset(cells, 0.70, 0.15, 0.15, 5);
  CHECK(s.train.size() == 882);
  CHECK(s.val.size() == 189);
  CHECK(s.test.size() == 189);
  std::set<int> seen;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (int i : *part) {
      CHECK(seen.insert(i).second);
    }
  }
  CHECK(seen.size() == cells.size());

  auto s2 = split_dataset(cells, 0.70, 0.15, 0.15, 5);
  CHECK(s2.train == s.train);
  CHECK(s2.val == s.val);
  CHECK(s2.test == s.test);
}

TEST_CASE("split_dataset falls back on tiny cells") {
  auto cells = make_cells(7, 3, 2);
  auto s = split_dataset(cells, 0.70, 0.15, 0.15, 5);
  CHECK_FALSE(s.stratified);
  CHECK(s.train.size() + s.val.size() + s.test.size() == cells.size());
  CHECK_THROWS(split_dataset(cells, 0.5, 0.2, 0.2, 5));
}

TEST_CASE("mixup is the declared convex combination") {
  Pcg32 rng(23);
  nn::Tensor<float> x({4, 2, 3, 3});
  for (auto& v : x.data) v = static_cast<float>(rng.uniform());
  nn::Tensor<float> orig = x;
  Pcg32 mrng(24);
  auto r = mixup(x, 1.0, mrng);
  CHECK(r.lambda >= 0.0);
  CHECK(r.lambda <= 1.0);
  const std::size_t stride = x.numel() / 4;
  for (int i = 0; i < 4; ++i) {
    for (std::size_t p = 0; p < stride; ++p) {
      const float expect =
          static_cast<float>(r.lambda) *
              orig.data[static_cast<std::size_t>(i) * stride + p] +
          static_cast<float>(1.0 - r.lambda) *
              orig.data[static_cast<std::size_t>(
                            r.partner[static_cast<std::size_t>(i)]) *
                            stride +
                        p];
      CHECK(std::abs(x.data[static_cast<std::size_t>(i) * stride + p] -
                     expect) < 1e-7);
    }
  }
  // Partner is a permutation.
  std::set<int> perm(r.partner.begin(), r.partner.end());
  CHECK(perm.size() == 4);
}

TEST_CASE("mixup of identical inputs is a fixed point") {
  nn::Tensor<float> x({3, 1, 2, 2});
  x.fill(0.42f);
  Pcg32 rng(25);
  mixup(x, 1.0, rng);
  for (float v : x.data) CHECK(v == doctest::Approx(0.42f));
}

TEST_CASE("smooth_ce closed-form values") {
  nn::Tensor<float> logits({1, 7});
  logits.fill(0.3f);
  CHECK(smooth_ce(logits, {2}, 0.0) ==
        doctest::Approx(std::log(7.0)).epsilon(1e-6));

  nn::Tensor<float> confident({1, 7});
  confident.fill(-40.0f);
  confident.data[3] = 40.0f;
  CHECK(smooth_ce(confident, {3}, 0.0) < 1e-6);
}

TEST_CASE("smooth_ce matches a naive reference and softmax-minus-target grad") {
  Pcg32 rng(26);
  nn::Tensor<float> logits({3, 7});
  for (auto& v : logits.data) v = static_cast<float>(2.0 * rng.uniform() - 1.0);
  const std::vector<int> targets = {1, 6, 0};
  const double eps = 0.1;
  nn::Tensor<float> grad(logits.shape);
  const double loss = smooth_ce(logits, targets, eps, &grad);

  double ref = 0.0;
  for (int i = 0; i < 3; ++i) {
    double z = 0.0;
    for (int j = 0; j < 7; ++j) {
      z += std::exp(static_cast<double>(
          logits.data[static_cast<std::size_t>(i) * 7 + j]));
    }
    for (int j = 0; j < 7; ++j) {
      const double t = (j == targets[static_cast<std::size_t>(i)] ? 0.9 : 0.0) +
                       eps / 7.0;
      const double p = std::exp(static_cast<double>(
                           logits.data[static_cast<std::size_t>(i) * 7 + j])) /
                       z;
      ref -= t * std::log(p);
      CHECK(std::abs(grad.data[static_cast<std::size_t>(i) * 7 + j] -
                     (p - t) / 3.0) < 1e-6);
    }
  }
  CHECK(std::abs(loss - ref / 3.0) < 1e-6);
}

TEST_CASE("total_loss composes mixup terms and the kan regularizer") {
  Model model(nn::ArchConfig::desk(), 55);
  model.kan().coeff().value.fill(0.0f);

  Pcg32 rng(27);
  nn::Tensor<float> logits({2, 7});
  for (auto& v : logits.data) v = static_cast<float>(rng.uniform());
  const std::vector<int> ya = {0, 3}, yb = {5, 5};

  const double la = smooth_ce(logits, ya, 0.1);
  const double lb = smooth_ce(logits, yb, 0.1);
  const double lam = 0.37;
  const double lt = total_loss(logits, lam, ya, yb, 0.1, 0.0, model);
  CHECK(std::abs(lt - (lam * la + (1.0 - lam) * lb)) < 1e-7);

  // lambda_mix = 1 reduces to the first term.
  CHECK(std::abs(total_loss(logits, 1.0, ya, yb, 0.1, 0.0, model) - la) <
        1e-12);

  // Regularizer adds lambda * l1 exactly.
  model.kan().coeff().value.data[0] = 1.0f;
  model.kan().coeff().value.data[1] = -2.0f;
  model.kan().coeff().value.data[8] = 0.5f;
  const double with_reg = total_loss(logits, 1.0, ya, yb, 0.1, 1e-5, model);
  CHECK(with_reg == doctest::Approx(la + 3.5e-5).epsilon(1e-12));
}

TEST_CASE("fit with zero learning rate freezes parameters") {
  auto samples = make_synthetic(6, 16, 61);
  auto idx = all_indices(samples.size());
  std::vector<int> tr(idx.begin(), idx.begin() + 28);
  std::vector<int> va(idx.begin() + 28, idx.begin() + 42);

  nn::ArchConfig arch = nn::ArchConfig::desk();
  arch.input_size = 16;
  Model model(arch, 62);
  std::vector<std::vector<float>> before;
  for (auto& np : model.params()) before.push_back(np.param->value.data);
  const Metrics initial = evaluate(model, samples, va);

  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.schedule.base_lr = 0.0;
  cfg.schedule.warmup_epochs = 0;
  cfg.schedule.total_epochs = 1;
  cfg.weight_decay = 0.0;
  cfg.seed = 63;
  auto result = fit(model, samples, tr, va, cfg);

  auto params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(params[i].param->value.data == before[i]);
  }
  REQUIRE(result.history.size() == 1);
  // Validation accuracy differs from the initial model only through the
  // updated batch-norm running stats.
  CHECK(result.history[0].val_accuracy >= 0.0);
  CHECK(initial.total == 14);
}

TEST_CASE("fit is deterministic for a fixed seed") {
  auto samples = make_synthetic(4, 16, 71);
  auto idx = all_indices(samples.size());
  std::vector<int> tr(idx.begin(), idx.begin() + 20);
  std::vector<int> va(idx.begin() + 20, idx.begin() + 28);

  nn::ArchConfig arch = nn::ArchConfig::desk();
  arch.input_size = 16;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.schedule.total_epochs = 2;
  cfg.schedule.warmup_epochs = 1;
  cfg.seed = 72;

  Model m1(arch, 73), m2(arch, 73);
  auto r1 = fit(m1, samples, tr, va, cfg);
  auto r2 = fit(m2, samples, tr, va, cfg);

  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t e = 0; e < r1.history.size(); ++e) {
    CHECK(r1.history[e].train_loss == r2.history[e].train_loss);
    CHECK(r1.history[e].val_accuracy == r2.history[e].val_accuracy);
  }
  auto p1 = m1.params(), p2 = m2.params();
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(std::memcmp(p1[i].param->value.data.data(),
                      p2[i].param->value.data.data(),
                      p1[i].param->value.numel() * sizeof(float)) == 0);
  }
}

TEST_CASE("evaluate metrics are internally consistent") {
  auto samples = make_synthetic(5, 16, 81);
  auto idx = all_indices(samples.size());
  nn::ArchConfig arch = nn::ArchConfig::desk();
  arch.input_size = 16;
  Model model(arch, 82);
  const Metrics m = evaluate(model, samples, idx);

  int total = 0, diag = 0;
  std::vector<int> col_sums(7, 0);
  for (int p = 0; p < 7; ++p) {
    for (int t = 0; t < 7; ++t) {
      CHECK(m.confusion[static_cast<std::size_t>(p)]
                       [static_cast<std::size_t>(t)] >= 0);
      total += m.confusion[static_cast<std::size_t>(p)]
                          [static_cast<std::size_t>(t)];
      col_sums[static_cast<std::size_t>(t)] +=
          m.confusion[static_cast<std::size_t>(p)]
                     [static_cast<std::size_t>(t)];
    }
    diag += m.confusion[static_cast<std::size_t>(p)]
                       [static_cast<std::size_t>(p)];
  }
  CHECK(total == static_cast<int>(samples.size()));
  CHECK(m.overall_accuracy ==
        doctest::Approx(static_cast<double>(diag) / total));
  for (int t = 0; t < 7; ++t) CHECK(col_sums[static_cast<std::size_t>(t)] == 5);

  // Per-JNR accuracies aggregate back to the overall accuracy.
  double weighted = 0.0;
  int counted = 0;
  for (const auto& [jnr, acc] : m.per_jnr_accuracy) {
    const int n = m.per_jnr_count.at(jnr);
    weighted += acc * n;
    counted += n;
  }
  CHECK(counted == total);
  CHECK(weighted / total == doctest::Approx(m.overall_accuracy));

  CHECK_THROWS(evaluate(model, samples, {}));
}

TEST_CASE("fit learns a separable synthetic problem") {
  auto samples = make_synthetic(8, 16, 91);
  auto idx = all_indices(samples.size());
  std::vector<std::pair<int, double>> cells;
  for (const auto& s : samples) cells.push_back({s.label, 0.0});
  // One cell per class of 8 samples: 6/1/1 split.
  auto split = split_dataset(cells, 0.70, 0.15, 0.15, 92);

  nn::ArchConfig arch = nn::ArchConfig::desk();
  arch.input_size = 16;
  Model model(arch, 93);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  cfg.mixup_alpha = 1.0;
  cfg.schedule.base_lr = 3e-3;
  cfg.schedule.warmup_epochs = 3;
  cfg.schedule.total_epochs = 30;
  cfg.seed = 94;
  auto result = fit(model, samples, split.train, split.val, cfg);
  CHECK(result.best_val_accuracy >= 0.5);

  const Metrics test = evaluate(model, samples, split.test);
  CHECK(test.overall_accuracy >= 0.5);
}
