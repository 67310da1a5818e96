#include "gackan/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <stdexcept>

#include "gackan/rng.hpp"

namespace gackan::train {

namespace {

void shuffle_indices(std::vector<int>& idx, Pcg32& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng.bounded(static_cast<std::uint32_t>(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

std::uint64_t jnr_bits(double jnr) {
  std::uint64_t u;
  std::memcpy(&u, &jnr, sizeof(u));
  return u;
}

// Gamma(shape) via Marsaglia-Tsang, extended below 1 by the boosting
// identity G(a) = G(a+1) * U^(1/a).
double gamma_sample(Pcg32& rng, double shape) {
  if (shape < 1.0) {
    const double u = std::max(rng.uniform(), 1e-300);
    return gamma_sample(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.gaussian();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 &&
        std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

double beta_sample(Pcg32& rng, double alpha) {
  if (alpha == 1.0) return rng.uniform();
  const double a = gamma_sample(rng, alpha);
  const double b = gamma_sample(rng, alpha);
  return a / (a + b);
}

}  // namespace

SplitIndices split_dataset(const std::vector<std::pair<int, double>>& cells,
                           double r_train, double r_val, double r_test,
                           std::uint64_t seed) {
  if (std::abs(r_train + r_val + r_test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  std::map<std::pair<int, std::uint64_t>, std::vector<int>> groups;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    groups[{cells[i].first, jnr_bits(cells[i].second)}].push_back(
        static_cast<int>(i));
  }

  auto counts = [&](std::size_t n) {
    const int tr = static_cast<int>(std::lround(static_cast<double>(n) * r_train));
    const int va = static_cast<int>(std::lround(static_cast<double>(n) * r_val));
    return std::pair<int, int>(tr, va);
  };

  bool ok = true;
  for (const auto& [key, idx] : groups) {
    const auto [tr, va] = counts(idx.size());
    const int te = static_cast<int>(idx.size()) - tr - va;
    if (tr < 1 || va < 1 || te < 1) {
      ok = false;
      break;
    }
  }

  SplitIndices out;
  if (!ok) {
    // Cells too small to stratify: global shuffle split.
    out.stratified = false;
    std::vector<int> all(cells.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    Pcg32 rng(mix64(seed ^ 0x53504c49));
    shuffle_indices(all, rng);
    const auto [tr, va] = counts(all.size());
    out.train.assign(all.begin(), all.begin() + tr);
    out.val.assign(all.begin() + tr, all.begin() + tr + va);
    out.test.assign(all.begin() + tr + va, all.end());
    return out;
  }

  for (auto& [key, idx] : groups) {
    Pcg32 rng(mix_seed(seed, static_cast<std::uint64_t>(key.first), key.second,
                       0x53504c49));
    shuffle_indices(idx, rng);
    const auto [tr, va] = counts(idx.size());
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + tr);
    out.val.insert(out.val.end(), idx.begin() + tr, idx.begin() + tr + va);
    out.test.insert(out.test.end(), idx.begin() + tr + va, idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

MixupResult mixup(nn::Tensor<float>& batch, double alpha, Pcg32& rng) {
  const int n = batch.dim(0);
  if (n < 2) throw std::invalid_argument("mixup needs a batch of at least 2");
  MixupResult r;
  r.lambda = beta_sample(rng, alpha);
  r.partner.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) r.partner[static_cast<std::size_t>(i)] = i;
  shuffle_indices(r.partner, rng);

  const std::size_t stride = batch.numel() / static_cast<std::size_t>(n);
  std::vector<float> orig = batch.data;
  const float lam = static_cast<float>(r.lambda);
  for (int i = 0; i < n; ++i) {
    const float* a = orig.data() + static_cast<std::size_t>(i) * stride;
    const float* b =
        orig.data() +
        static_cast<std::size_t>(r.partner[static_cast<std::size_t>(i)]) *
            stride;
    float* dst = batch.data.data() + static_cast<std::size_t>(i) * stride;
    for (std::size_t p = 0; p < stride; ++p) {
      dst[p] = lam * a[p] + (1.0f - lam) * b[p];
    }
  }
  return r;
}

double smooth_ce(const nn::Tensor<float>& logits,
                 const std::vector<int>& targets, double smoothing,
                 nn::Tensor<float>* grad) {
  const int n = logits.dim(0), k = logits.dim(1);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data.data() + static_cast<std::size_t>(i) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z) + mx;
    for (int j = 0; j < k; ++j) {
      const double t = (j == targets[static_cast<std::size_t>(i)]
                            ? 1.0 - smoothing
                            : 0.0) +
                       smoothing / k;
      loss -= t * (row[j] - logz);
      if (grad) {
        const double softmax = std::exp(row[j] - logz);
        grad->data[static_cast<std::size_t>(i) * k + j] +=
            static_cast<float>((softmax - t) / n);
      }
    }
  }
  return loss / n;
}

double total_loss(const nn::Tensor<float>& logits, double lambda_mix,
                  const std::vector<int>& targets_a,
                  const std::vector<int>& targets_b, double smoothing,
                  double l1_lambda, const Model& model,
                  nn::Tensor<float>* grad) {
  nn::Tensor<float> ga, gb;
  if (grad) {
    ga = nn::Tensor<float>(logits.shape);
    gb = nn::Tensor<float>(logits.shape);
  }
  const double la =
      smooth_ce(logits, targets_a, smoothing, grad ? &ga : nullptr);
  const double lb =
      smooth_ce(logits, targets_b, smoothing, grad ? &gb : nullptr);
  if (grad) {
    for (std::size_t i = 0; i < grad->data.size(); ++i) {
      grad->data[i] = static_cast<float>(lambda_mix) * ga.data[i] +
                      static_cast<float>(1.0 - lambda_mix) * gb.data[i];
    }
  }
  return lambda_mix * la + (1.0 - lambda_mix) * lb +
         l1_lambda * model.kan_l1();
}

namespace {

nn::Tensor<float> gather_batch(const std::vector<Sample>& samples,
                               const std::vector<int>& idx, std::size_t lo,
                               std::size_t hi) {
  const Sample& first = samples[static_cast<std::size_t>(idx[lo])];
  nn::Tensor<float> x({static_cast<int>(hi - lo), first.channels, first.height,
                       first.width});
  const std::size_t stride = first.image.size();
  for (std::size_t b = lo; b < hi; ++b) {
    const Sample& s = samples[static_cast<std::size_t>(idx[b])];
    if (s.image.size() != stride) {
      throw nn::DimensionError("inconsistent sample image sizes");
    }
    std::copy(s.image.begin(), s.image.end(),
              x.data.begin() + static_cast<std::ptrdiff_t>((b - lo) * stride));
  }
  return x;
}

struct Snapshot {
  std::vector<std::vector<float>> params;
  std::vector<std::vector<float>> state;
};

Snapshot take_snapshot(Model& model) {
  Snapshot s;
  for (auto& np : model.params()) s.params.push_back(np.param->value.data);
  for (auto& [name, t] : model.state()) s.state.push_back(t->data);
  return s;
}

void restore_snapshot(Model& model, const Snapshot& s) {
  auto params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].param->value.data = s.params[i];
  }
  auto state = model.state();
  for (std::size_t i = 0; i < state.size(); ++i) {
    state[i].second->data = s.state[i];
  }
}

}  // namespace

FitResult fit(Model& model, const std::vector<Sample>& samples,
              const std::vector<int>& train_idx,
              const std::vector<int>& val_idx, const TrainConfig& cfg) {
  if (train_idx.empty() || val_idx.empty()) {
    throw std::invalid_argument("fit needs non-empty train and val sets");
  }
  nn::AdamW<float>::Config ocfg;
  ocfg.lr = cfg.schedule.base_lr;
  ocfg.weight_decay = cfg.weight_decay;
  nn::AdamW<float> opt(model.params(), ocfg);

  FitResult result;
  Snapshot best;
  std::vector<int> order = train_idx;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = nn::lr_at(epoch, cfg.schedule);
    opt.set_lr(lr);

    Pcg32 erng(mix_seed(cfg.seed, 0x45504f43,
                        static_cast<std::uint64_t>(epoch), 0));
    shuffle_indices(order, erng);

    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t lo = 0; lo < order.size();
         lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi =
          std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      if (hi - lo < 2) break;  // batch norm needs at least two samples

      nn::Tensor<float> x = gather_batch(samples, order, lo, hi);
      std::vector<int> ya, yb;
      for (std::size_t b = lo; b < hi; ++b) {
        ya.push_back(samples[static_cast<std::size_t>(order[b])].label);
      }
      MixupResult mr = mixup(x, cfg.mixup_alpha, erng);
      for (std::size_t b = 0; b < ya.size(); ++b) {
        yb.push_back(ya[static_cast<std::size_t>(mr.partner[b])]);
      }

      nn::Tensor<float> logits = model.forward(x, true);
      nn::Tensor<float> glogits(logits.shape);
      const double loss =
          total_loss(logits, mr.lambda, ya, yb, cfg.label_smoothing,
                     cfg.kan_l1_lambda, model, &glogits);
      if (!std::isfinite(loss)) {
        throw nn::TrainingError("non-finite loss at epoch " +
                                std::to_string(epoch) + " batch " +
                                std::to_string(batches) + " lr " +
                                std::to_string(lr));
      }
      opt.zero_grad();
      model.backward(glogits);
      model.add_kan_l1_grad(cfg.kan_l1_lambda);
      opt.step();
      loss_sum += loss;
      ++batches;
    }

    const Metrics val = evaluate(model, samples, val_idx);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = batches > 0 ? loss_sum / batches : 0.0;
    rec.val_accuracy = val.overall_accuracy;
    result.history.push_back(rec);

    if (val.overall_accuracy > result.best_val_accuracy ||
        result.best_epoch < 0) {
      result.best_epoch = epoch;
      result.best_val_accuracy = val.overall_accuracy;
      best = take_snapshot(model);
    }
  }

  restore_snapshot(model, best);
  return result;
}

Metrics evaluate(Model& model, const std::vector<Sample>& samples,
                 const std::vector<int>& idx, int batch_size) {
  if (idx.empty()) throw std::invalid_argument("evaluate needs samples");
  const int k = model.arch().num_classes;
  Metrics m;
  m.confusion.assign(static_cast<std::size_t>(k),
                     std::vector<int>(static_cast<std::size_t>(k), 0));
  std::map<double, int> jnr_hits;

  for (std::size_t lo = 0; lo < idx.size();
       lo += static_cast<std::size_t>(batch_size)) {
    const std::size_t hi =
        std::min(idx.size(), lo + static_cast<std::size_t>(batch_size));
    nn::Tensor<float> x = gather_batch(samples, idx, lo, hi);
    nn::Tensor<float> logits = model.forward(x, false);
    for (std::size_t b = lo; b < hi; ++b) {
      const float* row =
          logits.data.data() + (b - lo) * static_cast<std::size_t>(k);
      int pred = 0;
      for (int j = 1; j < k; ++j) {
        if (row[j] > row[pred]) pred = j;
      }
      const Sample& s = samples[static_cast<std::size_t>(idx[b])];
      m.confusion[static_cast<std::size_t>(pred)]
                 [static_cast<std::size_t>(s.label)] += 1;
      m.per_jnr_count[s.jnr_db] += 1;
      if (pred == s.label) jnr_hits[s.jnr_db] += 1;
    }
  }
  int correct = 0;
  for (int j = 0; j < k; ++j) {
    correct += m.confusion[static_cast<std::size_t>(j)]
                          [static_cast<std::size_t>(j)];
  }
  m.total = static_cast<int>(idx.size());
  m.overall_accuracy = static_cast<double>(correct) / m.total;
  for (const auto& [jnr, count] : m.per_jnr_count) {
    m.per_jnr_accuracy[jnr] =
        static_cast<double>(jnr_hits[jnr]) / static_cast<double>(count);
  }
  return m;
}

}  // namespace gackan::train
