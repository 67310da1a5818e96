#ifndef GACKAN_OPTIM_HPP
#define GACKAN_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gackan/nn.hpp"

namespace gackan::nn {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LrSchedule {
  double base_lr = 1e-3;
  int warmup_epochs = 5;
  int total_epochs = 200;
  double min_lr = 0.0;
};

// Linear warmup then cosine annealing. The cosine denominator is
// total - warmup - 1 so the final epoch lands exactly on min_lr.
inline double lr_at(int epoch, const LrSchedule& s) {
  if (epoch < s.warmup_epochs) {
    return s.base_lr * static_cast<double>(epoch + 1) /
           static_cast<double>(s.warmup_epochs);
  }
  const int span = s.total_epochs - s.warmup_epochs - 1;
  if (span <= 0) return s.min_lr;
  const double progress =
      static_cast<double>(epoch - s.warmup_epochs) / static_cast<double>(span);
  return s.min_lr + 0.5 * (s.base_lr - s.min_lr) *
                        (1.0 + std::cos(3.14159265358979323846 * progress));
}

template <typename T>
class AdamW {
 public:
  struct Config {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
  };

  explicit AdamW(const std::vector<NamedParam<T>>& params, Config cfg = {})
      : cfg_(cfg) {
    for (const auto& np : params) {
      slots_.push_back({np.param, std::vector<T>(np.param->value.numel(), T(0)),
                        std::vector<T>(np.param->value.numel(), T(0))});
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  std::int64_t step_count() const { return t_; }

  // Decoupled weight decay: decay is applied directly to the parameter,
  // separate from the adaptive moment step.
  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& slot : slots_) {
      auto& val = slot.param->value.data;
      auto& grad = slot.param->grad.data;
      for (std::size_t i = 0; i < val.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        if (!std::isfinite(g)) {
          throw TrainingError("non-finite gradient in optimizer step");
        }
        double m = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g;
        double v = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g * g;
        slot.m[i] = static_cast<T>(m);
        slot.v[i] = static_cast<T>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        double p = static_cast<double>(val[i]);
        p -= cfg_.lr * cfg_.weight_decay * p;
        p -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        val[i] = static_cast<T>(p);
      }
    }
  }

  void zero_grad() {
    for (auto& slot : slots_) slot.param->zero_grad();
  }

 private:
  struct Slot {
    Param<T>* param;
    std::vector<T> m;
    std::vector<T> v;
  };

  Config cfg_;
  std::vector<Slot> slots_;
  std::int64_t t_ = 0;
};

}  // namespace gackan::nn

#endif  // GACKAN_OPTIM_HPP
