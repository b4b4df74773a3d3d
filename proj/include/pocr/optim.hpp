#pragma once

#include <map>
#include <string>
#include <vector>

#include "pocr/tensor.hpp"

namespace pocr {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;       // decoupled (AdamW); 0 reduces to Adam
  double clip_global_norm = 1.0;   // <= 0 disables clipping
};

// Bias-corrected adaptive-moment optimizer over named parameters. Frozen
// (non-requires-grad) tensors are never attached and hold no state.
class AdamW {
 public:
  explicit AdamW(AdamConfig cfg = {});

  // Registers every requires_grad tensor; call once before stepping.
  void attach(const std::vector<NamedTensor>& params);

  void zero_grads();

  // Scales all gradients so their joint L2 norm is at most
  // cfg.clip_global_norm; returns the pre-clip norm.
  double clip_gradients();

  // One in-place update; frozen parameters are untouched by construction.
  void step();

  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t t) { step_count_ = t; }
  const AdamConfig& config() const { return cfg_; }

  // Moment access for checkpointing, keyed by parameter name.
  std::map<std::string, std::pair<Eigen::ArrayXd, Eigen::ArrayXd>> moments() const;
  void restore_moments(
      const std::map<std::string, std::pair<Eigen::ArrayXd, Eigen::ArrayXd>>& m);

 private:
  struct Slot {
    std::string name;
    Tensor param;
    Eigen::ArrayXd m;
    Eigen::ArrayXd v;
  };
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  std::int64_t step_count_ = 0;
};

}  // namespace pocr
