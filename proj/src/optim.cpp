#include "pocr/optim.hpp"

#include <cmath>

namespace pocr {

AdamW::AdamW(AdamConfig cfg) : cfg_(cfg) {}

void AdamW::attach(const std::vector<NamedTensor>& params) {
  slots_.clear();
  for (const auto& [name, tensor] : params) {
    if (!tensor.requires_grad()) continue;
    Slot slot;
    slot.name = name;
    slot.param = tensor;
    slot.m = Eigen::ArrayXd::Zero(tensor.numel());
    slot.v = Eigen::ArrayXd::Zero(tensor.numel());
    slots_.push_back(std::move(slot));
  }
}

void AdamW::zero_grads() {
  for (auto& slot : slots_) slot.param.zero_grad();
}

double AdamW::clip_gradients() {
  double sq = 0.0;
  for (const auto& slot : slots_) sq += slot.param.grad().square().sum();
  const double norm = std::sqrt(sq);
  if (cfg_.clip_global_norm > 0.0 && norm > cfg_.clip_global_norm) {
    const double factor = cfg_.clip_global_norm / norm;
    for (auto& slot : slots_) slot.param.grad() *= factor;
  }
  return norm;
}

void AdamW::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (auto& slot : slots_) {
    if (slot.m.size() != slot.param.numel()) {
      throw ShapeError("optimizer state for '" + slot.name +
                       "' does not match parameter " +
                       shape_string(slot.param.shape()));
    }
    auto g = slot.param.grad();
    slot.m = cfg_.beta1 * slot.m + (1.0 - cfg_.beta1) * g;
    slot.v = cfg_.beta2 * slot.v + (1.0 - cfg_.beta2) * g.square();
    const Eigen::ArrayXd m_hat = slot.m / bc1;
    const Eigen::ArrayXd v_hat = slot.v / bc2;
    auto p = slot.param.array();
    if (cfg_.weight_decay != 0.0) {
      p -= cfg_.learning_rate * cfg_.weight_decay * p;
    }
    p -= cfg_.learning_rate * m_hat / (v_hat.sqrt() + cfg_.epsilon);
  }
}

std::map<std::string, std::pair<Eigen::ArrayXd, Eigen::ArrayXd>> AdamW::moments()
    const {
  std::map<std::string, std::pair<Eigen::ArrayXd, Eigen::ArrayXd>> out;
  for (const auto& slot : slots_) out[slot.name] = {slot.m, slot.v};
  return out;
}

void AdamW::restore_moments(
    const std::map<std::string, std::pair<Eigen::ArrayXd, Eigen::ArrayXd>>& m) {
  for (auto& slot : slots_) {
    auto it = m.find(slot.name);
    if (it == m.end()) continue;
    if (it->second.first.size() != slot.param.numel()) {
      throw ShapeError("restored optimizer state for '" + slot.name +
                       "' does not match parameter " +
                       shape_string(slot.param.shape()));
    }
    slot.m = it->second.first;
    slot.v = it->second.second;
  }
}

}  // namespace pocr
