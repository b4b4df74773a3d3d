#include "pocr/tensor.hpp"

#include <sstream>
#include <utility>

namespace pocr {

std::string shape_string(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

Index product(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in " + shape_string(shape));
    n *= d;
  }
  return n;
}

thread_local Tape* g_active_tape = nullptr;

}  // namespace

Tensor Tensor::zeros(std::vector<Index> shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  const Index n = product(shape);
  impl->shape = std::move(shape);
  impl->data = Eigen::ArrayXd::Zero(n);
  Tensor t(std::move(impl));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::full(std::vector<Index> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  t.array().setConstant(value);
  return t;
}

Tensor Tensor::from_data(std::vector<Index> shape, std::vector<double> values,
                         bool requires_grad) {
  const Index n = product(shape);
  if (n != static_cast<Index>(values.size())) {
    throw ShapeError("data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_string(shape));
  }
  Tensor t = zeros(std::move(shape), requires_grad);
  for (Index i = 0; i < n; ++i) t.impl_->data(i) = values[static_cast<std::size_t>(i)];
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Index Tensor::rows() const { return rank() <= 1 ? 1 : impl_->shape[0]; }

Index Tensor::cols() const {
  if (rank() == 0) return 1;
  return impl_->shape.back() == 0 ? 0 : numel() / rows();
}

MatMap Tensor::mat() const {
  if (rank() > 2) throw ShapeError("matrix view of rank-" + std::to_string(rank()) +
                                   " tensor " + shape_string(shape()));
  return {impl_->data.data(), rows(), cols()};
}

double Tensor::value() const {
  if (numel() != 1) {
    throw ShapeError("scalar value of non-scalar tensor " + shape_string(shape()));
  }
  return impl_->data(0);
}

void Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  if (flag) {
    if (impl_->grad.size() != numel()) impl_->grad = Eigen::ArrayXd::Zero(numel());
  } else {
    impl_->grad.resize(0);
  }
}

ArrMap Tensor::grad() const {
  if (!has_grad()) throw Error("gradient requested for tensor without grad buffer");
  return {impl_->grad.data(), impl_->grad.size()};
}

MatMap Tensor::grad_mat() const {
  if (!has_grad()) throw Error("gradient requested for tensor without grad buffer");
  return {impl_->grad.data(), rows(), cols()};
}

void Tensor::zero_grad() const {
  if (has_grad()) impl_->grad.setZero();
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  Tensor t(std::move(impl));
  t.set_requires_grad(impl_->requires_grad);
  return t;
}

void Tape::record(std::shared_ptr<TensorImpl> output,
                  std::function<void()> backward_fn) {
  nodes_.push_back({std::move(output), std::move(backward_fn)});
}

void Tape::clear() { nodes_.clear(); }

bool Tape::contains(const std::shared_ptr<TensorImpl>& t) const {
  for (const auto& node : nodes_) {
    if (node.output == t) return true;
  }
  return false;
}

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

Tape::Scope::~Scope() { g_active_tape = previous_; }

void backward(const Tensor& loss, Tape& tape) {
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got " +
                     shape_string(loss.shape()));
  }
  if (!loss.requires_grad() || !tape.contains(loss.impl())) {
    throw Error("backward: loss tensor was not recorded on this tape");
  }
  loss.impl()->grad.setConstant(1.0);
  for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
    it->backward_fn();
  }
}

void check_finite(const Tensor& t, const char* op_name) {
  if (!t.array().allFinite()) {
    throw NumericError(std::string(op_name) + " produced a non-finite value");
  }
}

}  // namespace pocr
