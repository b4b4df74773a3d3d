#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pocr/errors.hpp"

namespace pocr {

using Index = std::int64_t;
using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;
using ArrMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrMap = Eigen::Map<const Eigen::ArrayXd>;

std::string shape_string(const std::vector<Index>& shape);

struct TensorImpl {
  std::vector<Index> shape;
  Eigen::ArrayXd data;  // row-major, product(shape) elements
  bool requires_grad = false;
  Eigen::ArrayXd grad;  // same size as data iff requires_grad, else empty
};

// Dense float64 tensor handle with value-sharing semantics: copies alias the
// same storage, which is what lets the tape address gradients by identity.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<Index> shape, bool requires_grad = false);
  static Tensor full(std::vector<Index> shape, double value,
                     bool requires_grad = false);
  static Tensor from_data(std::vector<Index> shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<Index>& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  Index numel() const { return impl_->data.size(); }
  Index dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }

  // Tensor is a shared handle: const methods still expose mutable storage,
  // mirroring shared_ptr semantics. Rank-1 tensors view as a single row.
  Index rows() const;
  Index cols() const;
  MatMap mat() const;
  ArrMap array() const { return {impl_->data.data(), impl_->data.size()}; }

  double value() const;  // scalar tensors only
  double at(Index i) const { return impl_->data(i); }
  double at(Index r, Index c) const { return mat()(r, c); }
  void set(Index i, double v) const { impl_->data(i) = v; }
  void set(Index r, Index c, double v) const { mat()(r, c) = v; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag);

  bool has_grad() const { return impl_ && impl_->grad.size() == numel(); }
  ArrMap grad() const;
  MatMap grad_mat() const;
  void zero_grad() const;

  // Deep copy with fresh storage; carries requires_grad but not the gradient.
  Tensor clone() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Records forward operations so gradients can be replayed in exact reverse
// order. One tape per training step; single-threaded by contract.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::shared_ptr<TensorImpl> output,
              std::function<void()> backward_fn);
  std::size_t size() const { return nodes_.size(); }
  void clear();

  bool contains(const std::shared_ptr<TensorImpl>& t) const;

  static Tape* active();

  // RAII activation: ops record onto the innermost active tape.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  friend void backward(const Tensor& loss, Tape& tape);

 private:
  struct Node {
    std::shared_ptr<TensorImpl> output;
    std::function<void()> backward_fn;
  };
  std::vector<Node> nodes_;
};

// Seeds d(loss)/d(loss) = 1 and visits recorded nodes in reverse, populating
// .grad on every requires_grad tensor reachable from the loss.
void backward(const Tensor& loss, Tape& tape);

void check_finite(const Tensor& t, const char* op_name);

}  // namespace pocr
