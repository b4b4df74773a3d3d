#include "pocr/ops.hpp"

#include <cmath>

namespace pocr {

namespace {

using ArrRow = Eigen::Array<double, 1, Eigen::Dynamic>;

bool want_grad(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

MatMap grad_view(const Tensor& t) {
  return {t.impl()->grad.data(), t.rows(), t.cols()};
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + " requires a rank-2 tensor, got " +
                     shape_string(t.shape()));
  }
}

void require_rank12(const Tensor& t, const char* op) {
  if (t.rank() != 1 && t.rank() != 2) {
    throw ShapeError(std::string(op) + " requires rank 1 or 2, got " +
                     shape_string(t.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul inner dimensions differ: " +
                     shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a, &b});
  Tensor out = Tensor::zeros({a.rows(), b.cols()}, rec);
  out.mat().noalias() = a.mat() * b.mat();
  check_finite(out, "matmul");
  if (rec) {
    tape->record(out.impl(), [a, b, out]() {
      ConstMatMap dC{out.impl()->grad.data(), out.rows(), out.cols()};
      if (a.requires_grad()) grad_view(a).noalias() += dC * b.mat().transpose();
      if (b.requires_grad()) grad_view(b).noalias() += a.mat().transpose() * dC;
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a});
  Tensor out = Tensor::zeros({a.cols(), a.rows()}, rec);
  out.mat().noalias() = a.mat().transpose();
  if (rec) {
    tape->record(out.impl(), [a, out]() {
      ConstMatMap dC{out.impl()->grad.data(), out.rows(), out.cols()};
      grad_view(a).noalias() += dC.transpose();
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add shapes differ: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), rec);
  out.array() = a.array() + b.array();
  check_finite(out, "add");
  if (rec) {
    tape->record(out.impl(), [a, b, out]() {
      ConstArrMap dC{out.impl()->grad.data(), out.numel()};
      if (a.requires_grad()) a.grad() += dC;
      if (b.requires_grad()) b.grad() += dC;
    });
  }
  return out;
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& b) {
  require_rank2(a, "add_row_broadcast");
  if (b.rank() != 1 || b.numel() != a.cols()) {
    throw ShapeError("add_row_broadcast needs [n] bias for [m×n], got " +
                     shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), rec);
  out.mat() = a.mat().rowwise() + b.mat().row(0);
  check_finite(out, "add_row_broadcast");
  if (rec) {
    tape->record(out.impl(), [a, b, out]() {
      ConstMatMap dC{out.impl()->grad.data(), out.rows(), out.cols()};
      if (a.requires_grad()) grad_view(a) += dC;
      if (b.requires_grad()) grad_view(b).row(0) += dC.colwise().sum();
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul shapes differ: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), rec);
  out.array() = a.array() * b.array();
  check_finite(out, "mul");
  if (rec) {
    tape->record(out.impl(), [a, b, out]() {
      ConstArrMap dC{out.impl()->grad.data(), out.numel()};
      if (a.requires_grad()) a.grad() += dC * b.array();
      if (b.requires_grad()) b.grad() += dC * a.array();
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a});
  Tensor out = Tensor::zeros(a.shape(), rec);
  out.array() = a.array() * c;
  check_finite(out, "scale");
  if (rec) {
    tape->record(out.impl(), [a, c, out]() {
      ConstArrMap dC{out.impl()->grad.data(), out.numel()};
      a.grad() += dC * c;
    });
  }
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_rows");
  require_rank2(b, "concat_rows");
  if (a.cols() != b.cols()) {
    throw ShapeError("concat_rows column mismatch: " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a, &b});
  Tensor out = Tensor::zeros({a.rows() + b.rows(), a.cols()}, rec);
  out.mat().topRows(a.rows()) = a.mat();
  out.mat().bottomRows(b.rows()) = b.mat();
  if (rec) {
    tape->record(out.impl(), [a, b, out]() {
      ConstMatMap dC{out.impl()->grad.data(), out.rows(), out.cols()};
      if (a.requires_grad()) grad_view(a) += dC.topRows(a.rows());
      if (b.requires_grad()) grad_view(b) += dC.bottomRows(b.rows());
    });
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols row mismatch: " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a, &b});
  Tensor out = Tensor::zeros({a.rows(), a.cols() + b.cols()}, rec);
  out.mat().leftCols(a.cols()) = a.mat();
  out.mat().rightCols(b.cols()) = b.mat();
  if (rec) {
    tape->record(out.impl(), [a, b, out]() {
      ConstMatMap dC{out.impl()->grad.data(), out.rows(), out.cols()};
      if (a.requires_grad()) grad_view(a) += dC.leftCols(a.cols());
      if (b.requires_grad()) grad_view(b) += dC.rightCols(b.cols());
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& a, Index begin, Index end) {
  require_rank2(a, "slice_rows");
  if (begin < 0 || end > a.rows() || begin >= end) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of range for " +
                     shape_string(a.shape()));
  }
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a});
  Tensor out = Tensor::zeros({end - begin, a.cols()}, rec);
  out.mat() = a.mat().middleRows(begin, end - begin);
  if (rec) {
    tape->record(out.impl(), [a, begin, out]() {
      ConstMatMap dC{out.impl()->grad.data(), out.rows(), out.cols()};
      grad_view(a).middleRows(begin, out.rows()) += dC;
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, Index begin, Index end) {
  require_rank2(a, "slice_cols");
  if (begin < 0 || end > a.cols() || begin >= end) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of range for " +
                     shape_string(a.shape()));
  }
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a});
  Tensor out = Tensor::zeros({a.rows(), end - begin}, rec);
  out.mat() = a.mat().middleCols(begin, end - begin);
  if (rec) {
    tape->record(out.impl(), [a, begin, out]() {
      ConstMatMap dC{out.impl()->grad.data(), out.rows(), out.cols()};
      grad_view(a).middleCols(begin, out.cols()) += dC;
    });
  }
  return out;
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Tensor gelu(const Tensor& a) {
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a});
  Tensor out = Tensor::zeros(a.shape(), rec);
  out.array() =
      a.array() * 0.5 *
      (1.0 + (a.array() * kInvSqrt2).unaryExpr([](double v) { return std::erf(v); }));
  check_finite(out, "gelu");
  if (rec) {
    tape->record(out.impl(), [a, out]() {
      ConstArrMap dC{out.impl()->grad.data(), out.numel()};
      Eigen::ArrayXd x = a.array();
      Eigen::ArrayXd cdf =
          0.5 * (1.0 + (x * kInvSqrt2).unaryExpr([](double v) { return std::erf(v); }));
      Eigen::ArrayXd pdf = (-0.5 * x.square()).exp() * kInvSqrt2Pi;
      a.grad() += dC * (cdf + x * pdf);
    });
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  require_rank12(logits, "softmax");
  if (logits.cols() < 1) throw ShapeError("softmax needs a non-empty last axis");
  if (!logits.array().allFinite()) {
    throw NumericError("softmax input is not finite");
  }
  Tape* tape = Tape::active();
  const bool rec = want_grad({&logits});
  Tensor out = Tensor::zeros(logits.shape(), rec);
  auto y = out.mat();
  auto x = logits.mat();
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  check_finite(out, "softmax");
  if (rec) {
    tape->record(out.impl(), [logits, out]() {
      ConstMatMap dY{out.impl()->grad.data(), out.rows(), out.cols()};
      auto y = out.mat();
      auto dX = grad_view(logits);
      for (Index r = 0; r < y.rows(); ++r) {
        const double dot = dY.row(r).cwiseProduct(y.row(r)).sum();
        dX.row(r).array() += y.row(r).array() * (dY.row(r).array() - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  require_rank12(x, "layer_norm");
  const Index d = x.cols();
  if (gain.rank() != 1 || bias.rank() != 1 || gain.numel() != d ||
      bias.numel() != d) {
    throw ShapeError("layer_norm gain/bias must be [" + std::to_string(d) +
                     "], got " + shape_string(gain.shape()) + " and " +
                     shape_string(bias.shape()));
  }
  Tape* tape = Tape::active();
  const bool rec = want_grad({&x, &gain, &bias});
  Tensor out = Tensor::zeros(x.shape(), rec);

  // x̂ and 1/σ are needed by the reverse rule.
  auto xhat = std::make_shared<MatrixRM>(x.rows(), d);
  auto inv_sigma = std::make_shared<Eigen::VectorXd>(x.rows());
  auto xm = x.mat();
  for (Index r = 0; r < xm.rows(); ++r) {
    const double mu = xm.row(r).mean();
    const double var = (xm.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    (*inv_sigma)(r) = is;
    xhat->row(r) = ((xm.row(r).array() - mu) * is).matrix();
    out.mat().row(r).array() =
        xhat->row(r).array() * gain.mat().row(0).array() + bias.mat().row(0).array();
  }
  check_finite(out, "layer_norm");
  if (rec) {
    tape->record(out.impl(), [x, gain, bias, out, xhat, inv_sigma]() {
      ConstMatMap dY{out.impl()->grad.data(), out.rows(), out.cols()};
      for (Index r = 0; r < out.rows(); ++r) {
        ArrRow dxhat = dY.row(r).array() * gain.mat().row(0).array();
        if (x.requires_grad()) {
          const double m1 = dxhat.mean();
          const double m2 = (dxhat * xhat->row(r).array()).mean();
          grad_view(x).row(r).array() +=
              (*inv_sigma)(r) * (dxhat - m1 - xhat->row(r).array() * m2);
        }
        if (gain.requires_grad()) {
          grad_view(gain).row(0).array() += dY.row(r).array() * xhat->row(r).array();
        }
        if (bias.requires_grad()) {
          grad_view(bias).row(0).array() += dY.row(r).array();
        }
      }
    });
  }
  return out;
}

Tensor embedding_lookup(const Tensor& table, const TokenSequence& ids) {
  require_rank2(table, "embedding_lookup");
  const Index v = table.rows();
  for (TokenId id : ids) {
    if (id < 0 || id >= v) {
      throw RangeError("embedding id " + std::to_string(id) +
                       " outside vocabulary [0, " + std::to_string(v) + ")");
    }
  }
  if (ids.empty()) throw ShapeError("embedding_lookup of empty id sequence");
  Tape* tape = Tape::active();
  const bool rec = want_grad({&table});
  Tensor out = Tensor::zeros({static_cast<Index>(ids.size()), table.cols()}, rec);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.mat().row(static_cast<Index>(i)) = table.mat().row(ids[i]);
  }
  check_finite(out, "embedding_lookup");
  if (rec) {
    TokenSequence ids_copy = ids;
    tape->record(out.impl(), [table, ids_copy, out]() {
      ConstMatMap dC{out.impl()->grad.data(), out.rows(), out.cols()};
      auto dT = grad_view(table);
      for (std::size_t i = 0; i < ids_copy.size(); ++i) {
        dT.row(ids_copy[i]) += dC.row(static_cast<Index>(i));
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  Tape* tape = Tape::active();
  const bool rec = want_grad({&a});
  Tensor out = Tensor::zeros({1}, rec);
  out.set(0, a.array().sum());
  check_finite(out, "sum");
  if (rec) {
    tape->record(out.impl(), [a, out]() { a.grad() += out.impl()->grad(0); });
  }
  return out;
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

LossParts cross_entropy_parts(const Tensor& logits, const TokenSequence& targets,
                              const LossConfig& cfg) {
  require_rank2(logits, "cross_entropy_loss");
  const Index L = logits.rows();
  const Index v = logits.cols();
  if (static_cast<Index>(targets.size()) != L) {
    throw ShapeError("cross_entropy_loss: " + std::to_string(targets.size()) +
                     " targets for logits " + shape_string(logits.shape()));
  }
  if (!cfg.token_weights.empty() &&
      static_cast<Index>(cfg.token_weights.size()) != L) {
    throw ShapeError("cross_entropy_loss: weight count " +
                     std::to_string(cfg.token_weights.size()) +
                     " does not match " + std::to_string(L) + " positions");
  }
  for (double w : cfg.token_weights) {
    if (w < 0) throw RangeError("cross_entropy_loss: negative token weight");
  }
  for (TokenId t : targets) {
    if (t < 0 || t >= v) {
      throw RangeError("cross_entropy_loss target id " + std::to_string(t) +
                       " outside vocabulary [0, " + std::to_string(v) + ")");
    }
  }
  if (!logits.array().allFinite()) {
    throw NumericError("cross_entropy_loss input is not finite");
  }

  Tape* tape = Tape::active();
  const bool rec = want_grad({&logits});
  auto probs = std::make_shared<MatrixRM>(L, v);
  auto weights = std::make_shared<Eigen::VectorXd>(L);

  double nll = 0.0;
  double weight_total = 0.0;
  Index positions = 0;
  auto x = logits.mat();
  for (Index i = 0; i < L; ++i) {
    const double m = x.row(i).maxCoeff();
    ArrRow shifted = x.row(i).array() - m;
    const double lse = std::log(shifted.exp().sum());
    probs->row(i) = (shifted - lse).exp().matrix();
    const TokenId target = targets[static_cast<std::size_t>(i)];
    const bool is_pad = target == cfg.pad_token_id;
    const double w =
        is_pad ? 0.0
               : (cfg.token_weights.empty()
                      ? 1.0
                      : cfg.token_weights[static_cast<std::size_t>(i)]);
    (*weights)(i) = w;
    if (!is_pad) {
      nll += -w * (shifted(target) - lse);
      weight_total += w;
      ++positions;
    }
  }

  Tensor out = Tensor::zeros({1}, rec);
  out.set(0, nll);
  check_finite(out, "cross_entropy_loss");
  if (rec) {
    TokenSequence tcopy = targets;
    tape->record(out.impl(), [logits, tcopy, out, probs, weights]() {
      const double g = out.impl()->grad(0);
      auto dX = grad_view(logits);
      for (Index i = 0; i < dX.rows(); ++i) {
        const double w = (*weights)(i);
        if (w == 0.0) continue;
        dX.row(i) += (g * w) * probs->row(i);
        dX(i, tcopy[static_cast<std::size_t>(i)]) -= g * w;
      }
    });
  }
  return {out, weight_total, positions};
}

Tensor cross_entropy_loss(const Tensor& logits, const TokenSequence& targets,
                          const LossConfig& cfg) {
  LossParts parts = cross_entropy_parts(logits, targets, cfg);
  if (parts.weight_total <= 0.0) {
    throw DataError("cross_entropy_loss: every position is pad (degenerate batch)");
  }
  return scale(parts.weighted_nll_sum, 1.0 / parts.weight_total);
}

}  // namespace pocr
