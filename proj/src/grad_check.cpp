#include "pocr/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace pocr {

namespace {

double check_coords(const ScalarFn& f, Tensor& x, double step,
                    const Eigen::ArrayXd& analytic, const std::vector<Index>& coords) {
  double worst = 0.0;
  for (Index i : coords) {
    const double saved = x.at(i);
    x.set(i, saved + step);
    const double up = f().value();
    x.set(i, saved - step);
    const double down = f().value();
    x.set(i, saved);
    const double numeric = (up - down) / (2.0 * step);
    if (!std::isfinite(numeric)) {
      throw NumericError("grad_check: non-finite finite-difference value");
    }
    const double a = analytic(i);
    const double err =
        std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    worst = std::max(worst, err);
  }
  return worst;
}

Eigen::ArrayXd analytic_gradient(const ScalarFn& f, Tensor& x) {
  x.zero_grad();
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    loss = f();
  }
  if (loss.numel() != 1) {
    throw ShapeError("grad_check requires a scalar-valued function, got " +
                     shape_string(loss.shape()));
  }
  // A function that never touches x (constant) records nothing; the analytic
  // gradient is identically zero then.
  if (loss.requires_grad() && tape.contains(loss.impl())) {
    backward(loss, tape);
  }
  return x.has_grad() ? Eigen::ArrayXd(x.grad()) : Eigen::ArrayXd::Zero(x.numel());
}

}  // namespace

double grad_check(const ScalarFn& f, Tensor x, double step) {
  const Eigen::ArrayXd analytic = analytic_gradient(f, x);
  std::vector<Index> coords(static_cast<std::size_t>(x.numel()));
  for (Index i = 0; i < x.numel(); ++i) coords[static_cast<std::size_t>(i)] = i;
  return check_coords(f, x, step, analytic, coords);
}

double grad_check_sampled(const ScalarFn& f, Tensor x, double step,
                          std::size_t max_coords, Rng& rng) {
  const Eigen::ArrayXd analytic = analytic_gradient(f, x);
  std::vector<Index> coords(static_cast<std::size_t>(x.numel()));
  for (Index i = 0; i < x.numel(); ++i) coords[static_cast<std::size_t>(i)] = i;
  // Partial Fisher-Yates draw of max_coords positions.
  const std::size_t take = std::min(max_coords, coords.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i),
                        static_cast<std::int64_t>(coords.size()) - 1));
    std::swap(coords[i], coords[j]);
  }
  coords.resize(take);
  return check_coords(f, x, step, analytic, coords);
}

}  // namespace pocr
