#pragma once

#include <functional>
#include <vector>

#include "pocr/rng.hpp"
#include "pocr/tensor.hpp"

namespace pocr {

// A scalar-valued forward pass; re-invoked for finite differencing, so it
// must recompute from its captured inputs on every call.
using ScalarFn = std::function<Tensor()>;

// Compares the taped gradient of f w.r.t. x against central differences at
// every coordinate. Returns max over coordinates of
//   |analytic − numeric| / max(1, |analytic|, |numeric|).
double grad_check(const ScalarFn& f, Tensor x, double step = 1e-5);

// Same comparison restricted to at most max_coords coordinates drawn
// without replacement; makes whole-model checks affordable.
double grad_check_sampled(const ScalarFn& f, Tensor x, double step,
                          std::size_t max_coords, Rng& rng);

}  // namespace pocr
