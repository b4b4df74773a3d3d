#include "doctest.h"

#include <cmath>
#include <vector>

#include "pocr/grad_check.hpp"
#include "pocr/ops.hpp"
#include "pocr/optim.hpp"
#include "pocr/rng.hpp"
#include "pocr/tensor.hpp"

using namespace pocr;

namespace {

Tensor random_tensor(std::vector<Index> shape, Rng& rng, bool requires_grad = false,
                     double stddev = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (Index i = 0; i < t.numel(); ++i) t.set(i, rng.normal(0.0, stddev));
  return t;
}

}  // namespace

TEST_CASE("matmul identity and selector") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor c = matmul(eye, a);
  CHECK(c.at(0, 0) == 1.0);
  CHECK(c.at(0, 1) == 2.0);
  CHECK(c.at(1, 0) == 3.0);
  CHECK(c.at(1, 1) == 4.0);

  Tensor row = Tensor::from_data({1, 2}, {1, 0});
  Tensor col = Tensor::from_data({2, 1}, {5, 7});
  Tensor r = matmul(row, col);
  CHECK(r.shape() == std::vector<Index>{1, 1});
  CHECK(r.value() == 5.0);
}

TEST_CASE("matmul against naive triple loop") {
  Rng rng(7);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor c = matmul(a, b);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (Index k = 0; k < 4; ++k) acc += a.at(i, k) * b.at(k, j);
      CHECK(std::abs(c.at(i, j) - acc) < 1e-12);
    }
  }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("matmul backward accumulates dA = dC*B^T and dB = A^T*dC") {
  Rng rng(11);
  Tensor a = random_tensor({2, 3}, rng, true);
  Tensor b = random_tensor({3, 2}, rng, true);
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    loss = sum(matmul(a, b));
  }
  backward(loss, tape);
  // dC is all-ones, so dA row i = column sums of B^T = row sums of B per column.
  for (Index i = 0; i < 2; ++i) {
    for (Index k = 0; k < 3; ++k) {
      const double expected = b.at(k, 0) + b.at(k, 1);
      CHECK(a.grad()(i * 3 + k) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  for (Index k = 0; k < 3; ++k) {
    for (Index j = 0; j < 2; ++j) {
      const double expected = a.at(0, k) + a.at(1, k);
      CHECK(b.grad()(k * 2 + j) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax symmetry and stability") {
  Tensor s = softmax(Tensor::from_data({2}, {0, 0}));
  CHECK(s.at(0) == doctest::Approx(0.5));
  CHECK(s.at(1) == doctest::Approx(0.5));

  Tensor big = softmax(Tensor::from_data({2}, {1000, 0}));
  CHECK(big.at(0) == doctest::Approx(1.0));
  CHECK(big.at(1) == doctest::Approx(0.0));
  CHECK(big.array().allFinite());
}

TEST_CASE("softmax matches extended-precision reference") {
  Tensor s = softmax(Tensor::from_data({3}, {1, 2, 3}));
  long double z = 0;
  for (long double v : {1.0L, 2.0L, 3.0L}) z += expl(v);
  for (Index i = 0; i < 3; ++i) {
    const long double expected = expl(static_cast<long double>(i + 1)) / z;
    CHECK(std::abs(s.at(i) - static_cast<double>(expected)) < 1e-15);
  }
}

TEST_CASE("softmax rows sum to one under fuzz with large magnitudes") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const Index v = rng.uniform_int(1, 12);
    Tensor x = random_tensor({3, v}, rng, false, 1e3);
    Tensor s = softmax(x);
    for (Index r = 0; r < 3; ++r) {
      double total = 0.0;
      for (Index c = 0; c < v; ++c) {
        CHECK(s.at(r, c) >= 0.0);
        total += s.at(r, c);
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("softmax rejects non-finite input") {
  Tensor x = Tensor::from_data({2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(softmax(x), NumericError);
}

TEST_CASE("layer_norm constant slice collapses to bias") {
  Tensor x = Tensor::from_data({3}, {5, 5, 5});
  Tensor gain = Tensor::full({3}, 1.0);
  Tensor bias = Tensor::zeros({3});
  Tensor y = layer_norm(x, gain, bias);
  for (Index i = 0; i < 3; ++i) CHECK(std::abs(y.at(i)) < 1e-9);
}

TEST_CASE("layer_norm of already-normalized pair") {
  Tensor x = Tensor::from_data({2}, {1, -1});
  Tensor y = layer_norm(x, Tensor::full({2}, 1.0), Tensor::zeros({2}));
  CHECK(y.at(0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(y.at(1) == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("layer_norm against two-pass statistics oracle") {
  Rng rng(5);
  Tensor x = random_tensor({4, 9}, rng, false, 3.0);
  Tensor gain = random_tensor({9}, rng);
  Tensor bias = random_tensor({9}, rng);
  Tensor y = layer_norm(x, gain, bias);
  for (Index r = 0; r < 4; ++r) {
    double mu = 0.0;
    for (Index c = 0; c < 9; ++c) mu += x.at(r, c);
    mu /= 9.0;
    double var = 0.0;
    for (Index c = 0; c < 9; ++c) var += (x.at(r, c) - mu) * (x.at(r, c) - mu);
    var /= 9.0;
    for (Index c = 0; c < 9; ++c) {
      const double expected =
          gain.at(c) * (x.at(r, c) - mu) / std::sqrt(var + 1e-5) + bias.at(c);
      CHECK(y.at(r, c) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("embedding_lookup basics and additive scatter") {
  Tensor table = Tensor::from_data({3, 2}, {0, 1, 10, 11, 20, 21}, true);
  Tensor first = embedding_lookup(table, {0});
  CHECK(first.at(0, 0) == 0.0);
  CHECK(first.at(0, 1) == 1.0);

  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    Tensor rows = embedding_lookup(table, {2, 2});
    CHECK(rows.at(0, 0) == rows.at(1, 0));
    loss = sum(rows);
  }
  backward(loss, tape);
  // Both output rows feed row 2: gradient accumulates to 2 per column.
  CHECK(table.grad()(2 * 2 + 0) == 2.0);
  CHECK(table.grad()(2 * 2 + 1) == 2.0);
  CHECK(table.grad()(0) == 0.0);
}

TEST_CASE("embedding_lookup against per-row copy oracle") {
  Rng rng(9);
  Tensor table = random_tensor({17, 5}, rng);
  TokenSequence ids;
  for (int i = 0; i < 40; ++i) ids.push_back(static_cast<TokenId>(rng.uniform_int(0, 16)));
  Tensor out = embedding_lookup(table, ids);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (Index c = 0; c < 5; ++c) {
      CHECK(out.at(static_cast<Index>(i), c) == table.at(ids[i], c));
    }
  }
}

TEST_CASE("embedding_lookup names the out-of-range id") {
  Tensor table = Tensor::zeros({3, 2});
  try {
    embedding_lookup(table, {7});
    FAIL("expected RangeError");
  } catch (const RangeError& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
}

TEST_CASE("cross_entropy_loss at certainty and uniformity") {
  LossConfig cfg;
  Tensor confident = Tensor::from_data({1, 4}, {0, 60, 0, 0});
  Tensor l0 = cross_entropy_loss(confident, {1}, cfg);
  CHECK(l0.value() == doctest::Approx(0.0).epsilon(1e-9));

  Tensor uniform = Tensor::zeros({1, 4});
  Tensor l1 = cross_entropy_loss(uniform, {2}, cfg);
  CHECK(l1.value() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross_entropy_loss with pad matches hand-computed two-term mean") {
  LossConfig cfg;
  cfg.pad_token_id = 0;
  // Targets: 2, 0 (pad), 1. Extended-precision oracle over the two live rows.
  Tensor logits = Tensor::from_data({3, 3}, {0.3, -1.2, 2.0,  //
                                             5.0, 5.0, 5.0,   //
                                             -0.5, 0.25, 0.1});
  TokenSequence targets{2, 0, 1};
  long double expected = 0.0L;
  {
    const long double row0[3] = {0.3L, -1.2L, 2.0L};
    const long double row2[3] = {-0.5L, 0.25L, 0.1L};
    long double z0 = 0, z2 = 0;
    for (int i = 0; i < 3; ++i) z0 += expl(row0[i]);
    for (int i = 0; i < 3; ++i) z2 += expl(row2[i]);
    expected = -(logl(expl(row0[2]) / z0) + logl(expl(row2[1]) / z2)) / 2.0L;
  }
  Tensor loss = cross_entropy_loss(logits, targets, cfg);
  CHECK(loss.value() == doctest::Approx(static_cast<double>(expected)).epsilon(1e-12));
}

TEST_CASE("cross_entropy_loss rejects an all-pad batch") {
  LossConfig cfg;
  Tensor logits = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(cross_entropy_loss(logits, {0, 0}, cfg), DataError);
}

TEST_CASE("cross_entropy_loss is nonnegative and zero only at certainty") {
  LossConfig cfg;
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor logits = random_tensor({4, 6}, rng, false, 4.0);
    TokenSequence targets;
    for (int i = 0; i < 4; ++i) targets.push_back(static_cast<TokenId>(rng.uniform_int(1, 5)));
    const double loss = cross_entropy_loss(logits, targets, cfg).value();
    CHECK(loss >= 0.0);
    CHECK(loss > 0.0);  // random logits never reach certainty
  }
}

TEST_CASE("backward on sum gives all-ones gradient") {
  Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    loss = sum(x);
  }
  backward(loss, tape);
  for (Index i = 0; i < 4; ++i) CHECK(x.grad()(i) == 1.0);
}

TEST_CASE("backward of x*x at x=3 gives 6") {
  Tensor x = Tensor::scalar(3.0, true);
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    loss = sum(mul(x, x));
  }
  backward(loss, tape);
  CHECK(x.grad()(0) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward rejects a non-scalar loss") {
  Tensor x = Tensor::zeros({2}, true);
  Tape tape;
  Tensor y;
  {
    Tape::Scope scope(tape);
    y = add(x, x);
  }
  CHECK_THROWS_AS(backward(y, tape), ShapeError);
}

TEST_CASE("backward requires the loss to live on the tape") {
  Tensor x = Tensor::scalar(1.0, true);
  Tape tape;
  CHECK_THROWS_AS(backward(x, tape), Error);
}

TEST_CASE("frozen tensors receive no gradient buffer") {
  Tensor frozen = Tensor::from_data({2, 2}, {1, 0, 0, 1}, false);
  Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    loss = sum(matmul(x, frozen));
  }
  backward(loss, tape);
  CHECK(!frozen.has_grad());
  CHECK(x.has_grad());
}

TEST_CASE("composite two-layer network passes grad_check at 1e-6") {
  Rng rng(17);
  Tensor w1 = random_tensor({5, 7}, rng, true, 0.5);
  Tensor b1 = random_tensor({7}, rng, true, 0.1);
  Tensor w2 = random_tensor({7, 4}, rng, true, 0.5);
  Tensor x = random_tensor({3, 5}, rng);
  TokenSequence targets{1, 2, 3};
  LossConfig cfg;

  auto f = [&]() {
    Tensor h = gelu(add_row_broadcast(matmul(x, w1), b1));
    Tensor logits = matmul(h, w2);
    return cross_entropy_loss(logits, targets, cfg);
  };
  CHECK(grad_check(f, w1) < 1e-6);
  CHECK(grad_check(f, b1) < 1e-6);
  CHECK(grad_check(f, w2) < 1e-6);
}

TEST_CASE("grad_check on exact quadratic and constant") {
  Rng rng(3);
  Tensor x = random_tensor({6}, rng, true);
  auto sum_of_squares = [&]() { return sum(mul(x, x)); };
  CHECK(grad_check(sum_of_squares, x) < 1e-8);

  auto constant = [&]() { return Tensor::scalar(4.2); };
  CHECK(grad_check(constant, x) == 0.0);
}

TEST_CASE("layer ops pass grad_check individually") {
  Rng rng(41);
  Tensor x = random_tensor({3, 6}, rng, true);
  Tensor gain = random_tensor({6}, rng, true, 0.2);
  Tensor bias = random_tensor({6}, rng, true, 0.2);

  auto ln = [&]() { return sum(mul(layer_norm(x, gain, bias), x)); };
  CHECK(grad_check(ln, x) < 1e-6);
  CHECK(grad_check(ln, gain) < 1e-6);
  CHECK(grad_check(ln, bias) < 1e-6);

  Tensor logits = random_tensor({2, 5}, rng, true);
  auto sm = [&]() { return sum(mul(softmax(logits), logits)); };
  CHECK(grad_check(sm, logits) < 1e-6);

  Tensor table = random_tensor({9, 4}, rng, true);
  auto emb = [&]() {
    Tensor rows = embedding_lookup(table, {3, 3, 8, 0});
    return sum(mul(rows, rows));
  };
  CHECK(grad_check(emb, table) < 1e-6);

  Tensor g = random_tensor({4, 4}, rng, true);
  auto gl = [&]() { return sum(gelu(g)); };
  CHECK(grad_check(gl, g) < 1e-8);
}

TEST_CASE("tape replay is deterministic bit for bit") {
  auto run = []() {
    Rng rng(1234);
    Tensor w = Tensor::zeros({8, 8}, true);
    for (Index i = 0; i < w.numel(); ++i) w.set(i, rng.normal(0.0, 0.3));
    Tensor x = Tensor::zeros({2, 8});
    for (Index i = 0; i < x.numel(); ++i) x.set(i, rng.normal(0.0, 1.0));
    Tape tape;
    Tensor loss;
    {
      Tape::Scope scope(tape);
      loss = cross_entropy_loss(matmul(x, w), {3, 5}, LossConfig{});
    }
    backward(loss, tape);
    return std::pair<double, double>(loss.value(), w.grad()(11));
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("adam step with zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from_data({3}, {1, 2, 3}, true);
  AdamW opt;
  opt.attach({{"p", p}});
  opt.zero_grads();
  opt.step();
  CHECK(p.at(0) == 1.0);
  CHECK(p.at(1) == 2.0);
  CHECK(p.at(2) == 3.0);
}

TEST_CASE("adam first step equals minus learning rate at unit gradient") {
  Tensor p = Tensor::scalar(0.0, true);
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.clip_global_norm = 0.0;
  AdamW opt(cfg);
  opt.attach({{"p", p}});
  p.grad()(0) = 1.0;
  opt.step();
  CHECK(p.value() == doctest::Approx(-0.1).epsilon(1e-7));
}

TEST_CASE("adam three-step trace matches scripted recurrence") {
  Tensor p = Tensor::scalar(0.5, true);
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.clip_global_norm = 0.0;
  AdamW opt(cfg);
  opt.attach({{"p", p}});

  double ref = 0.5, m = 0.0, v = 0.0;
  const double grads[3] = {1.0, -0.5, 0.25};
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    p.zero_grad();
    p.grad()(0) = g;
    opt.step();

    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mh = m / (1 - std::pow(cfg.beta1, t));
    const double vh = v / (1 - std::pow(cfg.beta2, t));
    ref -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    CHECK(p.value() == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("frozen parameters are bit-identical across adam steps") {
  Tensor frozen = Tensor::from_data({2}, {0.25, -0.75}, false);
  Tensor live = Tensor::scalar(1.0, true);
  AdamW opt;
  opt.attach({{"frozen", frozen}, {"live", live}});
  for (int i = 0; i < 5; ++i) {
    live.zero_grad();
    live.grad()(0) = 1.0;
    opt.step();
  }
  CHECK(frozen.at(0) == 0.25);
  CHECK(frozen.at(1) == -0.75);
  CHECK(live.value() != 1.0);
}

TEST_CASE("gradient clipping rescales to the configured global norm") {
  Tensor p = Tensor::from_data({2}, {0, 0}, true);
  AdamConfig cfg;
  cfg.clip_global_norm = 1.0;
  AdamW opt(cfg);
  opt.attach({{"p", p}});
  p.grad()(0) = 3.0;
  p.grad()(1) = 4.0;
  const double norm = opt.clip_gradients();
  CHECK(norm == doctest::Approx(5.0));
  CHECK(std::hypot(p.grad()(0), p.grad()(1)) == doctest::Approx(1.0));
}
