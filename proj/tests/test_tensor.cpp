#include "doctest.h"

#include <cmath>

#include "roinet/autodiff.hpp"
#include "roinet/ops.hpp"
#include "roinet/optim.hpp"
#include "roinet/tensor.hpp"
#include "test_oracles.hpp"

using namespace roinet;

TEST_SUITE("tensor") {

TEST_CASE("shape bookkeeping") {
  Tensor t = Tensor::zeros({2, 3, 4});
  CHECK(t.rank() == 3);
  CHECK(t.numel() == 24);
  CHECK(shape_str(t.shape()) == "[2x3x4]");

  Tensor r = t.reshaped({6, 4});
  CHECK(r.shape() == Shape{6, 4});
  CHECK_THROWS_AS(t.reshaped({5, 5}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, -1}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("row-major accessors agree with flat indexing") {
  Tensor t({2, 3, 4, 5});
  for (long long i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(i);
  CHECK(t(1, 2, 3, 4) == ((1 * 3 + 2) * 4 + 3) * 5 + 4);
  Tensor u({3, 4, 5});
  for (long long i = 0; i < u.numel(); ++i) u[i] = static_cast<double>(i);
  CHECK(u(2, 3, 4) == (2 * 4 + 3) * 5 + 4);
  Tensor m({4, 5});
  for (long long i = 0; i < m.numel(); ++i) m[i] = static_cast<double>(i);
  CHECK(m(3, 2) == 17.0);
}

TEST_CASE("backward accumulates additively across reuse") {
  // y = sum(x + x) -> dy/dx = 2 everywhere.
  Tape tape;
  Var x = tape.leaf(make_tensor({3}, {1.0, -2.0, 0.5}), true);
  Var y = sum(add(x, x));
  tape.backward(y);
  const Tensor& g = tape.grad(x);
  for (long long i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(2.0));
}

TEST_CASE("frozen elementwise oracles") {
  Tape tape;
  Var a = tape.leaf(make_tensor({2}, {1.0, 2.0}), true);
  Var b = tape.leaf(make_tensor({2}, {3.0, 4.0}), true);
  Var loss = sum(mul(a, b));  // 1*3 + 2*4 = 11
  tape.backward(loss);
  CHECK(tape.value(loss)[0] == doctest::Approx(11.0));
  CHECK(tape.grad(a)[0] == doctest::Approx(3.0));
  CHECK(tape.grad(a)[1] == doctest::Approx(4.0));
  CHECK(tape.grad(b)[0] == doctest::Approx(1.0));
}

TEST_CASE("matmul forward and gradient") {
  Tape tape;
  Var a = tape.leaf(make_tensor({1, 2}, {2.0, 3.0}), true);
  Var b = tape.leaf(make_tensor({2, 1}, {4.0, 5.0}), true);
  Var y = sum(matmul(a, b));
  tape.backward(y);
  CHECK(tape.value(y)[0] == doctest::Approx(23.0));
  CHECK(tape.grad(a)[0] == doctest::Approx(4.0));
  CHECK(tape.grad(a)[1] == doctest::Approx(5.0));
  CHECK(tape.grad(b)[1] == doctest::Approx(3.0));
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("relu gates its gradient") {
  Tape tape;
  Var x = tape.leaf(make_tensor({3}, {-1.0, 0.0, 2.0}), true);
  Var y = sum(relu(x));
  tape.backward(y);
  CHECK(tape.value(y)[0] == doctest::Approx(2.0));
  CHECK(tape.grad(x)[0] == 0.0);
  CHECK(tape.grad(x)[1] == 0.0);  // the kink itself passes nothing
  CHECK(tape.grad(x)[2] == 1.0);
}

TEST_CASE("softmax and cross entropy frozen values") {
  Tape tape;
  Var logits = tape.leaf(Tensor::zeros({1, 3}), true);
  Var p = softmax(logits);
  Var loss = cross_entropy(p, {0});
  tape.backward(loss);
  CHECK(tape.value(p)[0] == doctest::Approx(1.0 / 3.0));
  CHECK(tape.value(loss)[0] == doctest::Approx(std::log(3.0)));  // 1.098612...
  // d loss / d logit = p - onehot
  CHECK(tape.grad(logits)[0] == doctest::Approx(1.0 / 3.0 - 1.0));
  CHECK(tape.grad(logits)[1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("non-finite forward values are rejected") {
  Tape tape;
  Var a = tape.leaf(Tensor::full({2}, 1e308), true);
  CHECK_THROWS_AS(mul(a, a), NumericError);
}

TEST_CASE("backward requires a scalar output") {
  Tape tape;
  Var x = tape.leaf(make_tensor({2}, {1.0, 2.0}), true);
  Var y = add(x, x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("grad on a non-trainable leaf is a contract error") {
  Tape tape;
  Var x = tape.leaf(make_tensor({2}, {1.0, 2.0}), false);
  Var y = sum(x);
  tape.backward(y);
  CHECK_THROWS_AS(tape.grad(x), ContractError);
}

TEST_CASE("mixing tapes is rejected") {
  Tape t1, t2;
  Var a = t1.leaf(make_tensor({2}, {1.0, 2.0}), true);
  Var b = t2.leaf(make_tensor({2}, {3.0, 4.0}), true);
  CHECK_THROWS_AS(add(a, b), LookupError);
}

TEST_CASE("gradient buffers reset between backward passes") {
  // Two backwards through the same parameter value on fresh tapes must give
  // identical gradients (training loops rebuild the graph per batch).
  Tensor w = make_tensor({2}, {0.5, -1.5});
  Tensor g1, g2;
  for (Tensor* out : {&g1, &g2}) {
    Tape tape;
    Var v = tape.param(w);
    Var loss = sum(mul(v, v));
    tape.backward(loss);
    *out = tape.grad(v);
  }
  CHECK(g1[0] == g2[0]);
  CHECK(g1[1] == g2[1]);
}

TEST_CASE("composite expression matches finite differences") {
  Rng rng(42);
  for (int it = 0; it < 5; ++it) {
    std::vector<Tensor> inputs = {testutil::rand_tensor(rng, {3, 4}),
                                  testutil::rand_tensor(rng, {3, 4})};
    const double rel = testutil::fd_max_rel_error(
        inputs, [](Tape&, const std::vector<Var>& v) {
          return sum(mul(add(v[0], v[1]), v[0]));
        });
    CHECK(rel <= 1e-6);
  }
}

TEST_CASE("sgd with momentum matches the hand-rolled recurrence") {
  // One parameter, constant gradient 1: v1 = -lr, p1 = p0 + v1;
  // v2 = m*v1 - lr, p2 = p1 + v2. lr=0.1, m=0.9: p2 = -0.1 - 0.19 = -0.29.
  Tensor p = Tensor::zeros({1});
  Tensor g = Tensor::full({1}, 1.0);
  SgdMomentum opt(0.9);
  std::vector<Tensor*> params{&p};
  std::vector<const Tensor*> grads{&g};
  opt.step(params, grads, 0.1);
  opt.step(params, grads, 0.1);
  CHECK(p[0] == doctest::Approx(-0.29).epsilon(1e-12));
}

}  // TEST_SUITE
