#include <doctest.h>

#include <cmath>
#include <cstring>

#include "loren/autodiff.hpp"
#include "loren/errors.hpp"
#include "loren/ops.hpp"
#include "loren/rng.hpp"
#include "loren/tensor.hpp"
#include "oracles.hpp"

using namespace loren;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.numel())) == 0;
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.rank() == 3);
  CHECK(t.shape_str() == "[2,3,4]");
  for (int64_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);

  Tensor f = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(f[2] == 3);
  CHECK(f[3] == 4);
  CHECK(f.all_finite());
  f[0] = std::nan("");
  CHECK_FALSE(f.all_finite());
}

TEST_CASE("conv2d identity kernel is the identity map") {
  Rng rng(11);
  Tensor x = random_tensor({5, 6, 3}, rng);
  Tensor w({3, 3, 3, 3});
  for (int64_t c = 0; c < 3; ++c) w[((1 * 3 + 1) * 3 + c) * 3 + c] = 1.0;
  Tensor b({3});
  Tensor y = ops::conv2d(x, w, b);
  CHECK(bitwise_equal(x, y));
}

TEST_CASE("conv2d all-ones 3x3 kernel: center 9, corners 4") {
  Tensor x = Tensor::full({3, 3, 1}, 1.0);
  Tensor w = Tensor::full({3, 3, 1, 1}, 1.0);
  Tensor b({1});
  Tensor y = ops::conv2d(x, w, b);
  CHECK(y.at(1, 1, 0) == 9.0);
  CHECK(y.at(0, 0, 0) == 4.0);
  CHECK(y.at(0, 2, 0) == 4.0);
  CHECK(y.at(2, 0, 0) == 4.0);
  CHECK(y.at(2, 2, 0) == 4.0);
  CHECK(y.at(0, 1, 0) == 6.0);
}

TEST_CASE("3x3 conv at 128 channels carries 147456 weights") {
  Tensor w({3, 3, 128, 128});
  CHECK(w.numel() == 147456);
}

TEST_CASE("conv2d matches the direct-loop oracle") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor({4, 5, 3}, rng);
    Tensor w = random_tensor({3, 3, 3, 2}, rng);
    Tensor b = random_tensor({2}, rng);
    Tensor got = ops::conv2d(x, w, b);
    Tensor want = oracles::conv2d(x, w, b);
    REQUIRE(got.same_shape(want));
    for (int64_t i = 0; i < got.numel(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d rejects mismatched shapes") {
  Tensor x({4, 4, 3});
  Tensor w({3, 3, 2, 2});  // Cin mismatch
  Tensor b({2});
  CHECK_THROWS_AS(ops::conv2d(x, w, b), ShapeError);
  Tensor w_even({2, 2, 3, 2});
  CHECK_THROWS_AS(ops::conv2d(x, w_even, b), ShapeError);
}

TEST_CASE("conv1x1 identity and permutation") {
  Rng rng(13);
  Tensor x = random_tensor({3, 4, 2}, rng);
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  CHECK(bitwise_equal(ops::conv1x1(x, eye), x));

  Tensor one = Tensor::from({1, 1, 2}, {1, 2});
  Tensor swap = Tensor::from({2, 2}, {0, 1, 1, 0});
  Tensor swapped = ops::conv1x1(one, swap);
  CHECK(swapped.at(0, 0, 0) == 2.0);
  CHECK(swapped.at(0, 0, 1) == 1.0);
}

TEST_CASE("conv1x1 equals conv2d with a 1x1 kernel") {
  Rng rng(14);
  Tensor x = random_tensor({4, 4, 3}, rng);
  Tensor m = random_tensor({3, 5}, rng);
  Tensor w({1, 1, 3, 5});
  for (int64_t i = 0; i < m.numel(); ++i) w[i] = m[i];
  Tensor b({5});
  Tensor got = ops::conv1x1(x, m);
  Tensor want = ops::conv2d(x, w, b);
  for (int64_t i = 0; i < got.numel(); ++i)
    CHECK(std::abs(got[i] - want[i]) <= 1e-12);
}

TEST_CASE("layer_norm hand-computed example") {
  Tensor x = Tensor::from({3}, {1, 2, 3});
  Tensor gamma = Tensor::full({3}, 1.0);
  Tensor beta({3});
  Tensor y = ops::layer_norm(x, gamma, beta, {0}, 0.0);
  CHECK(y[0] == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(y[1] == doctest::Approx(0.0));
  CHECK(y[2] == doctest::Approx(1.2247).epsilon(1e-4));
}

TEST_CASE("layer_norm constant input collapses to beta") {
  Tensor x = Tensor::full({2, 3, 4}, 7.5);
  Tensor gamma = Tensor::full({4}, 1.0);
  Tensor beta({4});
  Tensor y = ops::layer_norm(x, gamma, beta, {0, 1, 2}, 1e-6);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("layer_norm affine scale and shift") {
  Tensor x = Tensor::from({3}, {-1, 0, 1});
  // gamma 2, beta 5 on an input that is already zero-mean unit-variance up
  // to the biased/unbiased distinction: normalize first, then check affine.
  Tensor gamma = Tensor::full({3}, 2.0);
  Tensor beta = Tensor::full({3}, 5.0);
  Tensor y = ops::layer_norm(x, gamma, beta, {0}, 0.0);
  const double s = std::sqrt(2.0 / 3.0);  // biased std of [-1,0,1]
  CHECK(y[0] == doctest::Approx(5.0 - 2.0 / s));
  CHECK(y[1] == doctest::Approx(5.0));
  CHECK(y[2] == doctest::Approx(5.0 + 2.0 / s));
}

TEST_CASE("relu add sigmoid scale basics") {
  Tensor x = Tensor::from({3}, {-1, 0, 2});
  Tensor r = ops::relu(x);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 2.0);

  Tensor z({3});
  CHECK(bitwise_equal(ops::add(x, z), x));
  Tensor bad({4});
  CHECK_THROWS_AS(ops::add(x, bad), ShapeError);

  Tensor s = ops::sigmoid(Tensor::from({1}, {0}));
  CHECK(s[0] == 0.5);

  Tensor sc = ops::scale(x, -2.0);
  CHECK(sc[0] == 2.0);
  CHECK(sc[2] == -4.0);
}

TEST_CASE("bce of zero llrs is ln 2") {
  Tensor llrs = Tensor::zeros({2, 4});
  std::vector<uint8_t> bits(8, 0);
  bits[3] = 1;
  CHECK(ops::bce_with_llr(llrs, bits) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("bce of confident correct llrs is near zero") {
  Tensor llrs = Tensor::full({1, 4}, 20.0);  // positive llr = bit 0
  std::vector<uint8_t> bits(4, 0);
  CHECK(ops::bce_with_llr(llrs, bits) < 1e-8);
}

TEST_CASE("bce clamps a confident wrong bit at -log(1e-12)") {
  Tensor llrs = Tensor::full({1, 1}, -100.0);
  std::vector<uint8_t> bits(1, 0);
  CHECK(ops::bce_with_llr(llrs, bits) == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("linear-head bce gradient matches the closed form") {
  Rng rng(15);
  Tensor x = random_tensor({2, 3, 4}, rng);
  Parameter w(Tensor::full({4, 1}, 0.3), "w");
  std::vector<uint8_t> bits(6, 1);  // loss_i = softplus(llr_i) / N

  Tape tape;
  Var y = tape.conv1x1(tape.input(x), tape.param(w));
  Var l = tape.bce_with_llr(y, bits);
  tape.backward(l);

  // dL/dw[c] = (1/N) sum_{t,f} sigmoid(llr_{t,f}) * x[t,f,c]
  const double n = 6.0;
  for (int64_t c = 0; c < 4; ++c) {
    double want = 0;
    for (int64_t t = 0; t < 2; ++t)
      for (int64_t f = 0; f < 3; ++f) {
        double llr = 0;
        for (int64_t k = 0; k < 4; ++k) llr += 0.3 * x.at(t, f, k);
        want += x.at(t, f, c) / (1.0 + std::exp(-llr)) / n;
      }
    CHECK(w.grad[c] == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("finite differences: conv2d, conv1x1, bias") {
  Rng rng(16);
  Tensor x = random_tensor({3, 4, 2}, rng);
  Parameter w(random_tensor({3, 3, 2, 2}, rng, 0.5), "w");
  Parameter b(random_tensor({2}, rng, 0.2), "b");
  Parameter m(random_tensor({2, 3}, rng, 0.5), "m");
  std::vector<uint8_t> bits(3 * 4 * 3, 0);
  for (size_t i = 0; i < bits.size(); i += 2) bits[i] = 1;

  auto loss = [&]() {
    Tape t;
    Var v = t.conv2d(t.input(x), t.param(w), t.param(b));
    v = t.conv1x1(v, t.param(m));
    Var l = t.bce_with_llr(v, bits);
    return l->val()[0];
  };
  // One taped pass to populate grads.
  {
    Tape t;
    Var v = t.conv2d(t.input(x), t.param(w), t.param(b));
    v = t.conv1x1(v, t.param(m));
    Var l = t.bce_with_llr(v, bits);
    w.zero_grad();
    b.zero_grad();
    m.zero_grad();
    t.backward(l);
  }
  CHECK(oracles::fd_worst_error({&w, &b, &m}, loss) < 1e-4);
}

TEST_CASE("finite differences: layer_norm, relu, sigmoid, add, scale, gather") {
  Rng rng(17);
  // Keep inputs away from relu's kink so central differences are valid.
  Tensor x0 = random_tensor({3, 3, 2}, rng);
  for (int64_t i = 0; i < x0.numel(); ++i)
    if (std::abs(x0[i]) < 0.05) x0[i] = 0.1;
  Parameter x(x0, "x");
  Parameter gamma(random_tensor({3, 3, 2}, rng, 0.4), "gamma");
  Parameter beta(random_tensor({3, 3, 2}, rng, 0.4), "beta");
  for (int64_t i = 0; i < gamma.value.numel(); ++i) gamma.value[i] += 1.0;
  std::vector<int32_t> picks = {0, 4, 7};
  std::vector<uint8_t> bits(picks.size() * 2, 1);
  bits[1] = 0;

  auto run = [&](Tape& t) {
    Var v = t.layer_norm(t.param(x), t.param(gamma), t.param(beta), {0, 1, 2}, 1e-6);
    Var branch = t.sigmoid(v);
    v = t.add(t.relu(v), t.scale(branch, 0.25));
    v = t.gather_tf(v, picks);
    return t.bce_with_llr(v, bits);
  };
  auto loss = [&]() {
    Tape t;
    return run(t)->val()[0];
  };
  {
    Tape t;
    Var l = run(t);
    x.zero_grad();
    gamma.zero_grad();
    beta.zero_grad();
    t.backward(l);
  }
  CHECK(oracles::fd_worst_error({&x, &gamma, &beta}, loss) < 1e-4);
}

TEST_CASE("frozen parameters keep zero grads") {
  Rng rng(18);
  Parameter w(random_tensor({2, 2}, rng), "w", false);
  Tensor x = random_tensor({2, 2, 2}, rng);
  std::vector<uint8_t> bits(2 * 2 * 2, 0);

  Tape t;
  Var v = t.conv1x1(t.input(x), t.param(w));
  Var l = t.bce_with_llr(v, bits);
  t.backward(l);
  for (int64_t i = 0; i < w.grad.numel(); ++i) CHECK(w.grad[i] == 0.0);
}

TEST_CASE("backward is deterministic bit for bit") {
  Rng rng(19);
  Tensor x = random_tensor({4, 4, 3}, rng);
  Tensor w0 = random_tensor({3, 3, 3, 2}, rng);
  Tensor b0 = random_tensor({2}, rng);
  std::vector<uint8_t> bits(4 * 4 * 2, 1);

  auto grads = [&]() {
    Parameter w(w0, "w");
    Parameter b(b0, "b");
    Tape t;
    Var l = t.bce_with_llr(t.conv2d(t.input(x), t.param(w), t.param(b)), bits);
    t.backward(l);
    return std::pair<Tensor, Tensor>(w.grad, b.grad);
  };
  auto [gw1, gb1] = grads();
  auto [gw2, gb2] = grads();
  CHECK(bitwise_equal(gw1, gw2));
  CHECK(bitwise_equal(gb1, gb2));
}

TEST_CASE("ops not reaching the loss leave gradients untouched") {
  Rng rng(20);
  Parameter w(random_tensor({2, 2}, rng), "w");
  Parameter unused(random_tensor({2, 2}, rng), "unused");
  Tensor x = random_tensor({2, 2, 2}, rng);
  std::vector<uint8_t> bits(8, 0);

  Tape t;
  Var v = t.conv1x1(t.input(x), t.param(w));
  Var dead = t.conv1x1(v, t.param(unused));  // never consumed by the loss
  (void)dead;
  Var l = t.bce_with_llr(v, bits);
  t.backward(l);

  bool any_w = false;
  for (int64_t i = 0; i < w.grad.numel(); ++i) any_w = any_w || w.grad[i] != 0.0;
  CHECK(any_w);
  for (int64_t i = 0; i < unused.grad.numel(); ++i) CHECK(unused.grad[i] == 0.0);
}

TEST_CASE("backward seed scales gradients for batch averaging") {
  Rng rng(21);
  Tensor x = random_tensor({2, 2, 2}, rng);
  Parameter w1(random_tensor({2, 1}, rng), "w");
  Parameter w2(w1.value, "w");
  std::vector<uint8_t> bits(4, 1);

  Tape t1;
  Var l1 = t1.bce_with_llr(t1.conv1x1(t1.input(x), t1.param(w1)), bits);
  t1.backward(l1, 1.0);
  Tape t2;
  Var l2 = t2.bce_with_llr(t2.conv1x1(t2.input(x), t2.param(w2)), bits);
  t2.backward(l2, 0.5);
  for (int64_t i = 0; i < w1.grad.numel(); ++i)
    CHECK(w2.grad[i] == doctest::Approx(0.5 * w1.grad[i]).epsilon(1e-15));
}
