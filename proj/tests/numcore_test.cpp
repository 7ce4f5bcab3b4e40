#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "loadcast/num/checkpoint.hpp"
#include "loadcast/num/gradcheck.hpp"
#include "loadcast/num/optim.hpp"
#include "loadcast/num/tensor.hpp"
#include "loadcast/rng.hpp"

using namespace loadcast;
using num::Parameter;
using num::Tape;
using num::Tensor;

namespace {

Tensor random_tensor(num::Shape shape, Rng& rng, bool requires_grad) {
  std::vector<double> values(shape.size());
  for (double& v : values) v = rng.uniform(-1.5, 1.5);
  return Tensor(shape, std::move(values), requires_grad);
}

}  // namespace

TEST_CASE("matmul forward basics") {
  Tape tape;
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor prod = tape.matmul(eye, x);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(prod.value()[i] == x.value()[i]);
  }

  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor ones({2, 1}, {1, 1});
  const Tensor v = tape.matmul(a, ones);
  CHECK(v(0, 0) == 3.0);
  CHECK(v(1, 0) == 7.0);

  CHECK_THROWS_AS((void)tape.matmul(a, x.requires_grad() ? x : Tensor({3, 1}, {1, 2, 3})),
                  ShapeError);
}

TEST_CASE("matmul gradient matches central finite differences") {
  Rng rng(1);
  Tensor a = random_tensor({3, 4}, rng, true);
  Tensor b = random_tensor({4, 2}, rng, true);
  auto objective = [&]() {
    Tape t;
    t.set_grad_enabled(false);
    return t.sum_all(t.matmul(a, b)).item();
  };
  {
    Tape t;
    const Tensor loss = t.sum_all(t.matmul(a, b));
    a.zero_grad();
    b.zero_grad();
    t.backward(loss);
  }
  std::vector<Parameter> params{{"a", a}, {"b", b}};
  const auto result = num::finite_diff_check(objective, params, 1e-6);
  CHECK(result.max_rel_error < 1e-6);
}

TEST_CASE("softmax rows") {
  Tape tape;
  const Tensor zeros = Tensor::zeros({1, 4});
  const Tensor uniform = tape.softmax_rows(zeros);
  for (std::size_t j = 0; j < 4; ++j) CHECK(uniform(0, j) == doctest::Approx(0.25));

  // max subtraction keeps huge logits finite
  const Tensor big({1, 2}, {1000.0, 1000.0});
  const Tensor half = tape.softmax_rows(big);
  CHECK(half(0, 0) == doctest::Approx(0.5));
  CHECK(half(0, 1) == doctest::Approx(0.5));

  Rng rng(2);
  Tensor x = random_tensor({4, 4}, rng, true);
  const Tensor weights = random_tensor({4, 4}, rng, false);
  auto objective = [&]() {
    Tape t;
    t.set_grad_enabled(false);
    return t.sum_all(t.mul(t.softmax_rows(x), weights)).item();
  };
  {
    Tape t;
    const Tensor loss = t.sum_all(t.mul(t.softmax_rows(x), weights));
    x.zero_grad();
    t.backward(loss);
  }
  std::vector<Parameter> params{{"x", x}};
  CHECK(num::finite_diff_check(objective, params, 1e-6).max_rel_error < 1e-6);

  // rows sum to one and stay strictly inside (0, 1)
  Tape t2;
  const Tensor y = t2.softmax_rows(random_tensor({8, 5}, rng, false));
  for (std::size_t i = 0; i < 8; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      sum += y(i, j);
      CHECK(y(i, j) > 0.0);
      CHECK(y(i, j) < 1.0);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("layer norm") {
  Tape tape;
  const Tensor gain = Tensor::full({1, 3}, 1.0);
  const Tensor bias = Tensor::zeros({1, 3});
  const Tensor constant = Tensor::full({2, 3}, 5.0);
  const Tensor normed = tape.layer_norm(constant, gain, bias);
  for (double v : normed.value()) CHECK(v == 0.0);  // eps absorbs zero variance

  const Tensor pm({1, 2}, {-1.0, 1.0});
  const Tensor gain2 = Tensor::full({1, 2}, 1.0);
  const Tensor bias2 = Tensor::zeros({1, 2});
  const Tensor out = tape.layer_norm(pm, gain2, bias2);
  CHECK(out(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(out(0, 1) == doctest::Approx(1.0).epsilon(1e-4));

  Rng rng(3);
  Tensor x = random_tensor({5, 6}, rng, true);
  Tensor g = random_tensor({1, 6}, rng, true);
  Tensor b = random_tensor({1, 6}, rng, true);
  const Tensor weights = random_tensor({5, 6}, rng, false);
  auto objective = [&]() {
    Tape t;
    t.set_grad_enabled(false);
    return t.sum_all(t.mul(t.layer_norm(x, g, b), weights)).item();
  };
  {
    Tape t;
    const Tensor loss = t.sum_all(t.mul(t.layer_norm(x, g, b), weights));
    x.zero_grad();
    g.zero_grad();
    b.zero_grad();
    t.backward(loss);
  }
  std::vector<Parameter> params{{"x", x}, {"gain", g}, {"bias", b}};
  CHECK(num::finite_diff_check(objective, params, 1e-5).max_rel_error < 1e-5);
}

TEST_CASE("elementwise suite") {
  Tape tape;
  const Tensor x({1, 3}, {-1.0, 0.0, 2.0});
  const Tensor r = tape.relu(x);
  CHECK(r.value()[0] == 0.0);
  CHECK(r.value()[1] == 0.0);
  CHECK(r.value()[2] == 2.0);

  const Tensor z = Tensor::zeros({1, 3});
  const Tensor same = tape.add(x, z);
  for (std::size_t i = 0; i < 3; ++i) CHECK(same.value()[i] == x.value()[i]);

  CHECK_THROWS_AS((void)tape.add(x, Tensor::zeros({2, 2})), ShapeError);

  // composite expression gradient: relu(a*b + scale(a, 0.5)) summed
  Rng rng(4);
  Tensor a = random_tensor({3, 3}, rng, true);
  Tensor b = random_tensor({3, 3}, rng, true);
  auto objective = [&]() {
    Tape t;
    t.set_grad_enabled(false);
    return t.sum_all(t.relu(t.add(t.mul(a, b), t.scale(a, 0.5)))).item();
  };
  {
    Tape t;
    const Tensor loss = t.sum_all(t.relu(t.add(t.mul(a, b), t.scale(a, 0.5))));
    a.zero_grad();
    b.zero_grad();
    t.backward(loss);
  }
  std::vector<Parameter> params{{"a", a}, {"b", b}};
  CHECK(num::finite_diff_check(objective, params, 1e-6).max_rel_error < 1e-6);
}

TEST_CASE("backward semantics") {
  // d(w^T w)/dw = 2w
  Tensor w({1, 1}, {3.0}, true);
  {
    Tape t;
    const Tensor loss = t.sum_all(t.mul(w, w));
    t.backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(6.0));
    // repeated backward without reset accumulates one more contribution
    t.backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(12.0));
  }

  // a parameter the loss never touches keeps a zero gradient
  Tensor unused({2, 2}, {1, 2, 3, 4}, true);
  Tensor used({1, 1}, {2.0}, true);
  {
    Tape t;
    const Tensor loss = t.scale(used, 3.0);
    t.backward(loss);
  }
  for (double g : unused.grad()) CHECK(g == 0.0);

  // non-scalar loss is rejected
  Tape t;
  const Tensor mat = t.add(unused, unused);
  CHECK_THROWS(t.backward(mat));
}

TEST_CASE("gradient accumulation is linear") {
  Rng rng(5);
  Tensor w = random_tensor({2, 3}, rng, true);
  const Tensor c1 = random_tensor({2, 3}, rng, false);
  const Tensor c2 = random_tensor({2, 3}, rng, false);
  const double alpha = 0.7, beta = -1.3;

  auto grad_of = [&](bool first, bool second, double sa, double sb) {
    Tape t;
    w.zero_grad();
    Tensor loss = Tensor::scalar_of(0.0);
    const Tensor f = t.sum_all(t.mul(w, c1));
    const Tensor g = t.sum_all(t.relu(t.mul(w, c2)));
    if (first && second) {
      loss = t.add(t.scale(f, sa), t.scale(g, sb));
    } else if (first) {
      loss = t.scale(f, sa);
    } else {
      loss = t.scale(g, sb);
    }
    t.backward(loss);
    return std::vector<double>(w.grad().begin(), w.grad().end());
  };

  const auto gf = grad_of(true, false, alpha, 0.0);
  const auto gg = grad_of(false, true, 0.0, beta);
  const auto combined = grad_of(true, true, alpha, beta);
  for (std::size_t i = 0; i < combined.size(); ++i) {
    CHECK(std::abs(combined[i] - (gf[i] + gg[i])) < 1e-10);
  }
}

TEST_CASE("forward determinism is bit exact") {
  Rng rng(6);
  const Tensor a = random_tensor({16, 16}, rng, false);
  const Tensor b = random_tensor({16, 16}, rng, false);
  Tape t1, t2;
  const Tensor r1 = t1.softmax_rows(t1.matmul(a, b));
  const Tensor r2 = t2.softmax_rows(t2.matmul(a, b));
  CHECK(std::memcmp(r1.value().data(), r2.value().data(),
                    r1.size() * sizeof(double)) == 0);
}

TEST_CASE("finite_diff_check calibration") {
  // linear objective: central differences are exact up to rounding
  Tensor w({1, 4}, {0.5, -1.0, 2.0, 0.25}, true);
  const Tensor c({1, 4}, {1.0, 2.0, 3.0, 4.0});
  auto linear = [&]() {
    Tape t;
    t.set_grad_enabled(false);
    return t.sum_all(t.mul(w, c)).item();
  };
  {
    Tape t;
    const Tensor loss = t.sum_all(t.mul(w, c));
    w.zero_grad();
    t.backward(loss);
  }
  std::vector<Parameter> params{{"w", w}};
  CHECK(num::finite_diff_check(linear, params, 1e-5).max_rel_error < 1e-9);

  // quadratic objective: central differences are exact for quadratics
  auto quadratic = [&]() {
    Tape t;
    t.set_grad_enabled(false);
    return t.sum_all(t.mul(w, w)).item();
  };
  {
    Tape t;
    const Tensor loss = t.sum_all(t.mul(w, w));
    w.zero_grad();
    t.backward(loss);
  }
  CHECK(num::finite_diff_check(quadratic, params, 1e-5).max_rel_error < 1e-8);

  CHECK_THROWS_AS((void)num::finite_diff_check(linear, params, 0.0),
                  DomainError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(7);
  std::vector<Parameter> params;
  params.push_back({"layer.w", random_tensor({7, 3}, rng, true)});
  params.push_back({"layer.b", random_tensor({1, 3}, rng, true)});
  const auto path = std::filesystem::temp_directory_path() / "lc_ckpt_test.bin";
  num::save_checkpoint(path, params);
  const auto loaded = num::load_checkpoint(path);
  REQUIRE(loaded.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(loaded[i].name == params[i].name);
    REQUIRE(loaded[i].tensor.shape() == params[i].tensor.shape());
    CHECK(std::memcmp(loaded[i].tensor.value().data(),
                      params[i].tensor.value().data(),
                      params[i].tensor.size() * sizeof(double)) == 0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("adam skips masked parameters entirely") {
  Tensor w1({1, 2}, {1.0, 2.0}, true);
  Tensor w2({1, 2}, {3.0, 4.0}, true);
  std::vector<Parameter> params{{"a", w1}, {"b", w2}};
  num::AdamOptimizer opt(params, {});
  w1.grad_mut()[0] = 1.0;
  w1.grad_mut()[1] = -1.0;
  w2.grad_mut()[0] = 1.0;
  w2.grad_mut()[1] = 1.0;
  const std::vector<double> w2_before(w2.value().begin(), w2.value().end());
  const std::vector<bool> mask{true, false};
  opt.step(&mask);
  CHECK(w1.value()[0] != 1.0);
  CHECK(std::memcmp(w2.value().data(), w2_before.data(),
                    2 * sizeof(double)) == 0);
}
