#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "pars/nn.hpp"
#include "pars/rng.hpp"

using namespace pars;
using namespace pars::testing;

TEST_CASE("rng streams are reproducible and label-separated") {
  Rng a(7, "init"), b(7, "init"), c(7, "augment"), d(8, "init");
  const auto x = a.next_u64();
  CHECK(x == b.next_u64());
  CHECK(x != c.next_u64());
  CHECK(x != d.next_u64());
  CHECK(derive_seed(0, "a") != derive_seed(0, "b"));
}

TEST_CASE("rng variates have the right moments") {
  Rng rng(123);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  std::vector<int> counts(7, 0);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    counts[rng.index(7)]++;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  for (int c : counts) CHECK(static_cast<double>(c) / n == doctest::Approx(1.0 / 7).epsilon(0.03));

  auto perm = rng.permutation(50);
  std::set<std::size_t> seen(perm.begin(), perm.end());
  CHECK(seen.size() == 50);
  CHECK(*seen.rbegin() == 49);
}

TEST_CASE("softmax") {
  SUBCASE("matches the reference and sums to one") {
    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
      const auto f = random_vector(6, rng, 5.0);
      const auto p = softmax(f);
      const auto ref = reference_softmax(f);
      double s = 0;
      for (std::size_t k = 0; k < 6; ++k) {
        CHECK(p[k] == doctest::Approx(ref[k]).epsilon(1e-12));
        s += p[k];
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("shift invariant and stable for huge logits") {
    const std::vector<double> f{1000.0, 999.0, 998.0};
    const std::vector<double> g{2.0, 1.0, 0.0};
    const auto p = softmax(f), q = softmax(g);
    for (std::size_t k = 0; k < 3; ++k) CHECK(p[k] == doctest::Approx(q[k]).epsilon(1e-12));
  }
  SUBCASE("rejects non-finite logits") {
    const std::vector<double> bad{0.0, NAN};
    CHECK_THROWS(softmax(bad));
    const std::vector<double> inf{0.0, INFINITY};
    CHECK_THROWS(softmax(inf));
  }
}

TEST_CASE("ProbVector argmax, max and clamping") {
  const ProbVector tie({0.4, 0.4, 0.2});
  CHECK(tie.argmax() == 0);
  CHECK(tie.max() == 0.4);
  const ProbVector p({1.0, 0.0, 0.0});
  CHECK(p.clamped(1) == kProbFloor);
  CHECK(p.clamped(0) == 1.0);
  const ProbVector u({1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(u.argmax() == 0);
}

TEST_CASE("glorot init respects the bound and zeroes biases") {
  const std::vector<std::size_t> widths{3, 64, 64, 5};
  Rng rng(5);
  const auto p = ModelParams::glorot(widths, rng);
  CHECK(p.num_parameters() == 3 * 64 + 64 + 64 * 64 + 64 + 64 * 5 + 5);
  for (const auto& l : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    double s2 = 0;
    for (double w : l.weight) {
      CHECK(std::abs(w) <= limit);
      s2 += w * w;
    }
    // variance of U(-a, a) is a^2 / 3
    CHECK(s2 / static_cast<double>(l.weight.size()) ==
          doctest::Approx(limit * limit / 3).epsilon(0.25));
    for (double b : l.bias) CHECK(b == 0.0);
  }
}

TEST_CASE("flatten and assign_flat round-trip") {
  const std::vector<std::size_t> widths{2, 4, 3};
  Rng rng(2);
  auto p = random_model(widths, rng);
  const auto flat = p.flatten();
  CHECK(flat.size() == p.num_parameters());
  auto q = p.zeros_like();
  q.assign_flat(flat);
  CHECK(q == p);
  CHECK_THROWS(q.assign_flat(std::vector<double>(flat.size() - 1)));
}

TEST_CASE("forward pass matches an independent implementation") {
  const std::vector<std::size_t> widths{3, 7, 5, 4};
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_model(widths, rng);
    const auto x = random_vector(3, rng);
    const auto cache = mlp_forward(p, x);
    const auto ref = reference_logits(p, x);
    for (std::size_t k = 0; k < 4; ++k) CHECK(cache.logits()[k] == doctest::Approx(ref[k]).epsilon(1e-12));
  }
  CHECK_THROWS(mlp_forward(random_model(widths, rng), std::vector<double>{1.0, 2.0}));
}

TEST_CASE("backward pass matches finite differences") {
  // Scalar c . logits(theta) for random c; gradient through every layer.
  const std::vector<std::size_t> widths{3, 8, 8, 4};
  Rng rng(4);
  int checked = 0;
  while (checked < 100) {
    auto p = random_model(widths, rng);
    const auto x = random_vector(3, rng);
    if (min_hidden_margin(p, x) < 1e-3) continue;
    const auto c = random_vector(4, rng);
    const auto analytic = mlp_backward(p, mlp_forward(p, x), c).flatten();
    auto f = [&](std::span<const double> theta) {
      ModelParams q = p;
      q.assign_flat(theta);
      const auto z = reference_logits(q, x);
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += c[k] * z[k];
      return s;
    };
    const auto numeric = central_differences(f, p.flatten());
    CHECK(relative_error(analytic, numeric) < 1e-6);
    ++checked;
  }
}

TEST_CASE("backward accumulates into existing gradients") {
  const std::vector<std::size_t> widths{2, 3, 2};
  Rng rng(9);
  const auto p = random_model(widths, rng);
  const auto x = random_vector(2, rng);
  const std::vector<double> d{0.3, -0.7};
  const auto cache = mlp_forward(p, x);
  auto once = mlp_backward(p, cache, d);
  auto twice = once;
  mlp_backward(p, cache, d, twice);
  const auto a = once.flatten(), b = twice.flatten();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(2 * a[i]));
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 100, 0.03) == doctest::Approx(0.03));
  CHECK(cosine_lr(100, 100, 0.03) == doctest::Approx(0.03 * std::cos(7 * std::numbers::pi / 16)));
  CHECK(cosine_lr(50, 100, 0.03) == doctest::Approx(0.03 * std::cos(7 * std::numbers::pi / 32)));
  double prev = 1.0;
  for (int t = 0; t <= 100; ++t) {
    const double lr = cosine_lr(t, 100, 1.0);
    CHECK(lr <= prev);
    CHECK(lr > 0.0);
    prev = lr;
  }
  CHECK_THROWS(cosine_lr(101, 100, 0.03));
  CHECK_THROWS(cosine_lr(-1, 100, 0.03));
  CHECK_THROWS(cosine_lr(0, 0, 0.03));
}

TEST_CASE("sgd with momentum and weight decay follows the update rule by hand") {
  const std::vector<std::size_t> widths{1, 1};
  ModelParams p = ModelParams::zeros(widths);
  p.layers[0].weight[0] = 2.0;
  p.layers[0].bias[0] = -1.0;
  ModelParams g = p.zeros_like();
  g.layers[0].weight[0] = 0.5;
  g.layers[0].bias[0] = 0.25;

  OptimState st(p, 4, 0.1, 0.9, 0.01);
  // step 0: lr = 0.1
  sgd_step(p, g, st);
  const double b0w = 0.5 + 0.01 * 2.0;
  const double w1 = 2.0 - 0.1 * b0w;
  const double b0b = 0.25 + 0.01 * -1.0;
  const double c1 = -1.0 - 0.1 * b0b;
  CHECK(p.layers[0].weight[0] == doctest::Approx(w1).epsilon(1e-14));
  CHECK(p.layers[0].bias[0] == doctest::Approx(c1).epsilon(1e-14));
  // step 1: lr = 0.1 cos(7 pi / 64)
  sgd_step(p, g, st);
  const double lr1 = 0.1 * std::cos(7 * std::numbers::pi / 64);
  const double b1w = 0.9 * b0w + (0.5 + 0.01 * w1);
  CHECK(p.layers[0].weight[0] == doctest::Approx(w1 - lr1 * b1w).epsilon(1e-14));
  CHECK(st.step == 2);

  sgd_step(p, g, st);
  sgd_step(p, g, st);
  CHECK_THROWS_AS(sgd_step(p, g, st), std::logic_error);

  CHECK_THROWS(OptimState(p, 10, 0.0, 0.9, 0.0));
  CHECK_THROWS(OptimState(p, 10, 0.1, 1.0, 0.0));
  CHECK_THROWS(OptimState(p, 10, 0.1, 0.9, -1.0));
}

TEST_CASE("ema update") {
  const std::vector<std::size_t> widths{2, 2};
  Rng rng(11);
  const auto p = random_model(widths, rng);
  EmaParams ema{p.zeros_like(), 0.9};
  ema_update(ema, p);
  const auto s = ema.shadow.flatten(), f = p.flatten();
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(0.1 * f[i]));
  EmaParams copy{p.zeros_like(), 0.0};
  ema_update(copy, p);
  CHECK(copy.shadow == p);
}
