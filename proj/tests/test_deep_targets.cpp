#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "cq/deep.hpp"
#include "cq/rng.hpp"

using cq::CompositeCriticNet;
using cq::CompositeTargets;
using cq::DeepTransition;
using cq::Mlp;
using cq::Rng;
using cq::Td3Config;

namespace {

constexpr double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;

// Zero-weight nets evaluate to their output biases, which makes target
// arithmetic hand-checkable without touching the trunk.
void set_head_biases(CompositeCriticNet& net, const std::vector<double>& tr,
                     const std::vector<double>& sh, double q) {
  for (std::size_t i = 0; i < tr.size(); ++i) {
    net.params.slice("trunc.b")[i] = tr[i];
    net.params.slice("shift.b")[i] = sh[i];
  }
  net.params.slice("q.b")[0] = q;
}

Mlp zero_actor(int sdim, int adim) {
  cq::MlpSpec spec;
  spec.input_dim = sdim;
  spec.hidden = {4};
  spec.output_dim = adim;
  spec.output_act = cq::Act::kTanhBound;
  return Mlp(spec);
}

Mlp bias_critic(int sdim, int adim, const std::vector<double>& biases) {
  cq::MlpSpec spec;
  spec.input_dim = sdim + adim;
  spec.hidden = {3, 3};
  spec.output_dim = static_cast<int>(biases.size());
  Mlp net(spec);
  for (std::size_t i = 0; i < biases.size(); ++i)
    net.params.slice("fc3.b")[i] = biases[i];
  return net;
}

DeepTransition make_t(double r, bool done) {
  DeepTransition t;
  t.s = {0.2, -0.4};
  t.a = {0.1};
  t.next = {-0.3, 0.5};
  t.r = r;
  t.done = done;
  return t;
}

}  // namespace

TEST_CASE("discount ladder") {
  REQUIRE(cq::gamma_schedule(1) == std::vector<double>{0.0});
  REQUIRE(cq::gamma_schedule(4) == std::vector<double>{0.0, 0.5, 0.75, 0.875});
  std::vector<double> g8 = cq::gamma_schedule(8);
  REQUIRE(g8 == std::vector<double>{0.0, 0.5, 0.75, 0.875, 0.9375, 0.96875,
                                    0.984375, 0.99});
  for (std::size_t i = 1; i < g8.size(); ++i) REQUIRE(g8[i] > g8[i - 1]);
  // A tighter cap clamps early.
  REQUIRE(cq::gamma_schedule(4, 0.6) == std::vector<double>{0.0, 0.5, 0.6, 0.6});
  REQUIRE_THROWS_AS(cq::gamma_schedule(0), std::invalid_argument);
}

TEST_CASE("prediction entropy values") {
  SECTION("unit variance gives the standard gaussian entropy") {
    std::vector<double> x = {0.0, std::sqrt(2.0)};
    cq::EntropyGrad e = cq::prediction_entropy(x, 1e-6);
    REQUIRE(e.h == Catch::Approx(1.41894).margin(5e-6));
    REQUIRE(e.h == Catch::Approx(0.5 * std::log(kTwoPiE)).margin(1e-12));
  }
  SECTION("variance 2") {
    std::vector<double> x = {0.0, 2.0};
    cq::EntropyGrad e = cq::prediction_entropy(x, 1e-6);
    REQUIRE(e.h == Catch::Approx(1.76551).margin(5e-6));
    REQUIRE(e.h == Catch::Approx(0.5 * std::log(2.0 * kTwoPiE)).margin(1e-12));
    REQUIRE(e.d[0] == Catch::Approx(-0.5).margin(1e-12));
    REQUIRE(e.d[1] == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("equal entries pin to the floor with zero gradient") {
    std::vector<double> x = {1.3, 1.3, 1.3};
    cq::EntropyGrad e = cq::prediction_entropy(x, 1e-6);
    REQUIRE(e.h == Catch::Approx(0.5 * std::log(kTwoPiE * 1e-6)).margin(1e-12));
    for (double d : e.d) REQUIRE(d == 0.0);
  }
  SECTION("a single head is the floor case") {
    std::vector<double> x = {5.0};
    cq::EntropyGrad e = cq::prediction_entropy(x, 1e-4);
    REQUIRE(e.h == Catch::Approx(0.5 * std::log(kTwoPiE * 1e-4)).margin(1e-12));
    REQUIRE(e.d[0] == 0.0);
  }
  SECTION("strictly increasing in the variance above the floor") {
    double prev = -1e9;
    for (double spread : {0.1, 0.5, 1.0, 3.0}) {
      std::vector<double> x = {0.0, spread};
      double h = cq::prediction_entropy(x, 1e-6).h;
      REQUIRE(h > prev);
      prev = h;
    }
  }
  SECTION("gradient matches central differences") {
    std::vector<double> x = {0.3, -1.1, 0.7, 2.2, -0.4};
    cq::EntropyGrad e = cq::prediction_entropy(x, 1e-6);
    const double h = 1e-6;
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::vector<double> xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      double fd = (cq::prediction_entropy(xp, 1e-6).h -
                   cq::prediction_entropy(xm, 1e-6).h) /
                  (2.0 * h);
      REQUIRE(e.d[i] == Catch::Approx(fd).margin(1e-8));
    }
  }
  SECTION("head-sum wrapper") {
    std::vector<double> tr = {1.0, 2.0}, sh = {-1.0, -0.0};
    // sums {0, 2} -> variance 2
    REQUIRE(cq::entropy_of_predictions(tr, sh, 1e-6) ==
            Catch::Approx(0.5 * std::log(2.0 * kTwoPiE)).margin(1e-12));
    std::vector<double> bad = {1.0};
    REQUIRE_THROWS_AS(cq::entropy_of_predictions(tr, bad, 1e-6),
                      std::invalid_argument);
  }
}

TEST_CASE("smoothed target action mirrors the documented draw order") {
  Mlp actor = zero_actor(2, 2);  // zero weights: mu'(s') = 0
  std::vector<double> next = {0.4, -0.1};
  Rng rng(77), mirror(77);
  std::vector<double> a = cq::smoothed_target_action(actor, next, 0.2, 0.5, rng);
  for (int d = 0; d < 2; ++d) {
    double eps = std::clamp(mirror.gaussian(0.0, 0.2), -0.5, 0.5);
    REQUIRE(a[d] == std::clamp(eps, -1.0, 1.0));
  }
  SECTION("noise is clipped before the action bound") {
    Rng big(5);
    std::vector<double> loud = cq::smoothed_target_action(actor, next, 50.0, 0.3, big);
    for (double v : loud) {
      REQUIRE(v >= -0.3);
      REQUIRE(v <= 0.3);
    }
  }
}

TEST_CASE("composite targets from hand-set twin critics") {
  Td3Config cfg;
  cfg.gamma = 0.5;
  cfg.n = 2;
  cfg.target_noise_sigma = 0.0;
  Mlp actor = zero_actor(2, 1);
  CompositeCriticNet c1(2, 1, 3, 2), c2(2, 1, 3, 2);
  set_head_biases(c1, {1.0, 2.0}, {3.0, 4.0}, 10.0);
  set_head_biases(c2, {5.0, 0.5}, {1.0, 7.0}, 8.0);

  std::vector<DeepTransition> batch = {make_t(2.0, false), make_t(2.0, true)};
  Rng rng(3);

  SECTION("twin head-wise minimum") {
    CompositeTargets y = cq::composite_targets(actor, c1, &c2, batch, cfg, rng);
    // mins: tr' = (1, 0.5), sh' = (1, 4), q' = 8
    REQUIRE(y.tr[0][0] == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(y.tr[0][1] == Catch::Approx(2.0 + 0.5 * 1.0).margin(1e-12));
    REQUIRE(y.sh[0][0] == Catch::Approx(0.5 * 8.0).margin(1e-12));
    REQUIRE(y.sh[0][1] == Catch::Approx(0.5 * 1.0).margin(1e-12));
    REQUIRE(y.q[0] == Catch::Approx(2.0 + 0.5 * (0.5 + 4.0)).margin(1e-12));

    // done: every truncated target is r, every shifted target 0.
    REQUIRE(y.tr[1] == std::vector<double>{2.0, 2.0});
    REQUIRE(y.sh[1] == std::vector<double>{0.0, 0.0});
    REQUIRE(y.q[1] == 2.0);
  }

  SECTION("single critic bootstraps from itself") {
    CompositeTargets y = cq::composite_targets(actor, c1, nullptr, batch, cfg, rng);
    REQUIRE(y.sh[0][0] == Catch::Approx(0.5 * 10.0).margin(1e-12));
    REQUIRE(y.tr[0][1] == Catch::Approx(2.0 + 0.5 * 1.0).margin(1e-12));
    REQUIRE(y.q[0] == Catch::Approx(2.0 + 0.5 * (2.0 + 4.0)).margin(1e-12));
  }

  SECTION("terminal samples still consume the smoothing draws") {
    Rng a1(9), a2(9);
    cfg.target_noise_sigma = 0.2;
    cq::composite_targets(actor, c1, &c2, batch, cfg, a1);
    // Mirror: 2 samples x 1 action dim, one gaussian each.
    a2.gaussian(0.0, 0.2);
    a2.gaussian(0.0, 0.2);
    REQUIRE(a1.uniform01() == a2.uniform01());
  }
}

TEST_CASE("final-head value target arithmetic") {
  // r=1, gamma=0.99, bootstrap heads 2 and 3: y_q = 1 + 0.99 * 5 = 5.95.
  Td3Config cfg;
  cfg.gamma = 0.99;
  cfg.n = 4;
  cfg.target_noise_sigma = 0.0;
  Mlp actor = zero_actor(2, 1);
  CompositeCriticNet c1(2, 1, 3, 4);
  set_head_biases(c1, {0.0, 0.0, 0.0, 2.0}, {0.0, 0.0, 0.0, 3.0}, 0.0);
  std::vector<DeepTransition> batch = {make_t(1.0, false)};
  Rng rng(4);
  CompositeTargets y = cq::composite_targets(actor, c1, nullptr, batch, cfg, rng);
  REQUIRE(y.q[0] == Catch::Approx(5.95).margin(1e-12));
}

TEST_CASE("composite targets are a fixed point at a scalar decomposition") {
  // Constant-reward scalar world: Q = r/(1-gamma); head i holds the first-i
  // discounted rewards and the tail gamma^i Q.  The targets must reproduce
  // the heads exactly.
  const double r = 0.3, gamma = 0.8;
  const double q = r / (1.0 - gamma);
  const int n = 3;
  std::vector<double> tr(n), sh(n);
  for (int i = 1; i <= n; ++i) {
    tr[i - 1] = r * (1.0 - std::pow(gamma, i)) / (1.0 - gamma);
    sh[i - 1] = std::pow(gamma, i) * q;
  }
  Td3Config cfg;
  cfg.gamma = gamma;
  cfg.n = n;
  cfg.target_noise_sigma = 0.0;
  Mlp actor = zero_actor(2, 1);
  CompositeCriticNet net(2, 1, 3, n);
  set_head_biases(net, tr, sh, q);
  std::vector<DeepTransition> batch = {make_t(r, false)};
  Rng rng(6);
  CompositeTargets y = cq::composite_targets(actor, net, nullptr, batch, cfg, rng);
  for (int i = 0; i < n; ++i) {
    REQUIRE(y.tr[0][i] == Catch::Approx(tr[i]).margin(1e-12));
    REQUIRE(y.sh[0][i] == Catch::Approx(sh[i]).margin(1e-12));
    // Each pair is a complete value estimate.
    REQUIRE(tr[i] + sh[i] == Catch::Approx(q).margin(1e-12));
  }
  REQUIRE(y.q[0] == Catch::Approx(q).margin(1e-12));
}

TEST_CASE("scalar twin targets") {
  Td3Config cfg;
  cfg.gamma = 0.9;
  cfg.target_noise_sigma = 0.0;
  Mlp actor = zero_actor(2, 1);
  Mlp c1 = bias_critic(2, 1, {3.0});
  Mlp c2 = bias_critic(2, 1, {7.0});
  std::vector<DeepTransition> batch = {make_t(1.5, false), make_t(1.5, true)};
  Rng rng(8);
  std::vector<double> y = cq::td3_targets(actor, c1, &c2, batch, cfg, rng);
  REQUIRE(y[0] == Catch::Approx(1.5 + 0.9 * 3.0).margin(1e-12));
  REQUIRE(y[1] == 1.5);
}

TEST_CASE("ladder targets") {
  Td3Config cfg;
  cfg.target_noise_sigma = 0.0;
  Mlp actor = zero_actor(2, 1);

  SECTION("two heads, hand arithmetic") {
    std::vector<double> gammas = {0.0, 0.5};
    Mlp c1 = bias_critic(2, 1, {2.0, 4.0});
    std::vector<DeepTransition> batch = {make_t(1.0, false), make_t(1.0, true)};
    Rng rng(9);
    auto y = cq::delta_targets(actor, c1, nullptr, gammas, batch, cfg, rng);
    REQUIRE(y[0][0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(y[0][1] == Catch::Approx(0.5 * 2.0 + 0.5 * 4.0).margin(1e-12));
    REQUIRE(y[1] == std::vector<double>{1.0, 0.0});
  }

  SECTION("twin minimum applies per head") {
    std::vector<double> gammas = {0.0, 0.5};
    Mlp c1 = bias_critic(2, 1, {2.0, 4.0});
    Mlp c2 = bias_critic(2, 1, {5.0, 0.0});
    std::vector<DeepTransition> batch = {make_t(1.0, false)};
    Rng rng(10);
    auto y = cq::delta_targets(actor, c1, &c2, gammas, batch, cfg, rng);
    // mins (2, 0): y_2 = 0.5*2 + 0.5*0 = 1
    REQUIRE(y[0][1] == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("three heads with distinct gaps") {
    std::vector<double> gammas = {0.0, 0.5, 0.75};
    Mlp c1 = bias_critic(2, 1, {2.0, -1.0, 3.0});
    Mlp c2 = bias_critic(2, 1, {1.0, 4.0, 5.0});
    std::vector<DeepTransition> batch = {make_t(1.0, false)};
    Rng rng(11);
    auto y = cq::delta_targets(actor, c1, &c2, gammas, batch, cfg, rng);
    // mins (1, -1, 3): prefix sums 1, 0
    REQUIRE(y[0][0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(y[0][1] == Catch::Approx(0.5 * 1.0 + 0.5 * (-1.0)).margin(1e-12));
    REQUIRE(y[0][2] == Catch::Approx(0.25 * 0.0 + 0.75 * 3.0).margin(1e-12));
  }

  SECTION("self-consistent ladder is a fixed point and telescopes") {
    // Constant-reward scalar world at each gamma: Q_g = r/(1-g); head i
    // holds Q_{g_i} - Q_{g_{i-1}}.
    const double r = 0.4;
    std::vector<double> gammas = {0.0, 0.5, 0.75};
    std::vector<double> w = {r, 2.0 * r - r, 4.0 * r - 2.0 * r};
    Mlp c1 = bias_critic(2, 1, w);
    std::vector<DeepTransition> batch = {make_t(r, false)};
    Rng rng(12);
    auto y = cq::delta_targets(actor, c1, nullptr, gammas, batch, cfg, rng);
    double sum_y = 0.0, sum_w = 0.0;
    for (int i = 0; i < 3; ++i) {
      REQUIRE(y[0][i] == Catch::Approx(w[i]).margin(1e-12));
      sum_y += y[0][i];
      sum_w += w[i];
    }
    // Prefix sum of the targets is the full-discount one-step target.
    REQUIRE(sum_y == Catch::Approx(r + 0.75 * sum_w).margin(1e-12));
  }
}

TEST_CASE("replay ring buffer retains the newest transitions") {
  cq::DeepReplay buf(3);
  for (int i = 0; i < 5; ++i) {
    DeepTransition t = make_t(static_cast<double>(i), false);
    buf.push(t);
  }
  REQUIRE(buf.size() == 3);
  Rng rng(13), mirror(13);
  std::vector<DeepTransition> got = buf.sample(8, rng);
  std::vector<double> kept = {3.0, 4.0, 2.0};  // slot order after wrap
  for (int i = 0; i < 8; ++i) {
    int idx = mirror.uniform_int(3);
    REQUIRE(got[i].r == kept[idx]);
    REQUIRE((got[i].r == 2.0 || got[i].r == 3.0 || got[i].r == 4.0));
  }
  REQUIRE_THROWS_AS(cq::DeepReplay(0), std::invalid_argument);
}

TEST_CASE("non-finite targets abort with diagnostics") {
  Td3Config cfg;
  cfg.n = 2;
  CompositeCriticNet net(2, 1, 3, 2);
  cq::Adam opt(net.params.layout_ptr());
  std::vector<DeepTransition> batch = {make_t(1.0, false)};
  CompositeTargets y;
  y.tr = {{std::numeric_limits<double>::infinity(), 0.0}};
  y.sh = {{0.0, 0.0}};
  y.q = {0.0};
  REQUIRE_THROWS_AS(cq::composite_critic_step(net, opt, batch, y, cfg),
                    cq::NonFiniteError);
  try {
    cq::composite_critic_step(net, opt, batch, y, cfg);
  } catch (const cq::NonFiniteError& e) {
    REQUIRE(std::string(e.what()).find("non-finite") != std::string::npos);
    REQUIRE(std::string(e.what()).find("inf") != std::string::npos);
  }
}
