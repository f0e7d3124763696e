#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cq/deep.hpp"
#include "cq/env.hpp"
#include "cq/rng.hpp"

using cq::CompositeTd3Agent;
using cq::DeepTransition;
using cq::DeltaTd3Agent;
using cq::EvalPoint;
using cq::PointReachEnv;
using cq::Rng;
using cq::Td3Agent;
using cq::Td3Config;
using cq::TrainLoopConfig;

namespace {

// Records how the loop drives an agent without learning anything.
struct CountingAgent : cq::DeepAgent {
  mutable long act_calls = 0;
  long train_calls = 0;
  std::vector<std::size_t> batch_sizes;

  std::vector<double> act(std::span<const double>) const override {
    ++act_calls;
    return std::vector<double>(PointReachEnv::kActionDim, 0.0);
  }
  void train_batch(std::span<const DeepTransition> batch, Rng&) override {
    ++train_calls;
    batch_sizes.push_back(batch.size());
  }
  std::map<std::string, double> diagnostics() const override { return {}; }
};

TrainLoopConfig tiny_loop() {
  TrainLoopConfig loop;
  loop.env_steps = 300;
  loop.warmup_steps = 50;
  loop.batch_size = 16;
  loop.replay_capacity = 1000;
  loop.eval_every = 100;
  loop.eval_episodes = 3;
  return loop;
}

Td3Config tiny_cfg() {
  Td3Config cfg;
  cfg.n = 2;
  return cfg;
}

}  // namespace

TEST_CASE("the loop schedules warmup, updates, and checkpoints as configured") {
  CountingAgent agent;
  TrainLoopConfig loop;
  loop.env_steps = 50;
  loop.warmup_steps = 20;
  loop.batch_size = 4;
  loop.grad_steps_per_sample = 3;
  loop.replay_capacity = 100;
  loop.eval_every = 25;
  loop.eval_episodes = 2;
  Td3Config cfg;
  Rng master(99);
  std::vector<EvalPoint> curve = cq::train_point_reach(agent, loop, cfg, master);

  REQUIRE(agent.train_calls == (50 - 20) * 3);
  for (std::size_t b : agent.batch_sizes) REQUIRE(b == 4);
  REQUIRE(curve.size() == 2);
  REQUIRE(curve[0].step == 25);
  REQUIRE(curve[1].step == 50);
  REQUIRE(curve[0].diag.empty());
  // The agent never changes, and every checkpoint replays the same
  // evaluation episodes, so the curve is flat to the last bit.
  REQUIRE(curve[0].mean_return == curve[1].mean_return);
}

TEST_CASE("identical seeds give bitwise-identical training runs") {
  Td3Config cfg = tiny_cfg();
  TrainLoopConfig loop = tiny_loop();
  SECTION("clean rewards") {}
  SECTION("corrupted rewards") { loop.reward_noise_p = 0.4; }

  Rng init_a(7);
  CompositeTd3Agent a(PointReachEnv::kStateDim, PointReachEnv::kActionDim, 8,
                      {8}, cfg, init_a);
  Rng master_a(21);
  std::vector<EvalPoint> curve_a = cq::train_point_reach(a, loop, cfg, master_a);

  Rng init_b(7);
  CompositeTd3Agent b(PointReachEnv::kStateDim, PointReachEnv::kActionDim, 8,
                      {8}, cfg, init_b);
  Rng master_b(21);
  std::vector<EvalPoint> curve_b = cq::train_point_reach(b, loop, cfg, master_b);

  REQUIRE(curve_a.size() == curve_b.size());
  for (std::size_t i = 0; i < curve_a.size(); ++i) {
    REQUIRE(curve_a[i].step == curve_b[i].step);
    REQUIRE(curve_a[i].mean_return == curve_b[i].mean_return);
    REQUIRE(curve_a[i].diag == curve_b[i].diag);
  }
  REQUIRE(a.critic().params.v == b.critic().params.v);
  REQUIRE(a.actor().params.v == b.actor().params.v);
}

TEST_CASE("the actor moves only on delayed update steps") {
  Td3Config cfg = tiny_cfg();
  cfg.policy_delay = 2;
  Rng init(3);
  CompositeTd3Agent agent(2, 2, 8, {8}, cfg, init);
  std::vector<double> actor0 = agent.actor().params.v;

  Rng rng(11);
  std::vector<DeepTransition> batch(4);
  for (DeepTransition& t : batch) {
    t.s = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    t.a = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    t.next = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    t.r = rng.uniform(-1.0, 0.0);
  }
  agent.train_batch(batch, rng);
  std::vector<double> critic_after1 = agent.critic().params.v;
  REQUIRE(agent.actor().params.v == actor0);
  agent.train_batch(batch, rng);
  REQUIRE(agent.actor().params.v != actor0);
  REQUIRE(agent.critic().params.v != critic_after1);
}

TEST_CASE("composite diagnostics expose per-head residuals") {
  Td3Config cfg = tiny_cfg();
  cfg.n = 3;
  Rng init(5);
  CompositeTd3Agent agent(2, 2, 8, {8}, cfg, init);
  Rng rng(6);
  std::vector<DeepTransition> batch(2);
  for (DeepTransition& t : batch) {
    t.s = {0.1, -0.2};
    t.a = {0.3, 0.0};
    t.next = {0.0, 0.4};
    t.r = -0.5;
  }
  agent.train_batch(batch, rng);
  std::map<std::string, double> d = agent.diagnostics();
  for (const char* key : {"critic_mse", "td_abs_q", "pred_entropy",
                          "td_abs_tr_1", "td_abs_tr_2", "td_abs_tr_3",
                          "td_abs_sh_1", "td_abs_sh_2", "td_abs_sh_3"}) {
    REQUIRE(d.count(key) == 1);
    REQUIRE(std::isfinite(d.at(key)));
  }
  REQUIRE(d.at("critic_mse") > 0.0);
}

TEST_CASE("baseline agents run the same loop and stay bounded") {
  TrainLoopConfig loop = tiny_loop();
  loop.env_steps = 150;
  loop.eval_every = 50;
  Td3Config cfg = tiny_cfg();

  SECTION("scalar twin critic baseline") {
    Rng init(13);
    Td3Agent agent(PointReachEnv::kStateDim, PointReachEnv::kActionDim, 8, {8},
                   cfg, init);
    Rng master(14);
    std::vector<EvalPoint> curve = cq::train_point_reach(agent, loop, cfg, master);
    REQUIRE(curve.size() == 3);
    for (const EvalPoint& p : curve) {
      REQUIRE(std::isfinite(p.mean_return));
      REQUIRE(p.mean_return <= 0.0);
      REQUIRE(std::isfinite(p.diag.at("critic_mse")));
    }
    std::vector<double> a = agent.act(std::vector<double>{0.9, -0.9});
    for (double ai : a) REQUIRE(std::abs(ai) <= 1.0);
  }
  SECTION("multi-gamma ladder baseline") {
    std::vector<double> gammas = cq::gamma_schedule(4);
    REQUIRE(gammas == std::vector<double>{0.0, 0.5, 0.75, 0.875});
    Rng init(15);
    DeltaTd3Agent agent(PointReachEnv::kStateDim, PointReachEnv::kActionDim, 8,
                        {8}, gammas, cfg, init);
    REQUIRE(agent.gammas() == gammas);
    Rng master(16);
    std::vector<EvalPoint> curve = cq::train_point_reach(agent, loop, cfg, master);
    REQUIRE(curve.size() == 3);
    for (const EvalPoint& p : curve) REQUIRE(std::isfinite(p.mean_return));
  }
}

TEST_CASE("a diverging critic aborts instead of training on garbage") {
  Td3Config cfg = tiny_cfg();
  cfg.plain_sgd = true;
  cfg.alpha_q = 1e6;
  cfg.alpha_tr = 1e6;
  cfg.alpha_sh = 1e6;
  Rng init(31);
  CompositeTd3Agent agent(2, 2, 8, {8}, cfg, init);
  Rng rng(32);
  std::vector<DeepTransition> batch(4);
  for (DeepTransition& t : batch) {
    t.s = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    t.a = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    t.next = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    t.r = -1.0;
  }
  auto blow_up = [&]() {
    for (int i = 0; i < 200; ++i) agent.train_batch(batch, rng);
  };
  REQUIRE_THROWS_AS(blow_up(), cq::NonFiniteError);
}

TEST_CASE("evaluation is a pure function of the stream state") {
  Rng init(41);
  CompositeTd3Agent agent(PointReachEnv::kStateDim, PointReachEnv::kActionDim,
                          8, {8}, tiny_cfg(), init);
  Rng e1(77);
  Rng e2(77);
  double r1 = cq::evaluate_point_reach(agent, 5, e1);
  double r2 = cq::evaluate_point_reach(agent, 5, e2);
  REQUIRE(r1 == r2);
  REQUIRE(r1 < 0.0);
}
