#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cq/critic.hpp"
#include "cq/env.hpp"
#include "cq/mlp.hpp"
#include "cq/rng.hpp"

namespace cq {

/**
 * Hyperparameters of the delayed twin-critic actor-critic stack.  alpha_q
 * drives the main body, the final value head, and the actor; the truncated
 * and shifted head rows get their own step sizes.  beta_tr / beta_sh weight
 * the prediction-entropy term, which the truncated heads descend and the
 * shifted heads ascend.
 */
struct Td3Config {
  double gamma = 0.99;
  int n = 4;                        // truncation depth of the composite critic
  double alpha_q = 1e-3;
  double alpha_tr = 6e-5;
  double alpha_sh = 5e-3;
  double beta_tr = 0.002;
  double beta_sh = 0.001;
  double exploration_sigma = 0.15;  // behavior noise per action dim
  double target_noise_sigma = 0.2;  // target policy smoothing
  double target_noise_clip = 0.5;
  int policy_delay = 2;             // critic updates per actor/target update
  double tau = 5e-3;
  bool twin_critics = true;
  double variance_floor = 1e-6;
  bool plain_sgd = false;           // raw-gradient mode for hand checks
};

/** Discount ladder gamma_1 = 0, gamma_i = min((gamma_{i-1} + 1) / 2, cap). */
inline std::vector<double> gamma_schedule(int k, double cap = 0.99) {
  if (k < 1) throw std::invalid_argument("gamma_schedule: k < 1");
  std::vector<double> g(k, 0.0);
  for (int i = 1; i < k; ++i) g[i] = std::min((g[i - 1] + 1.0) / 2.0, cap);
  return g;
}

/** Raised when a training loss stops being finite; carries the optimizer
 * step index and the largest target magnitude for the abort report. */
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EntropyGrad {
  double h = 0.0;
  std::vector<double> d;  // dH/dx_i; zero on the floor branch
};

/**
 * Gaussian-surrogate entropy of a prediction vector: H = 0.5 ln(2 pi e
 * max(var, floor)) with the unbiased sample variance.  Below the floor (and
 * for fewer than two entries) the gradient vanishes.
 */
inline EntropyGrad prediction_entropy(std::span<const double> x, double floor) {
  EntropyGrad out;
  const std::size_t n = x.size();
  out.d.assign(n, 0.0);
  double var = 0.0;
  double mean = 0.0;
  if (n >= 2) {
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
  }
  constexpr double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  if (var <= floor) {
    out.h = 0.5 * std::log(two_pi_e * floor);
    return out;
  }
  out.h = 0.5 * std::log(two_pi_e * var);
  for (std::size_t i = 0; i < n; ++i)
    out.d[i] = (x[i] - mean) / (static_cast<double>(n - 1) * var);
  return out;
}

/** Entropy of the head-sum predictions {trunc_i + shift_i}. */
inline double entropy_of_predictions(std::span<const double> trunc,
                                     std::span<const double> shift,
                                     double floor) {
  if (trunc.size() != shift.size())
    throw std::invalid_argument("entropy_of_predictions: head count mismatch");
  std::vector<double> sums(trunc.size());
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] = trunc[i] + shift[i];
  return prediction_entropy(sums, floor).h;
}

/** One continuous-control transition.  A time-limit cut keeps done false so
 * the bootstrap sees through the horizon. */
struct DeepTransition {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> next;
  double r = 0.0;
  bool done = false;
};

/** Fixed-capacity ring buffer sampled uniformly with replacement, one
 * uniform_int draw per slot. */
class DeepReplay {
 public:
  explicit DeepReplay(std::size_t capacity) : cap_(capacity) {
    if (capacity == 0) throw std::invalid_argument("DeepReplay: zero capacity");
  }

  void push(DeepTransition t) {
    if (data_.size() < cap_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % cap_;
  }

  std::size_t size() const { return data_.size(); }

  std::vector<DeepTransition> sample(int m, Rng& rng) const {
    if (data_.empty()) throw std::logic_error("DeepReplay::sample: empty");
    std::vector<DeepTransition> out;
    out.reserve(m);
    for (int i = 0; i < m; ++i)
      out.push_back(data_[rng.uniform_int(static_cast<int>(data_.size()))]);
    return out;
  }

 private:
  std::size_t cap_;
  std::size_t next_ = 0;
  std::vector<DeepTransition> data_;
};

/**
 * Smoothed target action clip(mu'(s') + clip(eps, +-c), +-1), eps per action
 * dim from N(0, sigma).  The noise is drawn for every sample, terminal ones
 * included, so the gaussian stream does not depend on the done pattern.
 */
inline std::vector<double> smoothed_target_action(const Mlp& actor_target,
                                                  std::span<const double> next,
                                                  double sigma, double clip,
                                                  Rng& rng) {
  std::vector<double> a = actor_target.forward(next, nullptr);
  for (double& ai : a) {
    double eps = std::clamp(rng.gaussian(0.0, sigma), -clip, clip);
    ai = std::clamp(ai + eps, -1.0, 1.0);
  }
  return a;
}

struct CompositeTargets {
  std::vector<std::vector<double>> tr;  // [sample][head]
  std::vector<std::vector<double>> sh;
  std::vector<double> q;
};

/**
 * Consecutive-bootstrap targets from the target networks, per-head twin min.
 * Head 1 of the truncated stack regresses the raw reward; deeper heads pull
 * the previous head at the smoothed action.  On done every truncated target
 * collapses to r and every shifted target to zero.
 */
inline CompositeTargets composite_targets(const Mlp& actor_target,
                                          const CompositeCriticNet& c1,
                                          const CompositeCriticNet* c2,
                                          std::span<const DeepTransition> batch,
                                          const Td3Config& cfg, Rng& rng) {
  const int n = c1.n();
  CompositeTargets y;
  y.tr.resize(batch.size());
  y.sh.resize(batch.size());
  y.q.resize(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const DeepTransition& t = batch[j];
    std::vector<double> ta = smoothed_target_action(
        actor_target, t.next, cfg.target_noise_sigma, cfg.target_noise_clip, rng);
    y.tr[j].assign(n, t.r);
    y.sh[j].assign(n, 0.0);
    y.q[j] = t.r;
    if (t.done) continue;
    CompositeCriticNet::Out o1 = c1.forward(t.next, ta, nullptr);
    CompositeCriticNet::Out o2 = c2 ? c2->forward(t.next, ta, nullptr) : o1;
    y.sh[j][0] = cfg.gamma * std::min(o1.q, o2.q);
    for (int i = 1; i < n; ++i) {
      y.tr[j][i] = t.r + cfg.gamma * std::min(o1.trunc[i - 1], o2.trunc[i - 1]);
      y.sh[j][i] = cfg.gamma * std::min(o1.shift[i - 1], o2.shift[i - 1]);
    }
    y.q[j] = t.r + cfg.gamma * (std::min(o1.trunc[n - 1], o2.trunc[n - 1]) +
                                std::min(o1.shift[n - 1], o2.shift[n - 1]));
  }
  return y;
}

struct CriticStepReport {
  double mse = 0.0;                // batch-mean summed squared error
  double abs_q = 0.0;              // batch-mean |q residual|
  std::vector<double> abs_tr;      // batch-mean |residual| per truncated head
  std::vector<double> abs_sh;
  double entropy = 0.0;            // batch-mean head-sum entropy
};

/**
 * Accumulates dLoss/dtheta for one batch.  Loss per sample is the summed
 * squared residual over all heads plus q; the entropy term enters the
 * truncated head rows with weight +beta_tr and the shifted head rows with
 * -beta_sh and never reaches the trunk.
 */
inline CriticStepReport composite_critic_gradient(
    const CompositeCriticNet& net, std::span<const DeepTransition> batch,
    const CompositeTargets& y, const Td3Config& cfg, ParamVector& grad) {
  const int n = net.n();
  const double m = static_cast<double>(batch.size());
  CriticStepReport rep;
  rep.abs_tr.assign(n, 0.0);
  rep.abs_sh.assign(n, 0.0);
  CompositeCriticNet::Cache cache;
  std::vector<double> ctr(n), csh(n), sums(n);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    CompositeCriticNet::Out out = net.forward(batch[j].s, batch[j].a, &cache);
    double se = 0.0;
    for (int i = 0; i < n; ++i) {
      double etr = out.trunc[i] - y.tr[j][i];
      double esh = out.shift[i] - y.sh[j][i];
      ctr[i] = 2.0 * etr / m;
      csh[i] = 2.0 * esh / m;
      se += etr * etr + esh * esh;
      rep.abs_tr[i] += std::abs(etr) / m;
      rep.abs_sh[i] += std::abs(esh) / m;
      sums[i] = out.trunc[i] + out.shift[i];
    }
    double eq = out.q - y.q[j];
    se += eq * eq;
    rep.abs_q += std::abs(eq) / m;
    rep.mse += se / m;
    net.backward(cache, ctr, csh, 2.0 * eq / m, grad);
    EntropyGrad ent = prediction_entropy(sums, cfg.variance_floor);
    rep.entropy += ent.h / m;
    if (cfg.beta_tr != 0.0 || cfg.beta_sh != 0.0)
      net.head_entropy_grads(cache, ent.d, cfg.beta_tr / m, -cfg.beta_sh / m, grad);
  }
  return rep;
}

namespace detail {

inline double max_abs_target(const CompositeTargets& y) {
  double m = 0.0;
  for (const auto& row : y.tr)
    for (double v : row) m = std::max(m, std::abs(v));
  for (const auto& row : y.sh)
    for (double v : row) m = std::max(m, std::abs(v));
  for (double v : y.q) m = std::max(m, std::abs(v));
  return m;
}

[[noreturn]] inline void throw_non_finite(long step, double max_target) {
  throw NonFiniteError("non-finite loss at optimizer step " +
                       std::to_string(step) + ", max |target| = " +
                       std::to_string(max_target));
}

}  // namespace detail

inline CriticStepReport composite_critic_step(CompositeCriticNet& net, Adam& opt,
                                              std::span<const DeepTransition> batch,
                                              const CompositeTargets& y,
                                              const Td3Config& cfg) {
  ParamVector grad(net.params.layout_ptr());
  CriticStepReport rep = composite_critic_gradient(net, batch, y, cfg, grad);
  if (!std::isfinite(rep.mse))
    detail::throw_non_finite(opt.steps_taken() + 1, detail::max_abs_target(y));
  opt.step(net.params, grad,
           {{"trunk", cfg.alpha_q},
            {"q_head", cfg.alpha_q},
            {"trunc_heads", cfg.alpha_tr},
            {"shift_heads", cfg.alpha_sh}},
           cfg.plain_sgd);
  return rep;
}

/** Gradient of minus the batch-mean q(s, mu(s)): ascent on the value head
 * only, routed through the critic to the action input. */
inline void composite_actor_gradient(const Mlp& actor,
                                     const CompositeCriticNet& critic,
                                     std::span<const DeepTransition> batch,
                                     ParamVector& grad) {
  const double m = static_cast<double>(batch.size());
  Mlp::Cache acache;
  CompositeCriticNet::Cache ccache;
  ParamVector scratch(critic.params.layout_ptr());  // critic grads, discarded
  std::vector<double> ztr(critic.n(), 0.0), zsh(critic.n(), 0.0);
  for (const DeepTransition& t : batch) {
    std::vector<double> a = actor.forward(t.s, &acache);
    critic.forward(t.s, a, &ccache);
    std::vector<double> dx = critic.backward(ccache, ztr, zsh, -1.0 / m, scratch);
    std::span<const double> da(dx.data() + critic.state_dim(),
                               static_cast<std::size_t>(critic.action_dim()));
    actor.backward(acache, da, grad);
  }
}

inline void composite_actor_step(Mlp& actor, Adam& opt,
                                 const CompositeCriticNet& critic,
                                 std::span<const DeepTransition> batch,
                                 const Td3Config& cfg) {
  ParamVector grad(actor.params.layout_ptr());
  composite_actor_gradient(actor, critic, batch, grad);
  opt.step(actor.params, grad, {{"actor", cfg.alpha_q}}, cfg.plain_sgd);
}

/** Scalar twin-min targets y = r + gamma min_k Q_k(s', smoothed a'). */
inline std::vector<double> td3_targets(const Mlp& actor_target, const Mlp& c1,
                                       const Mlp* c2,
                                       std::span<const DeepTransition> batch,
                                       const Td3Config& cfg, Rng& rng) {
  std::vector<double> y(batch.size());
  std::vector<double> x;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const DeepTransition& t = batch[j];
    std::vector<double> ta = smoothed_target_action(
        actor_target, t.next, cfg.target_noise_sigma, cfg.target_noise_clip, rng);
    y[j] = t.r;
    if (t.done) continue;
    x.assign(t.next.begin(), t.next.end());
    x.insert(x.end(), ta.begin(), ta.end());
    double q1 = c1.forward(x, nullptr)[0];
    double q2 = c2 ? c2->forward(x, nullptr)[0] : q1;
    y[j] += cfg.gamma * std::min(q1, q2);
  }
  return y;
}

/**
 * Ladder targets for a multi-gamma head stack: head 1 is a one-step return
 * at gamma_1, head i regresses (gamma_i - gamma_{i-1}) Q_{i-1} + gamma_i W_i
 * where Q_{i-1} is the prefix sum of the twin-min head values at the
 * smoothed action.  On done head 1 collapses to r and the rest to zero.
 */
inline std::vector<std::vector<double>> delta_targets(
    const Mlp& actor_target, const Mlp& c1, const Mlp* c2,
    std::span<const double> gammas, std::span<const DeepTransition> batch,
    const Td3Config& cfg, Rng& rng) {
  const int k = static_cast<int>(gammas.size());
  std::vector<std::vector<double>> y(batch.size());
  std::vector<double> x;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const DeepTransition& t = batch[j];
    std::vector<double> ta = smoothed_target_action(
        actor_target, t.next, cfg.target_noise_sigma, cfg.target_noise_clip, rng);
    y[j].assign(k, 0.0);
    y[j][0] = t.r;
    if (t.done) continue;
    x.assign(t.next.begin(), t.next.end());
    x.insert(x.end(), ta.begin(), ta.end());
    std::vector<double> w1 = c1.forward(x, nullptr);
    std::vector<double> w2 = c2 ? c2->forward(x, nullptr) : w1;
    double prefix = 0.0;  // sum of twin-min heads 1..i-1
    for (int i = 0; i < k; ++i) {
      double wi = std::min(w1[i], w2[i]);
      if (i == 0)
        y[j][0] = t.r + gammas[0] * wi;
      else
        y[j][i] = (gammas[i] - gammas[i - 1]) * prefix + gammas[i] * wi;
      prefix += wi;
    }
  }
  return y;
}

/** Squared-error step for a plain multi-output critic; returns batch mse. */
inline double mlp_critic_step(Mlp& net, Adam& opt,
                              std::span<const DeepTransition> batch,
                              const std::vector<std::vector<double>>& y,
                              const Td3Config& cfg) {
  const double m = static_cast<double>(batch.size());
  ParamVector grad(net.params.layout_ptr());
  Mlp::Cache cache;
  std::vector<double> x, cot;
  double mse = 0.0;
  double max_target = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    x.assign(batch[j].s.begin(), batch[j].s.end());
    x.insert(x.end(), batch[j].a.begin(), batch[j].a.end());
    std::vector<double> out = net.forward(x, &cache);
    cot.assign(out.size(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      double e = out[i] - y[j][i];
      cot[i] = 2.0 * e / m;
      mse += e * e / m;
      max_target = std::max(max_target, std::abs(y[j][i]));
    }
    net.backward(cache, cot, grad);
  }
  if (!std::isfinite(mse))
    detail::throw_non_finite(opt.steps_taken() + 1, max_target);
  opt.step(net.params, grad, {{"trunk", cfg.alpha_q}}, cfg.plain_sgd);
  return mse;
}

/** Ascent on the batch-mean summed critic output at (s, mu(s)); for a
 * ladder critic the head sum is the full-discount value. */
inline void mlp_actor_step(Mlp& actor, Adam& opt, const Mlp& critic,
                           std::span<const DeepTransition> batch,
                           const Td3Config& cfg) {
  const double m = static_cast<double>(batch.size());
  ParamVector grad(actor.params.layout_ptr());
  ParamVector scratch(critic.params.layout_ptr());
  Mlp::Cache acache, ccache;
  std::vector<double> x;
  std::vector<double> cot(static_cast<std::size_t>(critic.spec().output_dim),
                          -1.0 / m);
  for (const DeepTransition& t : batch) {
    std::vector<double> a = actor.forward(t.s, &acache);
    x.assign(t.s.begin(), t.s.end());
    x.insert(x.end(), a.begin(), a.end());
    critic.forward(x, &ccache);
    std::vector<double> dx = critic.backward(ccache, cot, scratch);
    std::span<const double> da(dx.data() + t.s.size(), a.size());
    actor.backward(acache, da, grad);
  }
  opt.step(actor.params, grad, {{"actor", cfg.alpha_q}}, cfg.plain_sgd);
}

/** Common face of the three agents: deterministic action, one batch update,
 * last-step diagnostics. */
class DeepAgent {
 public:
  virtual ~DeepAgent() = default;
  virtual std::vector<double> act(std::span<const double> s) const = 0;
  virtual void train_batch(std::span<const DeepTransition> batch, Rng& rng) = 0;
  virtual std::map<std::string, double> diagnostics() const = 0;
};

/** Behavior action: deterministic policy plus clipped exploration noise,
 * one gaussian per dim. */
inline std::vector<double> explore_action(const DeepAgent& agent,
                                          std::span<const double> s,
                                          double sigma, Rng& rng) {
  std::vector<double> a = agent.act(s);
  for (double& ai : a) ai = std::clamp(ai + rng.gaussian(0.0, sigma), -1.0, 1.0);
  return a;
}

namespace detail {

inline MlpSpec actor_spec(int state_dim, int action_dim,
                          std::vector<int> hidden) {
  MlpSpec spec;
  spec.input_dim = state_dim;
  spec.hidden = std::move(hidden);
  spec.output_dim = action_dim;
  spec.output_act = Act::kTanhBound;
  spec.group = "actor";
  return spec;
}

inline MlpSpec critic_spec(int state_dim, int action_dim, int width,
                           int outputs) {
  MlpSpec spec;
  spec.input_dim = state_dim + action_dim;
  spec.hidden = {width, width};
  spec.output_dim = outputs;
  spec.group = "trunk";
  return spec;
}

}  // namespace detail

/**
 * Actor-critic agent on the decomposed critic.  Weight init draws from the
 * ctor rng in the order critic one, critic two (only when twins are on),
 * actor; targets start as copies.
 */
class CompositeTd3Agent : public DeepAgent {
 public:
  CompositeTd3Agent(int state_dim, int action_dim, int hidden,
                    std::vector<int> actor_hidden, const Td3Config& cfg,
                    Rng& init_rng)
      : cfg_(cfg),
        c1_(state_dim, action_dim, hidden, cfg.n),
        c2_(state_dim, action_dim, hidden, cfg.n),
        actor_(detail::actor_spec(state_dim, action_dim, std::move(actor_hidden))),
        c1t_(c1_), c2t_(c2_), actor_t_(actor_),
        opt1_(c1_.params.layout_ptr()), opt2_(c2_.params.layout_ptr()),
        opt_actor_(actor_.params.layout_ptr()) {
    c1_.init(init_rng);
    if (cfg_.twin_critics) c2_.init(init_rng);
    actor_.init(init_rng);
    c1t_ = c1_;
    c2t_ = c2_;
    actor_t_ = actor_;
  }

  std::vector<double> act(std::span<const double> s) const override {
    return actor_.forward(s, nullptr);
  }

  void train_batch(std::span<const DeepTransition> batch, Rng& rng) override {
    CompositeTargets y = composite_targets(
        actor_t_, c1t_, cfg_.twin_critics ? &c2t_ : nullptr, batch, cfg_, rng);
    last_ = composite_critic_step(c1_, opt1_, batch, y, cfg_);
    if (cfg_.twin_critics) composite_critic_step(c2_, opt2_, batch, y, cfg_);
    if (++updates_ % cfg_.policy_delay == 0) {
      composite_actor_step(actor_, opt_actor_, c1_, batch, cfg_);
      polyak_update(c1t_.params, c1_.params, cfg_.tau);
      if (cfg_.twin_critics) polyak_update(c2t_.params, c2_.params, cfg_.tau);
      polyak_update(actor_t_.params, actor_.params, cfg_.tau);
    }
  }

  std::map<std::string, double> diagnostics() const override {
    std::map<std::string, double> d;
    d["critic_mse"] = last_.mse;
    d["td_abs_q"] = last_.abs_q;
    d["pred_entropy"] = last_.entropy;
    for (std::size_t i = 0; i < last_.abs_tr.size(); ++i) {
      d["td_abs_tr_" + std::to_string(i + 1)] = last_.abs_tr[i];
      d["td_abs_sh_" + std::to_string(i + 1)] = last_.abs_sh[i];
    }
    return d;
  }

  CompositeCriticNet& critic() { return c1_; }
  const CompositeCriticNet& critic() const { return c1_; }
  Mlp& actor() { return actor_; }
  const Mlp& actor() const { return actor_; }

 private:
  Td3Config cfg_;
  CompositeCriticNet c1_, c2_;
  Mlp actor_;
  CompositeCriticNet c1t_, c2t_;
  Mlp actor_t_;
  Adam opt1_, opt2_, opt_actor_;
  long updates_ = 0;
  CriticStepReport last_;
};

/** Baseline agent with scalar twin critics; same delay and smoothing. */
class Td3Agent : public DeepAgent {
 public:
  Td3Agent(int state_dim, int action_dim, int hidden,
           std::vector<int> actor_hidden, const Td3Config& cfg, Rng& init_rng)
      : cfg_(cfg),
        c1_(detail::critic_spec(state_dim, action_dim, hidden, 1)),
        c2_(detail::critic_spec(state_dim, action_dim, hidden, 1)),
        actor_(detail::actor_spec(state_dim, action_dim, std::move(actor_hidden))),
        c1t_(c1_), c2t_(c2_), actor_t_(actor_),
        opt1_(c1_.params.layout_ptr()), opt2_(c2_.params.layout_ptr()),
        opt_actor_(actor_.params.layout_ptr()) {
    c1_.init(init_rng);
    if (cfg_.twin_critics) c2_.init(init_rng);
    actor_.init(init_rng);
    c1t_ = c1_;
    c2t_ = c2_;
    actor_t_ = actor_;
  }

  std::vector<double> act(std::span<const double> s) const override {
    return actor_.forward(s, nullptr);
  }

  void train_batch(std::span<const DeepTransition> batch, Rng& rng) override {
    std::vector<double> y1 = td3_targets(
        actor_t_, c1t_, cfg_.twin_critics ? &c2t_ : nullptr, batch, cfg_, rng);
    std::vector<std::vector<double>> y(y1.size());
    for (std::size_t j = 0; j < y1.size(); ++j) y[j] = {y1[j]};
    last_mse_ = mlp_critic_step(c1_, opt1_, batch, y, cfg_);
    if (cfg_.twin_critics) mlp_critic_step(c2_, opt2_, batch, y, cfg_);
    if (++updates_ % cfg_.policy_delay == 0) {
      mlp_actor_step(actor_, opt_actor_, c1_, batch, cfg_);
      polyak_update(c1t_.params, c1_.params, cfg_.tau);
      if (cfg_.twin_critics) polyak_update(c2t_.params, c2_.params, cfg_.tau);
      polyak_update(actor_t_.params, actor_.params, cfg_.tau);
    }
  }

  std::map<std::string, double> diagnostics() const override {
    return {{"critic_mse", last_mse_}};
  }

  Mlp& critic() { return c1_; }
  Mlp& actor() { return actor_; }
  const Mlp& actor() const { return actor_; }

 private:
  Td3Config cfg_;
  Mlp c1_, c2_, actor_;
  Mlp c1t_, c2t_, actor_t_;
  Adam opt1_, opt2_, opt_actor_;
  long updates_ = 0;
  double last_mse_ = 0.0;
};

/** Multi-gamma ladder agent; the policy ascends the head sum. */
class DeltaTd3Agent : public DeepAgent {
 public:
  DeltaTd3Agent(int state_dim, int action_dim, int hidden,
                std::vector<int> actor_hidden, std::vector<double> gammas,
                const Td3Config& cfg, Rng& init_rng)
      : cfg_(cfg), gammas_(std::move(gammas)),
        c1_(detail::critic_spec(state_dim, action_dim, hidden,
                                static_cast<int>(gammas_.size()))),
        c2_(detail::critic_spec(state_dim, action_dim, hidden,
                                static_cast<int>(gammas_.size()))),
        actor_(detail::actor_spec(state_dim, action_dim, std::move(actor_hidden))),
        c1t_(c1_), c2t_(c2_), actor_t_(actor_),
        opt1_(c1_.params.layout_ptr()), opt2_(c2_.params.layout_ptr()),
        opt_actor_(actor_.params.layout_ptr()) {
    if (gammas_.empty()) throw std::invalid_argument("DeltaTd3Agent: no heads");
    c1_.init(init_rng);
    if (cfg_.twin_critics) c2_.init(init_rng);
    actor_.init(init_rng);
    c1t_ = c1_;
    c2t_ = c2_;
    actor_t_ = actor_;
  }

  std::vector<double> act(std::span<const double> s) const override {
    return actor_.forward(s, nullptr);
  }

  void train_batch(std::span<const DeepTransition> batch, Rng& rng) override {
    std::vector<std::vector<double>> y = delta_targets(
        actor_t_, c1t_, cfg_.twin_critics ? &c2t_ : nullptr, gammas_, batch,
        cfg_, rng);
    last_mse_ = mlp_critic_step(c1_, opt1_, batch, y, cfg_);
    if (cfg_.twin_critics) mlp_critic_step(c2_, opt2_, batch, y, cfg_);
    if (++updates_ % cfg_.policy_delay == 0) {
      mlp_actor_step(actor_, opt_actor_, c1_, batch, cfg_);
      polyak_update(c1t_.params, c1_.params, cfg_.tau);
      if (cfg_.twin_critics) polyak_update(c2t_.params, c2_.params, cfg_.tau);
      polyak_update(actor_t_.params, actor_.params, cfg_.tau);
    }
  }

  std::map<std::string, double> diagnostics() const override {
    return {{"critic_mse", last_mse_}};
  }

  const std::vector<double>& gammas() const { return gammas_; }
  Mlp& actor() { return actor_; }
  const Mlp& actor() const { return actor_; }

 private:
  Td3Config cfg_;
  std::vector<double> gammas_;
  Mlp c1_, c2_, actor_;
  Mlp c1t_, c2t_, actor_t_;
  Adam opt1_, opt2_, opt_actor_;
  long updates_ = 0;
  double last_mse_ = 0.0;
};

/** True-reward evaluation: deterministic actor, full fixed-length episodes. */
inline double evaluate_point_reach(const DeepAgent& agent, int episodes,
                                   Rng& rng) {
  PointReachEnv env;
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    std::vector<double> s = env.reset(rng);
    for (int t = 0; t < PointReachEnv::kHorizon; ++t) {
      PointReachEnv::StepResult res = env.step(agent.act(s));
      total += res.r;
      s = std::move(res.next);
    }
  }
  return total / episodes;
}

struct TrainLoopConfig {
  long env_steps = 50000;
  int warmup_steps = 500;         // uniform actions, no updates
  int batch_size = 64;
  int grad_steps_per_sample = 1;  // batch updates per post-warmup env step
  std::size_t replay_capacity = 100000;
  double reward_noise_p = 0.0;    // training-side reward corruption
  long eval_every = 2500;
  int eval_episodes = 10;
};

struct EvalPoint {
  long step;
  double mean_return;
  std::map<std::string, double> diag;
};

/**
 * Standard interaction loop on the reach task.  Training draws (warmup
 * actions, exploration noise, reward corruption, replay sampling, target
 * smoothing) all come from derive(1) of the master stream; evaluation
 * replays the same derive(2) episode starts at every checkpoint so the
 * curve points are comparable.
 */
inline std::vector<EvalPoint> train_point_reach(DeepAgent& agent,
                                                const TrainLoopConfig& loop,
                                                const Td3Config& cfg,
                                                Rng& master) {
  Rng train = master.derive(1);
  const Rng eval_proto = master.derive(2);
  DeepReplay replay(loop.replay_capacity);
  PointReachEnv env;
  std::vector<EvalPoint> curve;
  std::vector<double> s = env.reset(train);
  for (long step = 1; step <= loop.env_steps; ++step) {
    std::vector<double> a;
    if (step <= loop.warmup_steps) {
      a.resize(PointReachEnv::kActionDim);
      for (double& ai : a) ai = train.uniform(-1.0, 1.0);
    } else {
      a = explore_action(agent, s, cfg.exploration_sigma, train);
    }
    PointReachEnv::StepResult res = env.step(a);
    double r = res.r;
    if (loop.reward_noise_p > 0.0) r = noisy_reward(r, loop.reward_noise_p, train);
    // The horizon is a truncation, not a terminal: done stays false.
    replay.push(DeepTransition{s, a, res.next, r, false});
    s = res.timeout ? env.reset(train) : std::move(res.next);
    if (step > loop.warmup_steps) {
      for (int g = 0; g < loop.grad_steps_per_sample; ++g) {
        std::vector<DeepTransition> batch = replay.sample(loop.batch_size, train);
        agent.train_batch(batch, train);
      }
    }
    if (step % loop.eval_every == 0) {
      Rng eval_rng = eval_proto;
      curve.push_back(EvalPoint{step,
                                evaluate_point_reach(agent, loop.eval_episodes, eval_rng),
                                agent.diagnostics()});
    }
  }
  return curve;
}

}  // namespace cq
