#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "cq/rng.hpp"

namespace cq {

/**
 * Point-mass reach task on the unit box.  The position starts uniform in
 * [-1,1]^2, every step adds 0.05 * action (the action and the resulting
 * position are clipped to the box), and the reward is the negative
 * Euclidean distance of the new position from the origin.  Episodes run a
 * fixed 100 steps; the step cap is a truncation, not a terminal state.
 */
class PointReachEnv {
 public:
  static constexpr int kStateDim = 2;
  static constexpr int kActionDim = 2;
  static constexpr int kHorizon = 100;
  static constexpr double kStepScale = 0.05;

  // Two uniform01 draws: x then y.
  std::vector<double> reset(Rng& rng) {
    p_[0] = rng.uniform(-1.0, 1.0);
    p_[1] = rng.uniform(-1.0, 1.0);
    t_ = 0;
    return {p_[0], p_[1]};
  }

  struct StepResult {
    std::vector<double> next;
    double r;
    bool timeout;
  };

  StepResult step(std::span<const double> action) {
    if (action.size() != kActionDim)
      throw std::invalid_argument("PointReachEnv::step: bad action dim");
    for (int d = 0; d < kActionDim; ++d) {
      double a = action[d];
      if (a < -1.0 || a > 1.0) {
        ++clips_;
        a = std::clamp(a, -1.0, 1.0);
      }
      p_[d] = std::clamp(p_[d] + kStepScale * a, -1.0, 1.0);
    }
    ++t_;
    double r = -std::hypot(p_[0], p_[1]);
    return StepResult{{p_[0], p_[1]}, r, t_ >= kHorizon};
  }

  // How often an out-of-range action had to be clipped.
  long clip_events() const { return clips_; }

 private:
  double p_[2] = {0.0, 0.0};
  int t_ = 0;
  long clips_ = 0;
};

/** Hand-written reference controller: straight at the origin at full step,
 * scaled down inside the 0.05 ball so it lands exactly on the origin. */
inline std::vector<double> scripted_reach_action(std::span<const double> p) {
  double norm = std::hypot(p[0], p[1]);
  double denom = std::max(norm, PointReachEnv::kStepScale);
  return {-p[0] / denom, -p[1] / denom};
}

/**
 * Reward corruption: with probability p the true reward is replaced by a
 * fresh uniform draw from [-1, 1].  One uniform01 draw always (the
 * Bernoulli), a second only when the replacement fires.
 */
inline double noisy_reward(double r, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("noisy_reward: p outside [0,1]");
  if (rng.uniform01() < p) return rng.uniform(-1.0, 1.0);
  return r;
}

/** Mean return of the reference controller over full episodes. */
inline double scripted_reach_return(int episodes, Rng& rng) {
  PointReachEnv env;
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    std::vector<double> s = env.reset(rng);
    for (int t = 0; t < PointReachEnv::kHorizon; ++t) {
      PointReachEnv::StepResult res = env.step(scripted_reach_action(s));
      total += res.r;
      s = std::move(res.next);
    }
  }
  return total / episodes;
}

}  // namespace cq
