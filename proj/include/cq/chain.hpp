#pragma once

#include <stdexcept>
#include <vector>

#include "cq/mdp.hpp"
#include "cq/rng.hpp"

namespace cq {

// Actions of the deterministic chain.
enum ChainAction { kForward = 0, kBack = 1, kSkip = 2 };

/**
 * Deterministic chain with a risky shortcut, K >= 6 states.
 *
 * States s_0..s_{K-1}; s_{K-2} is a penalty terminal, s_{K-1} the goal.
 * Actions at every non-terminal state:
 *   forward: s_i -> s_{i+1}, reward -1; from s_{K-3} it walks into the
 *            penalty terminal at reward -100
 *   back:    s_i -> s_{i-1}, reward -2 (self-loop at s_0)
 *   skip:    s_i -> s_{i+2}, reward -3; from s_{K-4} it hits the penalty
 *            terminal at -30, from s_{K-3} it reaches the goal at -3
 *
 * The optimal policy walks forward and skips over the penalty state at the
 * end: forward at s_i for i < K-3, skip at s_{K-3}.
 */
inline TabularMdp make_deterministic_chain(int k, double gamma = 1.0) {
  if (k < 6) throw std::invalid_argument("make_deterministic_chain: K < 6");
  std::vector<bool> terminal(k, false);
  terminal[k - 2] = true;
  terminal[k - 1] = true;
  std::vector<OutcomeDist> outcomes;
  auto det = [](int next, double r) {
    return OutcomeDist({Branch{1.0, next, RewardDist::point(r)}});
  };
  for (int s = 0; s <= k - 3; ++s) {
    // forward
    if (s <= k - 4)
      outcomes.push_back(det(s + 1, -1.0));
    else
      outcomes.push_back(det(k - 2, -100.0));
    // back
    outcomes.push_back(det(s == 0 ? 0 : s - 1, -2.0));
    // skip
    if (s <= k - 5)
      outcomes.push_back(det(s + 2, -3.0));
    else if (s == k - 4)
      outcomes.push_back(det(k - 2, -30.0));
    else
      outcomes.push_back(det(k - 1, -3.0));
  }
  return TabularMdp(k, 3, 0, gamma, std::move(terminal), std::move(outcomes));
}

/**
 * Stochastic chain, K >= 2 states, undiscounted by default.
 *
 * Both actions advance s_i -> s_{i+1}; only the reward differs:
 *   action 0: -1 w.p. 0.8, 0 w.p. 0.2      (mean -0.8, optimal)
 *   action 1: +1 w.p. 0.99, -200 w.p. 0.01 (mean -1.01, heavy left tail)
 * s_{K-1} is terminal, so every episode lasts exactly K-1 steps.
 */
inline TabularMdp make_stochastic_chain(int k, double gamma = 1.0) {
  if (k < 2) throw std::invalid_argument("make_stochastic_chain: K < 2");
  std::vector<bool> terminal(k, false);
  terminal[k - 1] = true;
  std::vector<OutcomeDist> outcomes;
  for (int s = 0; s <= k - 2; ++s) {
    outcomes.push_back(OutcomeDist(
        {Branch{1.0, s + 1, RewardDist({0.8, 0.2}, {-1.0, 0.0})}}));
    outcomes.push_back(OutcomeDist(
        {Branch{1.0, s + 1, RewardDist({0.99, 0.01}, {1.0, -200.0})}}));
  }
  return TabularMdp(k, 2, 0, gamma, std::move(terminal), std::move(outcomes));
}

/**
 * Rolls out `episodes` episodes under `policy` with a per-step chance of a
 * uniformly random non-optimal action.  Episodes are capped at 10*K steps.
 *
 * Generator draws per step, in order: one uniform01 for the exploration
 * Bernoulli; if it fires and the state has more than one action, one
 * uniform_int over the non-policy actions; then the two sample_step draws.
 */
inline ReplayBuffer generate_batch(const TabularMdp& mdp,
                                   const std::vector<int>& policy,
                                   int episodes, double nonoptimal_frac,
                                   Rng& rng) {
  if (policy.size() != static_cast<std::size_t>(mdp.num_states()))
    throw std::invalid_argument("generate_batch: policy size mismatch");
  if (nonoptimal_frac < 0.0 || nonoptimal_frac > 1.0)
    throw std::invalid_argument("generate_batch: nonoptimal_frac outside [0,1]");
  ReplayBuffer buf;
  const int cap = 10 * mdp.num_states();
  for (int e = 0; e < episodes; ++e) {
    buf.start_episode();
    int s = mdp.initial_state();
    for (int step = 0; step < cap; ++step) {
      int a = policy[s];
      if (rng.uniform01() < nonoptimal_frac && mdp.num_actions() > 1) {
        int j = rng.uniform_int(mdp.num_actions() - 1);
        a = j < policy[s] ? j : j + 1;  // uniform over actions != policy[s]
      }
      Transition t = sample_step(mdp, s, a, rng);
      buf.push(t);
      if (t.done) break;
      s = t.next;
    }
  }
  return buf;
}

}  // namespace cq
