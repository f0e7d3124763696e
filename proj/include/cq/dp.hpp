#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cq/mdp.hpp"

namespace cq {

/** Thrown when an iterative solver exhausts its backup budget. */
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

/** Dense state-action value table. Terminal rows stay exactly 0. */
struct QTable {
  int num_states = 0;
  int num_actions = 0;
  double gamma = 0.0;
  std::vector<double> v;

  QTable() = default;
  QTable(int ns, int na, double g)
      : num_states(ns), num_actions(na), gamma(g),
        v(static_cast<std::size_t>(ns) * na, 0.0) {}

  double& at(int s, int a) { return v[static_cast<std::size_t>(s) * num_actions + a]; }
  double at(int s, int a) const { return v[static_cast<std::size_t>(s) * num_actions + a]; }

  int argmax(int s) const {
    int best = 0;
    for (int a = 1; a < num_actions; ++a)
      if (at(s, a) > at(s, best)) best = a;  // lowest index wins ties
    return best;
  }

  double max(int s) const { return at(s, argmax(s)); }
};

inline QTable make_qtable(const TabularMdp& mdp) {
  return QTable(mdp.num_states(), mdp.num_actions(), mdp.gamma());
}

/** Greedy policy, lowest-index tie-break. Terminal states map to action 0. */
inline std::vector<int> greedy_policy(const QTable& q) {
  std::vector<int> pi(q.num_states);
  for (int s = 0; s < q.num_states; ++s) pi[s] = q.argmax(s);
  return pi;
}

namespace detail {

// One synchronous sweep of the Bellman backup into `next`.
// bootstrap(s') supplies the state value used at non-terminal successors.
template <class Bootstrap>
double bellman_sweep(const TabularMdp& mdp, const QTable& cur, QTable& next,
                     Bootstrap&& bootstrap) {
  double residual = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const OutcomeDist& od = mdp.outcomes(s, a);
      double val = 0.0;
      for (std::size_t i = 0; i < od.size(); ++i) {
        const Branch& b = od.branch(i);
        double boot = mdp.terminal(b.next) ? 0.0 : bootstrap(cur, b.next);
        val += b.prob * (b.reward.mean() + mdp.gamma() * boot);
      }
      residual = std::max(residual, std::abs(val - cur.at(s, a)));
      next.at(s, a) = val;
    }
  }
  return residual;
}

}  // namespace detail

/**
 * Synchronous value iteration to sup-norm residual < tol.
 * Throws DivergenceError with the final residual if the sweep cap is hit.
 */
inline QTable value_iteration(const TabularMdp& mdp, double tol = 1e-10,
                              long max_sweeps = 1000000) {
  QTable cur = make_qtable(mdp);
  QTable next = cur;
  for (long it = 0; it < max_sweeps; ++it) {
    double residual = detail::bellman_sweep(
        mdp, cur, next, [](const QTable& q, int s) { return q.max(s); });
    std::swap(cur, next);
    if (residual < tol) return cur;
  }
  double residual = detail::bellman_sweep(
      mdp, cur, next, [](const QTable& q, int s) { return q.max(s); });
  throw DivergenceError("value_iteration: no convergence after " +
                        std::to_string(max_sweeps) +
                        " sweeps, residual=" + std::to_string(residual));
}

/** Fixed-policy evaluation, same stopping rule as value_iteration. */
inline QTable policy_q_evaluation(const TabularMdp& mdp,
                                  const std::vector<int>& policy,
                                  double tol = 1e-10,
                                  long max_sweeps = 1000000) {
  if (policy.size() != static_cast<std::size_t>(mdp.num_states()))
    throw std::invalid_argument("policy_q_evaluation: policy size mismatch");
  QTable cur = make_qtable(mdp);
  QTable next = cur;
  for (long it = 0; it < max_sweeps; ++it) {
    double residual = detail::bellman_sweep(
        mdp, cur, next,
        [&policy](const QTable& q, int s) { return q.at(s, policy[s]); });
    std::swap(cur, next);
    if (residual < tol) return cur;
  }
  throw DivergenceError("policy_q_evaluation: sweep cap exhausted");
}

/**
 * Exact i-step truncated action values under `policy`, i = 1..n.
 * Element [i-1] holds horizon i: the expected discounted reward of the
 * first i steps when taking (s, a) and following the policy afterwards,
 * with rollouts cut short at terminals.  Horizon 1 is the expected
 * immediate reward.
 */
inline std::vector<QTable> truncated_oracle(const TabularMdp& mdp,
                                            const std::vector<int>& policy,
                                            int n) {
  if (n < 1) throw std::invalid_argument("truncated_oracle: n < 1");
  if (policy.size() != static_cast<std::size_t>(mdp.num_states()))
    throw std::invalid_argument("truncated_oracle: policy size mismatch");
  std::vector<QTable> tables;
  tables.reserve(n);
  for (int i = 0; i < n; ++i) {
    QTable t = make_qtable(mdp);
    for (int s = 0; s < mdp.num_states(); ++s) {
      if (mdp.terminal(s)) continue;
      for (int a = 0; a < mdp.num_actions(); ++a) {
        const OutcomeDist& od = mdp.outcomes(s, a);
        double val = 0.0;
        for (std::size_t b = 0; b < od.size(); ++b) {
          const Branch& br = od.branch(b);
          double tail = 0.0;
          if (i > 0 && !mdp.terminal(br.next))
            tail = tables[i - 1].at(br.next, policy[br.next]);
          val += br.prob * (br.reward.mean() + mdp.gamma() * tail);
        }
        t.at(s, a) = val;
      }
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

/**
 * Exact i-step shifted action values: the expectation of gamma^i times
 * q_full at the state reached after i policy steps (0 past terminals),
 * i = 1..n at element [i-1].  Together with the truncated tables this
 * recovers q_full: truncated[n] + shifted[n] = q_full when q_full is the
 * policy's fixed point.
 */
inline std::vector<QTable> shifted_oracle(const TabularMdp& mdp,
                                          const std::vector<int>& policy,
                                          const QTable& q_full, int n) {
  if (n < 1) throw std::invalid_argument("shifted_oracle: n < 1");
  if (policy.size() != static_cast<std::size_t>(mdp.num_states()))
    throw std::invalid_argument("shifted_oracle: policy size mismatch");
  std::vector<QTable> tables;
  tables.reserve(n);
  for (int i = 0; i < n; ++i) {
    QTable t = make_qtable(mdp);
    for (int s = 0; s < mdp.num_states(); ++s) {
      if (mdp.terminal(s)) continue;
      for (int a = 0; a < mdp.num_actions(); ++a) {
        const OutcomeDist& od = mdp.outcomes(s, a);
        double val = 0.0;
        for (std::size_t b = 0; b < od.size(); ++b) {
          const Branch& br = od.branch(b);
          if (mdp.terminal(br.next)) continue;
          double inner = i == 0 ? q_full.at(br.next, policy[br.next])
                                : tables[i - 1].at(br.next, policy[br.next]);
          val += br.prob * mdp.gamma() * inner;
        }
        t.at(s, a) = val;
      }
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

}  // namespace cq
