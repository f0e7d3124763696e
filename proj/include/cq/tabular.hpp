#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "cq/dp.hpp"
#include "cq/mdp.hpp"
#include "cq/rng.hpp"

namespace cq {

/**
 * State of the composite learner: the full Q table plus n truncated and n
 * shifted tables.  trunc[i-1] / shift[i-1] hold the horizon-i estimates.
 */
struct QTables {
  QTable q;
  std::vector<QTable> trunc;
  std::vector<QTable> shift;

  QTables(const TabularMdp& mdp, int n)
      : q(make_qtable(mdp)),
        trunc(static_cast<std::size_t>(n), make_qtable(mdp)),
        shift(static_cast<std::size_t>(n), make_qtable(mdp)) {
    if (n < 1) throw std::invalid_argument("QTables: n < 1");
  }

  int n() const { return static_cast<int>(trunc.size()); }
};

/** TD(Delta) learner state: k delta tables with their discount ladder. */
struct DeltaTables {
  std::vector<QTable> w;
  std::vector<double> gammas;

  DeltaTables(const TabularMdp& mdp, std::vector<double> gs) : gammas(std::move(gs)) {
    if (gammas.empty()) throw std::invalid_argument("DeltaTables: no gammas");
    for (std::size_t i = 1; i < gammas.size(); ++i)
      if (!(gammas[i] > gammas[i - 1]))
        throw std::invalid_argument("DeltaTables: gammas not increasing");
    for (double g : gammas)
      if (g < 0.0 || g > 1.0)
        throw std::invalid_argument("DeltaTables: gamma outside [0,1]");
    w.assign(gammas.size(), QTable(mdp.num_states(), mdp.num_actions(), gammas.back()));
  }

  int k() const { return static_cast<int>(w.size()); }

  // Q_{gamma_i}(s, a) reconstructed as the prefix sum of the delta heads.
  double prefix_q(int upto, int s, int a) const {
    double acc = 0.0;
    for (int j = 0; j <= upto; ++j) acc += w[j].at(s, a);
    return acc;
  }

  int argmax_full(int s) const {
    int best = 0;
    double bv = prefix_q(k() - 1, s, 0);
    for (int a = 1; a < w[0].num_actions; ++a) {
      double v = prefix_q(k() - 1, s, a);
      if (v > bv) {
        bv = v;
        best = a;
      }
    }
    return best;
  }
};

inline double q_update(double old, double alpha, double target) {
  return (1.0 - alpha) * old + alpha * target;
}

/** Standard Q-learning update; the bootstrap is zero past terminals. */
inline void vanilla_step(QTable& q, const Transition& t, double alpha) {
  double boot = t.done ? 0.0 : q.gamma * q.max(t.next);
  q.at(t.s, t.a) = q_update(q.at(t.s, t.a), alpha, t.r + boot);
}

/**
 * Composite update: all 2n+1 targets are formed from the pre-step tables
 * with a shared bootstrap action a* = argmax_a q(s', a), then every table
 * is written.  Horizon-1 truncated target is the raw reward; higher
 * horizons chain through the next state's lower horizon.  The shifted
 * ladder starts at gamma * q(s', a*) and shifts one horizon per level.
 * The full-Q target recomposes the two depth-n heads.
 */
inline void composite_step(QTables& qt, const Transition& t, double alpha_q,
                           double alpha_tr, double alpha_sh) {
  const int n = qt.n();
  const double gamma = qt.q.gamma;
  const int astar = t.done ? 0 : qt.q.argmax(t.next);

  std::vector<double> y_tr(n), y_sh(n);
  y_tr[0] = t.r;
  y_sh[0] = t.done ? 0.0 : gamma * qt.q.at(t.next, astar);
  for (int i = 1; i < n; ++i) {
    y_tr[i] = t.r + (t.done ? 0.0 : gamma * qt.trunc[i - 1].at(t.next, astar));
    y_sh[i] = t.done ? 0.0 : gamma * qt.shift[i - 1].at(t.next, astar);
  }
  double y_q = t.r + (t.done ? 0.0
                             : gamma * (qt.trunc[n - 1].at(t.next, astar) +
                                        qt.shift[n - 1].at(t.next, astar)));

  for (int i = 0; i < n; ++i) {
    qt.trunc[i].at(t.s, t.a) = q_update(qt.trunc[i].at(t.s, t.a), alpha_tr, y_tr[i]);
    qt.shift[i].at(t.s, t.a) = q_update(qt.shift[i].at(t.s, t.a), alpha_sh, y_sh[i]);
  }
  qt.q.at(t.s, t.a) = q_update(qt.q.at(t.s, t.a), alpha_q, y_q);
}

/**
 * Q-learning with a one-step shifted bootstrap: shift1 learns
 * gamma * max_a q(s', a) for each pair, and the full-Q target replaces the
 * usual discounted bootstrap with the pre-step shift1 value of the pair
 * being updated.  Both targets are read before either write; a terminal
 * transition reduces the full-Q target to the raw reward.
 */
inline void shifted_only_step(QTable& q, QTable& shift1, const Transition& t,
                              double alpha_q, double alpha_sh) {
  double y_sh = t.done ? 0.0 : q.gamma * q.max(t.next);
  double y_q = t.r + (t.done ? 0.0 : shift1.at(t.s, t.a));
  shift1.at(t.s, t.a) = q_update(shift1.at(t.s, t.a), alpha_sh, y_sh);
  q.at(t.s, t.a) = q_update(q.at(t.s, t.a), alpha_q, y_q);
}

/**
 * n-step backup over a window of consecutive transitions from one episode.
 * Throws if the window chain is broken (episode boundary inside).
 */
inline void nstep_onpolicy_step(QTable& q, std::span<const Transition> window,
                                double alpha) {
  if (window.empty()) throw std::invalid_argument("nstep_onpolicy_step: empty window");
  for (std::size_t j = 0; j + 1 < window.size(); ++j)
    if (window[j].done || window[j].next != window[j + 1].s)
      throw std::invalid_argument("nstep_onpolicy_step: window crosses an episode");
  const double gamma = q.gamma;
  double target = 0.0, disc = 1.0;
  for (const Transition& t : window) {
    target += disc * t.r;
    disc *= gamma;
  }
  const Transition& last = window[window.size() - 1];
  if (!last.done) target += disc * q.max(last.next);
  q.at(window[0].s, window[0].a) =
      q_update(q.at(window[0].s, window[0].a), alpha, target);
}

/**
 * n-step target built by rolling the model: after the stored transition,
 * n-1 greedy steps are sampled from the MDP itself (two draws each), then
 * the tail bootstraps greedily.  n = 1 consumes no extra draws and matches
 * vanilla_step exactly.
 */
inline void nstep_model_step(QTable& q, const TabularMdp& mdp,
                             const Transition& t, int n, double alpha,
                             Rng& rng) {
  if (n < 1) throw std::invalid_argument("nstep_model_step: n < 1");
  const double gamma = q.gamma;
  double target = t.r, disc = gamma;
  int s = t.next;
  bool done = t.done;
  for (int j = 1; j < n && !done; ++j) {
    Transition roll = sample_step(mdp, s, q.argmax(s), rng);
    target += disc * roll.r;
    disc *= gamma;
    s = roll.next;
    done = roll.done;
  }
  if (!done) target += disc * q.max(s);
  q.at(t.s, t.a) = q_update(q.at(t.s, t.a), alpha, target);
}

/**
 * TD(Delta) update over the delta ladder.  The bootstrap action maximizes
 * the full prefix sum (the largest-gamma Q).  Head 1 is plain Q-learning
 * at gamma_1; head i regresses on the gap between consecutive discounts
 * plus its own shifted term.  All reads precede all writes.
 */
inline void td_delta_step(DeltaTables& dt, const Transition& t, double alpha) {
  const int k = dt.k();
  std::vector<double> y(k);
  if (t.done) {
    y[0] = t.r;
    for (int i = 1; i < k; ++i) y[i] = 0.0;
  } else {
    const int astar = dt.argmax_full(t.next);
    y[0] = t.r + dt.gammas[0] * dt.w[0].at(t.next, astar);
    for (int i = 1; i < k; ++i)
      y[i] = (dt.gammas[i] - dt.gammas[i - 1]) * dt.prefix_q(i - 1, t.next, astar) +
             dt.gammas[i] * dt.w[i].at(t.next, astar);
  }
  for (int i = 0; i < k; ++i)
    dt.w[i].at(t.s, t.a) = q_update(dt.w[i].at(t.s, t.a), alpha, y[i]);
}

/**
 * Epsilon-greedy action draw.  One uniform01 draw for the explore branch;
 * one uniform_int draw over all actions when it fires.
 */
inline int epsilon_greedy(const QTable& q, int s, double eps, Rng& rng) {
  if (rng.uniform01() < eps) return rng.uniform_int(q.num_actions);
  return q.argmax(s);
}

}  // namespace cq
