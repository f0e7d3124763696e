#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cq/rng.hpp"

namespace cq {

inline constexpr double kProbTol = 1e-12;

/** Finite distribution over reward values. */
class RewardDist {
 public:
  RewardDist(std::vector<double> probs, std::vector<double> values)
      : probs_(std::move(probs)), values_(std::move(values)) {
    if (probs_.empty() || probs_.size() != values_.size())
      throw std::invalid_argument("RewardDist: empty or mismatched atom lists");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p > 0.0) || p > 1.0)
        throw std::invalid_argument("RewardDist: atom probability outside (0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTol)
      throw std::invalid_argument("RewardDist: probabilities do not sum to 1");
    for (double v : values_)
      if (!std::isfinite(v))
        throw std::invalid_argument("RewardDist: non-finite reward value");
  }

  static RewardDist point(double v) { return RewardDist({1.0}, {v}); }

  std::size_t size() const { return probs_.size(); }
  double prob(std::size_t i) const { return probs_[i]; }
  double value(std::size_t i) const { return values_[i]; }

  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) m += probs_[i] * values_[i];
    return m;
  }

  // One generator draw: cumulative walk over atoms in stored order.
  double sample(Rng& rng) const {
    double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs_.size(); ++i) {
      acc += probs_[i];
      if (u < acc) return values_[i];
    }
    return values_.back();
  }

 private:
  std::vector<double> probs_;
  std::vector<double> values_;
};

/** One transition branch: probability, successor state, reward distribution. */
struct Branch {
  double prob;
  int next;
  RewardDist reward;
};

/** Distribution over (next state, reward) for one state-action pair. */
class OutcomeDist {
 public:
  explicit OutcomeDist(std::vector<Branch> branches)
      : branches_(std::move(branches)) {
    if (branches_.empty())
      throw std::invalid_argument("OutcomeDist: no branches");
    double sum = 0.0;
    for (const Branch& b : branches_) {
      if (!(b.prob > 0.0) || b.prob > 1.0)
        throw std::invalid_argument("OutcomeDist: branch probability outside (0,1]");
      sum += b.prob;
    }
    if (std::abs(sum - 1.0) > kProbTol)
      throw std::invalid_argument("OutcomeDist: probabilities do not sum to 1");
  }

  std::size_t size() const { return branches_.size(); }
  const Branch& branch(std::size_t i) const { return branches_[i]; }

 private:
  std::vector<Branch> branches_;
};

struct Transition {
  int s;
  int a;
  double r;
  int next;
  bool done;
};

/**
 * Finite MDP with explicit terminal states.
 *
 * Every non-terminal (s, a) pair carries an OutcomeDist; terminal states
 * carry none and are never stepped from.  gamma = 1 is accepted only when
 * every non-terminal state reachable from the initial state can reach some
 * terminal state; value iteration's residual check backstops MDPs where a
 * policy can still avoid termination.
 */
class TabularMdp {
 public:
  TabularMdp(int num_states, int num_actions, int initial_state, double gamma,
             std::vector<bool> terminal, std::vector<OutcomeDist> outcomes)
      : num_states_(num_states),
        num_actions_(num_actions),
        initial_(initial_state),
        gamma_(gamma),
        terminal_(std::move(terminal)),
        outcomes_(std::move(outcomes)) {
    if (num_states_ <= 0 || num_actions_ <= 0)
      throw std::invalid_argument("TabularMdp: non-positive dimensions");
    if (static_cast<int>(terminal_.size()) != num_states_)
      throw std::invalid_argument("TabularMdp: terminal flags size mismatch");
    if (initial_ < 0 || initial_ >= num_states_ || terminal_[initial_])
      throw std::invalid_argument("TabularMdp: initial state invalid or terminal");
    if (!(gamma_ >= 0.0) || gamma_ > 1.0)
      throw std::invalid_argument("TabularMdp: gamma outside [0,1]");
    std::size_t want = 0;
    for (int s = 0; s < num_states_; ++s)
      if (!terminal_[s]) want += static_cast<std::size_t>(num_actions_);
    if (outcomes_.size() != want)
      throw std::invalid_argument("TabularMdp: outcome table incomplete");
    index_.assign(static_cast<std::size_t>(num_states_) * num_actions_, -1);
    std::size_t k = 0;
    for (int s = 0; s < num_states_; ++s) {
      if (terminal_[s]) continue;
      for (int a = 0; a < num_actions_; ++a)
        index_[static_cast<std::size_t>(s) * num_actions_ + a] =
            static_cast<long>(k++);
    }
    for (const OutcomeDist& od : outcomes_)
      for (std::size_t i = 0; i < od.size(); ++i) {
        int n = od.branch(i).next;
        if (n < 0 || n >= num_states_)
          throw std::invalid_argument("TabularMdp: branch successor out of range");
      }
    if (gamma_ == 1.0) check_termination_reachable();
  }

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int initial_state() const { return initial_; }
  double gamma() const { return gamma_; }
  bool terminal(int s) const { return terminal_[s]; }

  const OutcomeDist& outcomes(int s, int a) const {
    long k = index_[static_cast<std::size_t>(s) * num_actions_ + a];
    if (k < 0) throw std::logic_error("TabularMdp: outcomes of a terminal state");
    return outcomes_[static_cast<std::size_t>(k)];
  }

  double expected_reward(int s, int a) const {
    const OutcomeDist& od = outcomes(s, a);
    double m = 0.0;
    for (std::size_t i = 0; i < od.size(); ++i)
      m += od.branch(i).prob * od.branch(i).reward.mean();
    return m;
  }

  // Copy with a different discount (re-runs the gamma validation).
  TabularMdp with_gamma(double gamma) const {
    return TabularMdp(num_states_, num_actions_, initial_, gamma, terminal_,
                      outcomes_);
  }

 private:
  void check_termination_reachable() const {
    // forward reachability from the initial state over all actions
    std::vector<bool> reach(num_states_, false);
    std::vector<int> stack{initial_};
    reach[initial_] = true;
    while (!stack.empty()) {
      int s = stack.back();
      stack.pop_back();
      if (terminal_[s]) continue;
      for (int a = 0; a < num_actions_; ++a) {
        const OutcomeDist& od = outcomes(s, a);
        for (std::size_t i = 0; i < od.size(); ++i) {
          int n = od.branch(i).next;
          if (!reach[n]) {
            reach[n] = true;
            stack.push_back(n);
          }
        }
      }
    }
    // backward reachability from the terminal set
    std::vector<bool> can_end(num_states_, false);
    for (int s = 0; s < num_states_; ++s)
      if (terminal_[s]) can_end[s] = true;
    bool grew = true;
    while (grew) {
      grew = false;
      for (int s = 0; s < num_states_; ++s) {
        if (can_end[s] || terminal_[s]) continue;
        for (int a = 0; a < num_actions_ && !can_end[s]; ++a) {
          const OutcomeDist& od = outcomes(s, a);
          for (std::size_t i = 0; i < od.size(); ++i)
            if (can_end[od.branch(i).next]) {
              can_end[s] = true;
              grew = true;
              break;
            }
        }
      }
    }
    for (int s = 0; s < num_states_; ++s)
      if (reach[s] && !terminal_[s] && !can_end[s])
        throw std::invalid_argument(
            "TabularMdp: gamma=1 but a reachable state cannot reach a terminal");
  }

  int num_states_;
  int num_actions_;
  int initial_;
  double gamma_;
  std::vector<bool> terminal_;
  std::vector<OutcomeDist> outcomes_;
  std::vector<long> index_;
};

/**
 * Samples one transition.  Exactly two generator draws in fixed order:
 * first the branch, then the reward atom within the branch, both by
 * cumulative walk in stored order.  The reward draw happens even when the
 * branch has a single atom, so streams stay aligned across MDPs.
 */
inline Transition sample_step(const TabularMdp& mdp, int s, int a, Rng& rng) {
  if (mdp.terminal(s)) throw std::logic_error("sample_step: terminal state");
  const OutcomeDist& od = mdp.outcomes(s, a);
  double u = rng.uniform01();
  std::size_t bi = od.size() - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < od.size(); ++i) {
    acc += od.branch(i).prob;
    if (u < acc) {
      bi = i;
      break;
    }
  }
  const Branch& b = od.branch(bi);
  double r = b.reward.sample(rng);
  return Transition{s, a, r, b.next, mdp.terminal(b.next)};
}

/**
 * Flat transition store with episode bookkeeping.  Episodes are contiguous;
 * an episode's final transition has done=true unless the episode was
 * truncated by a step cap.
 */
class ReplayBuffer {
 public:
  void start_episode() {
    if (!starts_.empty() && starts_.back() == data_.size())
      throw std::logic_error("ReplayBuffer: empty episode");
    starts_.push_back(data_.size());
  }

  void push(const Transition& t) {
    if (starts_.empty())
      throw std::logic_error("ReplayBuffer: push before start_episode");
    if (data_.size() > starts_.back() && data_[data_.size() - 1].done)
      throw std::logic_error("ReplayBuffer: push after done within an episode");
    data_.push_back(t);
  }

  std::size_t size() const { return data_.size(); }
  std::size_t num_episodes() const { return starts_.size(); }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  // Half-open index range [begin, end) of the episode containing index i.
  std::pair<std::size_t, std::size_t> episode_bounds(std::size_t i) const {
    std::size_t lo = 0, hi = starts_.size();  // find last start <= i
    while (lo + 1 < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (starts_[mid] <= i) lo = mid;
      else hi = mid;
    }
    std::size_t end = (lo + 1 < starts_.size()) ? starts_[lo + 1] : data_.size();
    return {starts_[lo], end};
  }

 private:
  std::vector<Transition> data_;
  std::vector<std::size_t> starts_;
};

// m transitions uniformly with replacement; one uniform_int draw per sample.
inline std::vector<std::size_t> buffer_sample(const ReplayBuffer& buf,
                                              std::size_t m, Rng& rng) {
  if (buf.size() == 0) throw std::logic_error("buffer_sample: empty buffer");
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i)
    idx[i] = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(buf.size())));
  return idx;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& tok) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw std::invalid_argument("bad numeric token: " + tok);
  return v;
}

}  // namespace detail

/**
 * Versioned plain-text serialization.  Layout:
 *
 *   cqmdp 1
 *   states <N> actions <A> initial <s0> gamma <g>
 *   terminal <t...>
 *   <s> <a> <prob> <next> <reward_prob> <reward_value>   (one atom per line)
 *
 * A branch with k reward atoms spans k consecutive lines repeating the
 * branch probability; a branch ends when its atom probabilities reach 1.
 * Doubles are written in shortest round-trip form, so load(save(m)) is
 * value-exact.
 */
inline std::string save_mdp(const TabularMdp& mdp) {
  std::ostringstream out;
  out << "cqmdp 1\n";
  out << "states " << mdp.num_states() << " actions " << mdp.num_actions()
      << " initial " << mdp.initial_state() << " gamma "
      << detail::format_double(mdp.gamma()) << "\n";
  out << "terminal";
  for (int s = 0; s < mdp.num_states(); ++s)
    if (mdp.terminal(s)) out << ' ' << s;
  out << "\n";
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const OutcomeDist& od = mdp.outcomes(s, a);
      for (std::size_t i = 0; i < od.size(); ++i) {
        const Branch& b = od.branch(i);
        for (std::size_t j = 0; j < b.reward.size(); ++j)
          out << s << ' ' << a << ' ' << detail::format_double(b.prob) << ' '
              << b.next << ' ' << detail::format_double(b.reward.prob(j))
              << ' ' << detail::format_double(b.reward.value(j)) << "\n";
      }
    }
  }
  return out.str();
}

inline TabularMdp load_mdp(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "cqmdp" || version != 1)
    throw std::invalid_argument("load_mdp: bad header");
  std::string kw;
  int ns = 0, na = 0, init = 0;
  std::string gtok;
  in >> kw >> ns;
  if (kw != "states") throw std::invalid_argument("load_mdp: expected 'states'");
  in >> kw >> na;
  if (kw != "actions") throw std::invalid_argument("load_mdp: expected 'actions'");
  in >> kw >> init;
  if (kw != "initial") throw std::invalid_argument("load_mdp: expected 'initial'");
  in >> kw >> gtok;
  if (kw != "gamma") throw std::invalid_argument("load_mdp: expected 'gamma'");
  double gamma = detail::parse_double(gtok);
  in >> kw;
  if (kw != "terminal") throw std::invalid_argument("load_mdp: expected 'terminal'");
  std::string rest;
  std::getline(in, rest);
  std::vector<bool> terminal(ns, false);
  {
    std::istringstream ts(rest);
    int t;
    while (ts >> t) {
      if (t < 0 || t >= ns) throw std::invalid_argument("load_mdp: terminal out of range");
      terminal[t] = true;
    }
  }
  struct Row {
    int s, a, next;
    double prob, rp, rv;
  };
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Row r;
    std::string ptok, rptok, rvtok;
    if (!(ls >> r.s >> r.a >> ptok >> r.next >> rptok >> rvtok))
      throw std::invalid_argument("load_mdp: malformed branch line: " + line);
    r.prob = detail::parse_double(ptok);
    r.rp = detail::parse_double(rptok);
    r.rv = detail::parse_double(rvtok);
    rows.push_back(r);
  }
  std::vector<OutcomeDist> outcomes;
  std::size_t i = 0;
  for (int s = 0; s < ns; ++s) {
    if (terminal[s]) continue;
    for (int a = 0; a < na; ++a) {
      std::vector<Branch> branches;
      while (i < rows.size() && rows[i].s == s && rows[i].a == a) {
        double prob = rows[i].prob;
        int next = rows[i].next;
        std::vector<double> ps, vs;
        double acc = 0.0;
        while (i < rows.size() && rows[i].s == s && rows[i].a == a &&
               rows[i].next == next && rows[i].prob == prob && acc < 1.0 - 1e-9) {
          ps.push_back(rows[i].rp);
          vs.push_back(rows[i].rv);
          acc += rows[i].rp;
          ++i;
        }
        branches.push_back(Branch{prob, next, RewardDist(ps, vs)});
      }
      if (branches.empty())
        throw std::invalid_argument("load_mdp: missing branches for a state-action");
      outcomes.emplace_back(std::move(branches));
    }
  }
  if (i != rows.size())
    throw std::invalid_argument("load_mdp: trailing branch lines");
  return TabularMdp(ns, na, init, gamma, std::move(terminal), std::move(outcomes));
}

}  // namespace cq
