#pragma once

// Small MDPs used across the test suite.

#include <vector>

#include "cq/mdp.hpp"
#include "cq/rng.hpp"

namespace cqtest {

// Single non-terminal state, one action, reward 1, straight into the
// terminal.  The smallest episodic probe there is.
inline cq::TabularMdp probe_done(double gamma = 1.0) {
  std::vector<cq::OutcomeDist> out;
  out.push_back(cq::OutcomeDist({cq::Branch{1.0, 1, cq::RewardDist::point(1.0)}}));
  return cq::TabularMdp(2, 1, 0, gamma, {false, true}, std::move(out));
}

// One state, one action, two branches: 0.3 to terminal 1, 0.7 to terminal 2.
inline cq::TabularMdp probe_two_branch() {
  std::vector<cq::OutcomeDist> out;
  out.push_back(cq::OutcomeDist({
      cq::Branch{0.3, 1, cq::RewardDist::point(0.0)},
      cq::Branch{0.7, 2, cq::RewardDist::point(0.5)},
  }));
  return cq::TabularMdp(3, 1, 0, 1.0, {false, true, true}, std::move(out));
}

// Seeded random episodic MDP: `ns` states (the last one terminal), `na`
// actions, two branches and two reward atoms everywhere.
inline cq::TabularMdp random_mdp(std::uint64_t seed, int ns = 4, int na = 2,
                                 double gamma = 0.9) {
  cq::Rng rng(seed);
  std::vector<bool> terminal(ns, false);
  terminal[ns - 1] = true;
  std::vector<cq::OutcomeDist> out;
  for (int s = 0; s < ns - 1; ++s) {
    for (int a = 0; a < na; ++a) {
      double p = 0.3 + 0.4 * rng.uniform01();
      int n1 = rng.uniform_int(ns);
      int n2 = rng.uniform_int(ns);
      auto atoms = [&rng]() {
        double q = 0.2 + 0.6 * rng.uniform01();
        double v1 = rng.uniform(-1.0, 1.0);
        double v2 = rng.uniform(-1.0, 1.0);
        return cq::RewardDist({q, 1.0 - q}, {v1, v2});
      };
      out.push_back(cq::OutcomeDist({
          cq::Branch{p, n1, atoms()},
          cq::Branch{1.0 - p, n2, atoms()},
      }));
    }
  }
  return cq::TabularMdp(ns, na, 0, gamma, std::move(terminal), std::move(out));
}

}  // namespace cqtest
