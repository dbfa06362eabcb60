#pragma once

// Value iteration on a deterministic tabular MDP, with the tables read off
// the environment's step function one (state, action) pair at a time.

#include <cmath>
#include <cstddef>
#include <vector>

#include "cmrl/environments.hpp"

namespace oracle {

struct TabularMdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<std::vector<std::size_t>> next;
  std::vector<std::vector<double>> reward;
};

inline TabularMdp probe_mdp(const cmrl::EnvSpec& spec, std::size_t states) {
  TabularMdp mdp;
  mdp.states = states;
  mdp.actions = spec.dims.o;
  mdp.next.assign(states, std::vector<std::size_t>(mdp.actions));
  mdp.reward.assign(states, std::vector<double>(mdp.actions));
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t a = 0; a < mdp.actions; ++a) {
      cmrl::EnvState st;
      st.position = static_cast<int>(s);
      const auto tr = cmrl::step(spec, st, cmrl::one_hot(a, mdp.actions));
      mdp.next[s][a] = static_cast<std::size_t>(tr.state.position);
      double r = 0.0;
      for (double x : tr.r) r += x;
      mdp.reward[s][a] = r;
    }
  }
  return mdp;
}

struct ViSolution {
  std::vector<double> value;
  std::vector<std::size_t> policy;  // lowest index among optimal actions
};

/// Infinite-horizon values to tolerance `tol`.
inline ViSolution value_iteration(const TabularMdp& mdp, double gamma, double tol) {
  ViSolution sol;
  sol.value.assign(mdp.states, 0.0);
  for (;;) {
    double delta = 0.0;
    std::vector<double> v(mdp.states);
    for (std::size_t s = 0; s < mdp.states; ++s) {
      double best = -1e300;
      for (std::size_t a = 0; a < mdp.actions; ++a) {
        best = std::max(best, mdp.reward[s][a] + gamma * sol.value[mdp.next[s][a]]);
      }
      v[s] = best;
      delta = std::max(delta, std::abs(v[s] - sol.value[s]));
    }
    sol.value = v;
    if (delta < tol) break;
  }
  sol.policy.assign(mdp.states, 0);
  for (std::size_t s = 0; s < mdp.states; ++s) {
    double best = -1e300;
    for (std::size_t a = 0; a < mdp.actions; ++a) {
      const double q = mdp.reward[s][a] + gamma * sol.value[mdp.next[s][a]];
      if (q > best + 1e-12) {
        best = q;
        sol.policy[s] = a;
      }
    }
  }
  return sol;
}

/// Finite-horizon optimum from `start` by backward induction.
inline double finite_horizon_value(const TabularMdp& mdp, double gamma, std::size_t horizon, std::size_t start) {
  std::vector<double> v(mdp.states, 0.0);
  for (std::size_t h = 0; h < horizon; ++h) {
    std::vector<double> next(mdp.states);
    for (std::size_t s = 0; s < mdp.states; ++s) {
      double best = -1e300;
      for (std::size_t a = 0; a < mdp.actions; ++a) best = std::max(best, mdp.reward[s][a] + gamma * v[mdp.next[s][a]]);
      next[s] = best;
    }
    v = next;
  }
  return v[start];
}

}  // namespace oracle
