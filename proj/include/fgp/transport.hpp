#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"
#include "measure.hpp"

namespace fgp {

struct TransportResult {
  double cost = 0.0;
  std::size_t pivots = 0;
  // plan[i * n + j], only filled when requested
  std::vector<double> plan;
};

namespace detail {

/// Primal network simplex for the uncapacitated transportation problem.
/// Sources 0..m-1, sinks m..m+n-1, an artificial root m+n joined to every
/// node. The tree stays strongly feasible (zero-flow arcs point away from
/// the root), which rules out cycling under degenerate pivots.
class NetworkSimplex {
public:
  NetworkSimplex(const std::vector<double> &a, const std::vector<double> &b,
                 const std::vector<double> &cost)
      : m_(a.size()), n_(b.size()), cost_(cost) {
    const std::size_t E = m_ * n_;
    nodes_ = m_ + n_ + 1;
    root_ = m_ + n_;
    double cmax = 0.0;
    for (double c : cost_) {
      cmax = std::max(cmax, std::abs(c));
    }
    big_ = (cmax + 1.0) * static_cast<double>(nodes_);
    flow_.assign(E + m_ + n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      flow_[E + i] = a[i];
    }
    for (std::size_t j = 0; j < n_; ++j) {
      flow_[E + m_ + j] = b[j];
    }
    adj_.assign(nodes_, {});
    for (std::size_t k = E; k < E + m_ + n_; ++k) {
      adj_[tail(k)].push_back(k);
      adj_[head(k)].push_back(k);
    }
    parent_.assign(nodes_, 0);
    parent_arc_.assign(nodes_, 0);
    depth_.assign(nodes_, 0);
    pot_.assign(nodes_, 0.0);
    tol_ = 1e-12 * (1.0 + cmax);
  }

  TransportResult run(bool want_plan, std::size_t max_pivots) {
    const std::size_t E = m_ * n_;
    const std::size_t block =
        std::max<std::size_t>(32, static_cast<std::size_t>(std::sqrt(static_cast<double>(E))));
    rebuild_tree();
    std::size_t next = 0;
    std::size_t pivots = 0;
    while (true) {
      // block search: scan until a block yields a violating arc
      std::size_t best = E;
      double best_rc = -tol_;
      std::size_t scanned = 0;
      while (scanned < E) {
        const std::size_t len = std::min(block, E - scanned);
        for (std::size_t t = 0; t < len; ++t) {
          const std::size_t e = next;
          next = next + 1 == E ? 0 : next + 1;
          const std::size_t i = e / n_, j = e % n_;
          const double rc = cost_[e] + pot_[i] - pot_[m_ + j];
          if (rc < best_rc) {
            best_rc = rc;
            best = e;
          }
        }
        scanned += len;
        if (best != E) {
          break;
        }
      }
      if (best == E) {
        break;
      }
      if (++pivots > max_pivots) {
        throw NumericalError("network simplex exceeded pivot limit");
      }
      pivot(best);
    }
    TransportResult res;
    res.pivots = pivots;
    for (std::size_t e = 0; e < E; ++e) {
      res.cost += flow_[e] * cost_[e];
    }
    if (want_plan) {
      res.plan.assign(flow_.begin(), flow_.begin() + static_cast<long>(E));
    }
    return res;
  }

private:
  double arc_cost(std::size_t k) const {
    return k < m_ * n_ ? cost_[k] : big_;
  }

  // real arcs i -> m + j, then source i -> root, then root -> sink j
  std::size_t tail(std::size_t k) const {
    const std::size_t E = m_ * n_;
    if (k < E) {
      return k / n_;
    }
    return k < E + m_ ? k - E : root_;
  }

  std::size_t head(std::size_t k) const {
    const std::size_t E = m_ * n_;
    if (k < E) {
      return m_ + k % n_;
    }
    return k < E + m_ ? root_ : k - E;
  }

  void rebuild_tree() {
    std::vector<char> seen(nodes_, 0);
    std::deque<std::size_t> queue{root_};
    seen[root_] = 1;
    depth_[root_] = 0;
    pot_[root_] = 0.0;
    while (!queue.empty()) {
      const std::size_t s = queue.front();
      queue.pop_front();
      for (std::size_t k : adj_[s]) {
        const std::size_t t = tail(k) == s ? head(k) : tail(k);
        if (seen[t]) {
          continue;
        }
        seen[t] = 1;
        parent_[t] = s;
        parent_arc_[t] = k;
        depth_[t] = depth_[s] + 1;
        // reduced cost c + pot[tail] - pot[head] vanishes on tree arcs
        pot_[t] = tail(k) == s ? pot_[s] + arc_cost(k) : pot_[s] - arc_cost(k);
        queue.push_back(t);
      }
    }
  }

  void pivot(std::size_t e) {
    const std::size_t u = tail(e), v = head(e);
    std::vector<std::size_t> up_u, up_v;
    std::size_t a = u, b = v;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        up_u.push_back(a);
        a = parent_[a];
      } else {
        up_v.push_back(b);
        b = parent_[b];
      }
    }
    // cycle orientation: join -> down to u -> v -> up to join
    double delta = std::numeric_limits<double>::infinity();
    std::size_t leave = e;
    bool found = false;
    for (auto it = up_u.rbegin(); it != up_u.rend(); ++it) {
      const std::size_t k = parent_arc_[*it];
      // moving parent -> child; backward if the arc points to the parent
      if (head(k) == parent_[*it] && flow_[k] <= delta) {
        delta = flow_[k];
        leave = k;
        found = true;
      }
    }
    for (std::size_t node : up_v) {
      const std::size_t k = parent_arc_[node];
      // moving child -> parent; backward if the arc points to the child
      if (head(k) == node && flow_[k] <= delta) {
        delta = flow_[k];
        leave = k;
        found = true;
      }
    }
    if (!found) {
      throw NumericalError("unbounded transport cycle");
    }
    delta = std::max(delta, 0.0);
    for (std::size_t node : up_u) {
      const std::size_t k = parent_arc_[node];
      flow_[k] += head(k) == parent_[node] ? -delta : delta;
    }
    for (std::size_t node : up_v) {
      const std::size_t k = parent_arc_[node];
      flow_[k] += head(k) == node ? -delta : delta;
    }
    flow_[e] = delta;
    flow_[leave] = 0.0;
    auto drop = [&](std::size_t node, std::size_t k) {
      auto &list = adj_[node];
      list.erase(std::find(list.begin(), list.end(), k));
    };
    drop(tail(leave), leave);
    drop(head(leave), leave);
    adj_[u].push_back(e);
    adj_[v].push_back(e);
    rebuild_tree();
  }

  std::size_t m_, n_, nodes_ = 0, root_ = 0;
  const std::vector<double> &cost_;
  double big_ = 0.0, tol_ = 0.0;
  std::vector<double> flow_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> parent_, parent_arc_, depth_;
  std::vector<double> pot_;
};

} // namespace detail

/// Exact optimal transport between weights a and b with cost[i * n + j].
inline TransportResult solve_transport(const std::vector<double> &a,
                                       const std::vector<double> &b,
                                       const std::vector<double> &cost,
                                       bool want_plan = false) {
  if (a.empty() || b.empty() || cost.size() != a.size() * b.size()) {
    throw InputError("transport problem has inconsistent sizes");
  }
  for (double x : cost) {
    if (!std::isfinite(x)) {
      throw InputError("transport cost must be finite");
    }
  }
  detail::NetworkSimplex ns(a, b, cost);
  const std::size_t limit = 1000 * (a.size() + b.size()) * (a.size() + b.size()) + 10000;
  return ns.run(want_plan, limit);
}

/// Largest support accepted by wasserstein1.
inline constexpr std::size_t kMaxTransportSupport = 4000;

inline std::vector<double> ground_costs(const EmpiricalMeasure &mu,
                                        const EmpiricalMeasure &nu) {
  std::vector<double> c(mu.size() * nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) {
      c[i * nu.size() + j] = rho_metric(mu.atom(i), nu.atom(j));
    }
  }
  return c;
}

namespace detail {

// total order on measures; used to solve W(mu, nu) and W(nu, mu) identically
inline bool measure_before(const EmpiricalMeasure &a, const EmpiricalMeasure &b) {
  if (a.size() != b.size()) {
    return a.size() < b.size();
  }
  if (a.weights() != b.weights()) {
    return a.weights() < b.weights();
  }
  for (std::size_t s = 0; s < a.size(); ++s) {
    const auto &x = a.atom(s), &y = b.atom(s);
    if (x.first.entries() != y.first.entries()) {
      return x.first.entries() < y.first.entries();
    }
    if (x.second.entries() != y.second.entries()) {
      return x.second.entries() < y.second.entries();
    }
  }
  return false;
}

} // namespace detail

/// W_1 under the ground metric rho. Exactly symmetric in its arguments.
inline double wasserstein1(const EmpiricalMeasure &mu,
                           const EmpiricalMeasure &nu) {
  if (mu.dimension() != nu.dimension()) {
    throw InputError("measures have different dimensions");
  }
  if (mu.size() > kMaxTransportSupport || nu.size() > kMaxTransportSupport) {
    throw InputError("support too large for exact transport (cap " +
                     std::to_string(kMaxTransportSupport) + ")");
  }
  if (detail::measure_before(nu, mu)) {
    return solve_transport(nu.weights(), mu.weights(), ground_costs(nu, mu)).cost;
  }
  return solve_transport(mu.weights(), nu.weights(), ground_costs(mu, nu)).cost;
}

} // namespace fgp
