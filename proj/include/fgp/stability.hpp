#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "error.hpp"
#include "genfun.hpp"
#include "measure.hpp"
#include "problem.hpp"
#include "solver.hpp"
#include "transport.hpp"

namespace fgp {

struct StabilityConstants {
  double K0 = 0.0; // diversity part
  double K1 = 0.0; // relative log return
  double K2 = 0.0; // regularizer integrand
  double K = 0.0;
};

inline StabilityConstants stability_constants(double beta, std::size_t n,
                                              double eta0, double eta1,
                                              double K2 = 0.0) {
  if (!(beta > 0.0) || n < 2 || !(eta1 > 0.0) || !(K2 >= 0.0)) {
    throw InputError("stability constants need beta > 0, n >= 2, eta1 > 0, K2 >= 0");
  }
  const double sb = std::sqrt(beta);
  const double nn = static_cast<double>(n);
  StabilityConstants c;
  c.K0 = 2.0 + sb / nn;
  c.K1 = 2.0 + ((sb + 2.0 * beta) / nn) * std::exp(2.0 * sb / nn);
  c.K2 = K2;
  c.K = std::abs(eta0) * c.K0 + eta1 * c.K1 + K2;
  return c;
}

/// Numerical Lipschitz estimate of lambda |pi(u) - target(u)|^2 with respect
/// to rho, from pairwise quotients over the pooled u-atoms of both measures
/// and random points on the segments between them. Only the given
/// generators are examined.
inline double estimate_k2(const ProblemSpec &spec,
                          const std::vector<const GenVector *> &gens,
                          const EmpiricalMeasure &a, const EmpiricalMeasure &b,
                          std::size_t max_points = 400) {
  if (spec.regularizer.atom_free() || spec.lambda == 0.0) {
    return 0.0;
  }
  std::vector<WeightVector> pts;
  auto take = [&](const EmpiricalMeasure &m) {
    const std::size_t step = std::max<std::size_t>(1, 2 * m.size() / max_points);
    for (std::size_t s = 0; s < m.size(); s += step) {
      pts.push_back(m.atom(s).first);
    }
  };
  take(a);
  take(b);
  // midpoints of consecutive points stay in the ordered simplex
  const std::size_t base = pts.size();
  for (std::size_t i = 0; i + 1 < base; ++i) {
    std::vector<double> m(pts[i].size());
    for (std::size_t j = 0; j < m.size(); ++j) {
      m[j] = 0.5 * (pts[i][j] + pts[i + 1][j]);
    }
    pts.emplace_back(WeightVector(m));
  }
  const auto &target = *spec.regularizer.target;
  double k2 = 0.0;
  for (const GenVector *g : gens) {
    std::vector<double> phi(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto pi = portfolio_weights(*g, pts[i]);
      const auto t = target.apply(pts[i]);
      double s = 0.0;
      for (std::size_t j = 0; j < pi.size(); ++j) {
        s += (pi[j] - t[j]) * (pi[j] - t[j]);
      }
      phi[i] = spec.lambda * s;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        const double d = simplex_distance(pts[i], pts[j]);
        if (d > 1e-12) {
          k2 = std::max(k2, std::abs(phi[i] - phi[j]) / d);
        }
      }
    }
  }
  return k2;
}

struct StabilityReport {
  double J = 0.0;             // optimal value on gamma
  double J_tilde = 0.0;       // optimal value on gamma_tilde
  double J_cross = 0.0;       // gamma's optimizer evaluated on gamma_tilde
  double wasserstein = 0.0;
  double slack = 0.0;         // 2 x solver tolerance
  StabilityConstants constants;
  double value_margin = 0.0;  // K W + slack - |J - J_tilde|
  double lower_margin = 0.0;  // J_tilde - J_cross + slack
  double upper_margin = 0.0;  // 2 K W + slack - (J_tilde - J_cross)
  bool converged = false;

  bool holds() const {
    return value_margin >= 0.0 && lower_margin >= 0.0 && upper_margin >= 0.0;
  }
};

using SolveFn = std::function<SolveReport(const ProblemSpec &)>;

/// Solves on both measures and checks the value and suboptimality bounds.
/// spec.measure is ignored.
inline StabilityReport check_stability(const EmpiricalMeasure &gamma,
                                       const EmpiricalMeasure &gamma_tilde,
                                       const ProblemSpec &spec,
                                       const SolverOptions &opts = {},
                                       SolveFn solve_fn = {}) {
  if (gamma.dimension() != gamma_tilde.dimension()) {
    throw InputError("measures have different dimensions");
  }
  if (!solve_fn) {
    solve_fn = [&opts](const ProblemSpec &s) { return solve(s, opts); };
  }
  ProblemSpec a = spec;
  a.measure = gamma;
  ProblemSpec b = spec;
  b.measure = gamma_tilde;
  const SolveReport ra = solve_fn(a);
  const SolveReport rb = solve_fn(b);

  StabilityReport rep;
  rep.J = ra.objective;
  rep.J_tilde = rb.objective;
  rep.J_cross = objective_value(ra.solution, b);
  rep.wasserstein = wasserstein1(gamma, gamma_tilde);
  rep.slack = 2.0 * opts.tolerance;
  rep.converged = ra.converged && rb.converged;
  const double k2 = estimate_k2(spec, {&ra.solution, &rb.solution}, gamma,
                                gamma_tilde);
  rep.constants = stability_constants(spec.beta, gamma.dimension(), spec.eta0,
                                      spec.eta1, k2);
  const double KW = rep.constants.K * rep.wasserstein;
  rep.value_margin = KW + rep.slack - std::abs(rep.J - rep.J_tilde);
  rep.lower_margin = rep.J_tilde - rep.J_cross + rep.slack;
  rep.upper_margin = 2.0 * KW + rep.slack - (rep.J_tilde - rep.J_cross);
  return rep;
}

} // namespace fgp
