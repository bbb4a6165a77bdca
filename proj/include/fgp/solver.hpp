#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "constraints.hpp"
#include "genfun.hpp"
#include "problem.hpp"

namespace fgp {

struct SolverOptions {
  double tolerance = 1e-8;
  int max_outer = 60;
  int max_inner = 200;
  double barrier_decrease = 10.0;
  double barrier_start = 1.0;
  /// Strictly feasible starting point; the default start is used if empty.
  std::optional<GenVector> start;
  /// Called with the full node vector after every accepted Newton step.
  std::function<void(const std::vector<double> &)> observer;
};

struct SolveReport {
  GenVector solution;
  double objective = 0.0;
  int iterations = 0;
  int outer_iterations = 0;
  /// Newton decrement (gradient of the barrier problem in the local H^-1
  /// norm) plus the largest constraint violation.
  double kkt_residual = 0.0;
  /// Plain infinity norm of the same gradient, for diagnostics.
  double gradient_norm = 0.0;
  double barrier_final = 0.0;
  bool converged = false;
  /// The barrier iterate scored below l = 0, which is always feasible, and
  /// l = 0 was returned instead. The residuals still describe the iterate.
  bool zero_incumbent = false;
  FeasibilityReport feasibility;
};

namespace detail {

/// Integrates segment slopes into node values with l(1/2) = 0.
inline std::vector<double> integrate_slopes(const Partition &P,
                                            const std::vector<double> &s) {
  std::vector<double> l(P.size(), 0.0);
  for (std::size_t k = 0; k + 1 < P.size(); ++k) {
    l[k + 1] = l[k] + s[k] * P.spacing(k);
  }
  const double shift = l[P.half_index()];
  for (double &x : l) {
    x -= shift;
  }
  l[P.half_index()] = 0.0;
  return l;
}

inline bool strictly_feasible(const std::vector<LocalConstraint> &cons,
                              const ObjectiveModel &model,
                              const std::vector<double> &l) {
  for (const auto &c : cons) {
    if (!(c.value(l.data()) < 0.0)) {
      return false;
    }
  }
  return model.in_domain(l.data());
}

/// -eps (x - 1/2)^2 with eps = min(beta, 1)/100; under the monotone
/// constraint that start has negative slopes, so slopes eps/(1 + x_k) are
/// used instead (positive, decreasing, with x_k s_k increasing).
inline std::vector<double> default_start(const ProblemSpec &spec,
                                         const std::vector<LocalConstraint> &cons,
                                         const ObjectiveModel &model) {
  const Partition &P = spec.partition;
  double eps = std::min(spec.beta, 1.0) / 100.0;
  for (int attempt = 0; attempt < 60; ++attempt, eps *= 0.5) {
    std::vector<double> l(P.size());
    if (spec.monotone) {
      std::vector<double> s(P.size() - 1);
      for (std::size_t k = 0; k < s.size(); ++k) {
        s[k] = eps / (1.0 + P[k]);
      }
      l = integrate_slopes(P, s);
    } else {
      for (std::size_t i = 0; i < P.size(); ++i) {
        l[i] = -eps * (P[i] - 0.5) * (P[i] - 0.5);
      }
      l[P.half_index()] = 0.0;
    }
    if (strictly_feasible(cons, model, l)) {
      return l;
    }
  }
  throw NumericalError("could not construct a strictly feasible start");
}

} // namespace detail

/// Primal log-barrier interior-point method for the discretized problem.
/// The node at 1/2 is pinned to 0 and removed from the Newton system.
inline SolveReport solve(const ProblemSpec &spec,
                         const SolverOptions &opts = {}) {
  spec.validate();
  if (!(opts.tolerance > 0.0) || !(opts.barrier_decrease > 1.0)) {
    throw InputError("solver needs tolerance > 0 and barrier_decrease > 1");
  }
  const Partition &P = spec.partition;
  const std::size_t d = P.size();
  const std::size_t h = P.half_index();
  const ObjectiveModel model(spec);
  const auto cons = build_constraints(P, spec.beta, spec.monotone);
  const double m = static_cast<double>(cons.size());

  std::vector<double> l;
  if (opts.start) {
    require_grid(*opts.start, spec);
    l = opts.start->values();
    if (!detail::strictly_feasible(cons, model, l)) {
      throw InputError("solver start point is not strictly feasible");
    }
  } else {
    l = detail::default_start(spec, cons, model);
  }

  // F(l) = -J(l) - mu sum log(-g_k(l)); +inf outside the domain
  auto barrier_value = [&](const std::vector<double> &x, double mu) {
    double f = -model.value(x.data());
    if (!std::isfinite(f)) {
      return std::numeric_limits<double>::infinity();
    }
    for (const auto &c : cons) {
      const double g = c.value(x.data());
      if (!(g < 0.0)) {
        return std::numeric_limits<double>::infinity();
      }
      f -= mu * std::log(-g);
    }
    return f;
  };

  const auto D = static_cast<Eigen::Index>(d);
  Eigen::VectorXd grad(D);
  Eigen::MatrixXd hess(D, D);
  auto derivatives = [&](const std::vector<double> &x, double mu) {
    grad.setZero();
    hess.setZero();
    model.add_derivatives(x.data(), grad, hess);
    grad = -grad;
    hess = -hess;
    std::array<double, 3> lg{};
    std::array<std::array<double, 3>, 3> lh;
    for (const auto &c : cons) {
      const double g = c.value(x.data());
      c.derivatives(x.data(), lg, lh);
      const double inv = 1.0 / (-g);
      for (int i = 0; i < 3; ++i) {
        const auto I = static_cast<Eigen::Index>(c.j0 + static_cast<std::size_t>(i));
        grad[I] += mu * inv * lg[static_cast<std::size_t>(i)];
        for (int j = 0; j < 3; ++j) {
          const auto J = static_cast<Eigen::Index>(c.j0 + static_cast<std::size_t>(j));
          hess(I, J) += mu * (inv * lh[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
                              inv * inv * lg[static_cast<std::size_t>(i)] * lg[static_cast<std::size_t>(j)]);
        }
      }
    }
  };

  // reduced coordinates skip the pinned node
  auto reduce = [&](const Eigen::VectorXd &v) {
    Eigen::VectorXd r(D - 1);
    for (Eigen::Index i = 0, k = 0; i < D; ++i) {
      if (i != static_cast<Eigen::Index>(h)) {
        r[k++] = v[i];
      }
    }
    return r;
  };
  auto reduce_matrix = [&](const Eigen::MatrixXd &M) {
    Eigen::MatrixXd r(D - 1, D - 1);
    const auto H = static_cast<Eigen::Index>(h);
    for (Eigen::Index i = 0, a = 0; i < D; ++i) {
      if (i == H) {
        continue;
      }
      for (Eigen::Index j = 0, b = 0; j < D; ++j) {
        if (j == H) {
          continue;
        }
        r(a, b++) = M(i, j);
      }
      ++a;
    }
    return r;
  };

  SolveReport rep;
  double mu = opts.barrier_start;
  bool reached = false;
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    rep.outer_iterations = outer + 1;
    const bool final_stage = m * mu <= opts.tolerance;
    double last_decrement = std::numeric_limits<double>::infinity();
    for (int inner = 0; inner < opts.max_inner; ++inner) {
      derivatives(l, mu);
      const Eigen::VectorXd g = reduce(grad);
      const Eigen::MatrixXd H = reduce_matrix(hess);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      Eigen::VectorXd step = ldlt.solve(-g);
      // one step of iterative refinement; H is badly scaled near the boundary
      step += ldlt.solve(-g - H * step);
      const double decrement = -g.dot(step);
      if (!(decrement > 0.0) || !step.allFinite()) {
        break;
      }
      // centering precision: loose on intermediate stages
      const double target = final_stage ? 0.1 * opts.tolerance : 1e-6;
      if (std::sqrt(decrement) <= target) {
        break;
      }
      // stalled at rounding level; damped steps may legitimately plateau
      if (decrement < 1e-12 && decrement >= 0.999 * last_decrement) {
        break;
      }
      last_decrement = decrement;
      std::vector<double> full(d);
      auto apply = [&](double t) {
        for (std::size_t i = 0, k = 0; i < d; ++i) {
          full[i] = i == h ? 0.0 : l[i] + t * step[static_cast<Eigen::Index>(k++)];
        }
      };
      const double f0 = barrier_value(l, mu);
      double t = 1.0;
      bool accepted = false;
      while (t > 1e-20) {
        apply(t);
        const double f1 = barrier_value(full, mu);
        if (std::isfinite(f1) && f1 <= f0 - 1e-4 * t * decrement) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) {
        break;
      }
      l.swap(full);
      ++rep.iterations;
      if (opts.observer) {
        opts.observer(l);
      }
    }
    if (final_stage) {
      reached = true;
      break;
    }
    mu /= opts.barrier_decrease;
  }

  derivatives(l, mu);
  const Eigen::VectorXd g = reduce(grad);
  rep.gradient_norm = g.lpNorm<Eigen::Infinity>();
  const Eigen::VectorXd step = reduce_matrix(hess).ldlt().solve(g);
  const double local_norm = std::sqrt(std::max(0.0, g.dot(step)));
  double violation = 0.0;
  for (const auto &c : cons) {
    violation = std::max(violation, c.value(l.data()));
  }
  rep.kkt_residual = local_norm + violation;
  rep.barrier_final = mu;
  rep.solution = GenVector(P, l);
  rep.objective = model.value(l.data());
  rep.feasibility = verify_membership(rep.solution, spec.beta, spec.monotone);
  const std::vector<double> zero(d, 0.0);
  const double j0 = model.value(zero.data());
  if (j0 > rep.objective) {
    // the iterate is within m mu of the optimum; l = 0 may be closer
    rep.zero_incumbent = true;
    rep.solution = GenVector::zero(P);
    rep.objective = j0;
    rep.feasibility = verify_membership(rep.solution, spec.beta, spec.monotone);
  }
  rep.converged = reached && rep.kkt_residual <= opts.tolerance &&
                  rep.feasibility.ok();
  return rep;
}

} // namespace fgp
