#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "constraints.hpp"
#include "generator.hpp"
#include "simplex.hpp"

namespace fgp {

/// phi(p) = (1/n) sum_i l(p_i)
template <Generator G> double phi(const G &g, const WeightVector &p) {
  double s = 0.0;
  for (double x : p) {
    s += g.value(x);
  }
  return s / static_cast<double>(p.size());
}

/// Unvalidated portfolio weights; may contain negatives for infeasible g.
template <Generator G>
std::vector<double> portfolio_weights(const G &g, const WeightVector &p) {
  const std::size_t n = p.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> slope(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    slope[i] = g.slope(p[i]);
    mean += p[i] * slope[i];
  }
  std::vector<double> pi(n);
  for (std::size_t i = 0; i < n; ++i) {
    pi[i] = p[i] * (1.0 + inv_n * slope[i] - inv_n * mean);
  }
  return pi;
}

template <Generator G>
WeightVector portfolio_map(const G &g, const WeightVector &p) {
  auto pi = portfolio_weights(g, p);
  for (double x : pi) {
    if (!(x > 0.0)) {
      throw NumericalError("generator produces a non-positive weight");
    }
  }
  return WeightVector(std::move(pi));
}

/// log( pi(u) . r / (u . r) )
template <Generator G>
double relative_log_return(const WeightVector &u, const WeightVector &r,
                           const G &g) {
  require_same_size(u, r);
  const auto pi = portfolio_weights(g, u);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    num += pi[i] * r[i];
    den += u[i] * r[i];
  }
  const double ratio = num / den;
  if (!(ratio > 0.0)) {
    throw NumericalError("non-positive return ratio; generator infeasible");
  }
  return std::log(ratio);
}

/// log(1 + grad phi(p) . (q - p)) - (phi(q) - phi(p))
template <Generator G>
double l_divergence(const G &g, const WeightVector &q, const WeightVector &p) {
  require_same_size(p, q);
  const double inv_n = 1.0 / static_cast<double>(p.size());
  double lin = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    lin += inv_n * g.slope(p[i]) * (q[i] - p[i]);
  }
  if (!(1.0 + lin > 0.0)) {
    throw NumericalError("non-positive argument in L-divergence");
  }
  return std::log1p(lin) - (phi(g, q) - phi(g, p));
}

/// (1/n) sum_k (l(v_k) - l(u_k))
template <Generator G>
double diversity_contribution(const G &g, const WeightVector &v,
                              const WeightVector &u) {
  require_same_size(u, v);
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    s += g.value(v[k]) - g.value(u[k]);
  }
  return s / static_cast<double>(u.size());
}

struct PathwiseDecomposition {
  std::vector<double> log_value;   // log V(t) from the product formula
  std::vector<double> diversity;   // phi(mu(t)) - phi(mu(0))
  std::vector<double> divergence;  // sum_{s<t} L_phi[mu(s+1):mu(s)]
};

template <Generator G>
PathwiseDecomposition pathwise_decomposition(const G &g,
                                             const std::vector<WeightVector> &market) {
  if (market.size() < 2) {
    throw InputError("market sequence needs at least two dates");
  }
  const std::size_t T = market.size();
  PathwiseDecomposition out;
  out.log_value.assign(T, 0.0);
  out.diversity.assign(T, 0.0);
  out.divergence.assign(T, 0.0);
  const double phi0 = phi(g, market[0]);
  for (std::size_t t = 1; t < T; ++t) {
    const auto &p = market[t - 1];
    const auto &q = market[t];
    require_same_size(p, q);
    const auto pi = portfolio_weights(g, p);
    double growth = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      growth += pi[i] * (q[i] / p[i]);
    }
    out.log_value[t] = out.log_value[t - 1] + std::log(growth);
    out.diversity[t] = phi(g, q) - phi0;
    out.divergence[t] = out.divergence[t - 1] + l_divergence(g, q, p);
  }
  return out;
}

struct FeasibilityReport {
  static constexpr double kTolerance = 1e-9;

  bool exp_concave_ok = true;
  bool beta_smooth_ok = true;
  bool endpoint_ok = true;
  bool monotone_ok = true;
  // largest constraint residual per family; <= 0 means satisfied with slack
  double exp_concave_worst = -std::numeric_limits<double>::infinity();
  double beta_smooth_worst = -std::numeric_limits<double>::infinity();
  double endpoint_worst = -std::numeric_limits<double>::infinity();
  double monotone_worst = -std::numeric_limits<double>::infinity();

  bool ok() const {
    return exp_concave_ok && beta_smooth_ok && endpoint_ok && monotone_ok;
  }
};

inline FeasibilityReport verify_membership(const GenVector &g, double beta,
                                           bool monotone,
                                           double tol = FeasibilityReport::kTolerance) {
  FeasibilityReport rep;
  const auto cons = build_constraints(g.partition(), beta, monotone);
  const double *l = g.values().data();
  auto update = [](double &worst, double v) {
    if (!std::isnan(worst) && (std::isnan(v) || v > worst)) {
      worst = v;
    }
  };
  for (const auto &c : cons) {
    const double v = c.value(l);
    switch (c.family) {
    case ConstraintFamily::exp_concave:
      update(rep.exp_concave_worst, v);
      break;
    case ConstraintFamily::beta_smooth:
      update(rep.beta_smooth_worst, v);
      break;
    case ConstraintFamily::endpoint:
      update(rep.endpoint_worst, v);
      break;
    case ConstraintFamily::monotone:
      update(rep.monotone_worst, v);
      break;
    }
  }
  rep.exp_concave_ok = rep.exp_concave_worst <= tol;
  rep.beta_smooth_ok = rep.beta_smooth_worst <= tol;
  rep.endpoint_ok = rep.endpoint_worst <= tol;
  rep.monotone_ok = rep.monotone_worst <= tol;
  return rep;
}

struct DeviationBounds {
  double lower;
  double upper;
};

/// Nominal range of pi_i/p_i - 1 for l in E_beta. The lower end holds;
/// the upper end beta/n^2 does not in general, see deviation_upper_corrected.
inline DeviationBounds deviation_bounds(double beta, std::size_t n) {
  if (!(beta > 0.0) || n < 2) {
    throw InputError("deviation_bounds needs beta > 0 and n >= 2");
  }
  const double nn = static_cast<double>(n);
  return {std::expm1(-2.0 * std::sqrt(beta) / nn), beta / (nn * nn)};
}

/// Upper end that does hold. The largest ratio sits at the smallest weight,
/// where pi/p - 1 = sum_j p_j (l'(p_min) - l'(p_j)) / n, and each difference
/// is at most min(beta (p_j - p_min), 2 sqrt(beta)).
/// l = -x^2/2 + 1/8 at p = (0.9, 0.1) reaches 0.36 against beta/n^2 = 0.25.
inline double deviation_upper_corrected(double beta, std::size_t n) {
  if (!(beta > 0.0) || n < 2) {
    throw InputError("deviation_upper_corrected needs beta > 0 and n >= 2");
  }
  return std::min(beta, 2.0 * std::sqrt(beta)) / static_cast<double>(n);
}

} // namespace fgp
