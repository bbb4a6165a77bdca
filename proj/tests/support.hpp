#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fgp/genfun.hpp"
#include "fgp/generator.hpp"
#include "fgp/measure.hpp"
#include "fgp/simplex.hpp"

namespace fgp::testing {

using Rng = std::mt19937_64;

inline WeightVector random_weights(std::size_t n, Rng &rng, double spread = 1.0) {
  std::normal_distribution<double> z(0.0, spread);
  std::vector<double> w(n);
  for (auto &x : w) {
    x = std::exp(z(rng));
  }
  return WeightVector::normalized(w);
}

inline OrderedWeightVector random_ordered(std::size_t n, Rng &rng,
                                          double spread = 1.0) {
  auto w = random_weights(n, rng, spread).entries();
  std::sort(w.begin(), w.end(), std::greater<>());
  return OrderedWeightVector(w);
}

/// One step of multiplicative noise.
inline WeightVector perturb(const WeightVector &p, double sigma, Rng &rng) {
  std::normal_distribution<double> z(0.0, sigma);
  std::vector<double> w(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    w[i] = p[i] * std::exp(z(rng));
  }
  return WeightVector::normalized(w);
}

inline std::vector<WeightVector> random_market(std::size_t n, std::size_t steps,
                                               double sigma, Rng &rng) {
  std::vector<WeightVector> mu{random_weights(n, rng)};
  for (std::size_t t = 0; t < steps; ++t) {
    mu.push_back(perturb(mu.back(), sigma, rng));
  }
  return mu;
}

/// Rank-based measure with atoms (u, r), r a perturbation of e-bar.
inline EmpiricalMeasure random_measure(std::size_t n, std::size_t atoms,
                                       double sigma, Rng &rng,
                                       double spread = 1.0) {
  std::vector<Atom> a;
  for (std::size_t s = 0; s < atoms; ++s) {
    a.push_back(Atom{random_ordered(n, rng, spread),
                     perturb(WeightVector::uniform(n), sigma, rng)});
  }
  std::uniform_real_distribution<double> U(0.5, 1.5);
  std::vector<double> w(atoms);
  double total = 0.0;
  for (auto &x : w) {
    x = U(rng);
    total += x;
  }
  for (auto &x : w) {
    x /= total;
  }
  return EmpiricalMeasure(std::move(a), std::move(w));
}

/// Random member of E_beta: a log-affine mixture with curvature at most beta.
inline std::vector<analytic::LogAffineTerm> random_mixture_terms(double beta,
                                                                 Rng &rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> K(1, 3);
  const int k = K(rng);
  std::vector<analytic::LogAffineTerm> terms;
  std::vector<double> c(static_cast<std::size_t>(k));
  double total = 0.0;
  for (auto &x : c) {
    x = 0.05 + U(rng);
    total += x;
  }
  const double mass = 0.2 + 0.8 * U(rng);
  for (int i = 0; i < k; ++i) {
    const double ci = mass * c[static_cast<std::size_t>(i)] / total;
    // curvature share ci/a^2 <= beta * ci / mass, so the sum stays <= beta
    const double amin = std::sqrt(mass / beta);
    const double a = amin * (1.0 + 3.0 * U(rng));
    terms.push_back({ci, a, U(rng) < 0.5});
  }
  return terms;
}

inline AnalyticGenerator random_analytic(double beta, Rng &rng) {
  return analytic::log_affine_mixture(random_mixture_terms(beta, rng));
}

/// Node samples of a random member of E_beta; feasible for the discrete
/// constraints since sampling keeps chords and secant slopes in range.
inline GenVector random_feasible(const Partition &P, double beta, Rng &rng) {
  return sample_on(P, random_analytic(beta, rng));
}

/// c log(a + x), rising and concave with x l'(x) increasing.
inline GenVector rising_log(const Partition &P, double c, double a) {
  return sample_on(P, analytic::log_affine_mixture({{c, a, true}}));
}

} // namespace fgp::testing
