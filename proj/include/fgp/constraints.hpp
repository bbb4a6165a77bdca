#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "partition.hpp"

namespace fgp {

enum class ConstraintFamily { exp_concave, beta_smooth, endpoint, monotone };

/// One constraint g(l) <= 0 touching the three node values l[j0..j0+2].
struct LocalConstraint {
  enum class Kind {
    affine,   // c . l + offset
    exp_chord, // -l1 + log(w e^{l2} + (1 - w) e^{l0})
    squared   // (c . l)^2 + offset
  };

  ConstraintFamily family;
  Kind kind;
  std::size_t j0;
  std::array<double, 3> c{0.0, 0.0, 0.0};
  double offset = 0.0;
  double w = 0.0;

  double value(const double *l) const {
    const double a = l[j0], b = l[j0 + 1];
    switch (kind) {
    case Kind::affine:
      return c[0] * a + c[1] * b + c[2] * l[j0 + 2] + offset;
    case Kind::squared: {
      const double t = c[0] * a + c[1] * b + c[2] * l[j0 + 2];
      return t * t + offset;
    }
    case Kind::exp_chord: {
      const double z = l[j0 + 2];
      const double m = std::max(a, z);
      return -b + m + std::log(w * std::exp(z - m) + (1.0 - w) * std::exp(a - m));
    }
    }
    return 0.0;
  }

  /// Local gradient and Hessian with respect to l[j0..j0+2].
  void derivatives(const double *l, std::array<double, 3> &grad,
                   std::array<std::array<double, 3>, 3> &hess) const {
    for (auto &row : hess) {
      row.fill(0.0);
    }
    switch (kind) {
    case Kind::affine:
      grad = c;
      return;
    case Kind::squared: {
      const double t = c[0] * l[j0] + c[1] * l[j0 + 1] + c[2] * l[j0 + 2];
      for (int i = 0; i < 3; ++i) {
        grad[i] = 2.0 * t * c[i];
        for (int j = 0; j < 3; ++j) {
          hess[i][j] = 2.0 * c[i] * c[j];
        }
      }
      return;
    }
    case Kind::exp_chord: {
      const double a = l[j0], z = l[j0 + 2];
      // share of the right neighbour in the chord
      const double p = 1.0 / (1.0 + (1.0 - w) / w * std::exp(a - z));
      grad = {1.0 - p, -1.0, p};
      const double h = p * (1.0 - p);
      hess[0][0] = h;
      hess[2][2] = h;
      hess[0][2] = -h;
      hess[2][0] = -h;
      return;
    }
    }
  }
};

/// The constraint list of the discretized problem, 0-based node indices.
inline std::vector<LocalConstraint>
build_constraints(const Partition &P, double beta, bool monotone) {
  using K = LocalConstraint::Kind;
  const std::size_t d = P.size();
  std::vector<LocalConstraint> out;
  for (std::size_t i = 1; i + 1 < d; ++i) {
    LocalConstraint g{ConstraintFamily::exp_concave, K::exp_chord, i - 1};
    g.w = (P[i] - P[i - 1]) / (P[i + 1] - P[i - 1]);
    out.push_back(g);
  }
  for (std::size_t i = 0; i + 2 < d; ++i) {
    const double a = 1.0 / P.spacing(i), b = 1.0 / P.spacing(i + 1);
    LocalConstraint g{ConstraintFamily::beta_smooth, K::affine, i};
    g.c = {-a, a + b, -b};
    g.offset = -0.5 * beta * (P[i + 2] - P[i]);
    out.push_back(g);
  }
  {
    const double a = 1.0 / P.spacing(0);
    LocalConstraint g{ConstraintFamily::endpoint, K::squared, 0};
    g.c = {-a, a, 0.0};
    g.offset = -beta;
    out.push_back(g);
    // written on the window [d-3, d-1] so that j0 + 2 stays in range
    const double b = 1.0 / P.spacing(d - 2);
    LocalConstraint h{ConstraintFamily::endpoint, K::squared, d - 3};
    h.c = {0.0, -b, b};
    h.offset = -beta;
    out.push_back(h);
  }
  if (monotone) {
    for (std::size_t k = 0; k + 1 < d; ++k) {
      const double a = 1.0 / P.spacing(k);
      // windows must fit inside [0, d-1]
      const std::size_t j0 = std::min(k, d - 3);
      LocalConstraint g{ConstraintFamily::monotone, K::affine, j0};
      g.c[k - j0] = a;
      g.c[k - j0 + 1] = -a;
      out.push_back(g);
    }
    for (std::size_t k = 0; k + 2 < d; ++k) {
      const double a = P[k] / P.spacing(k), b = P[k + 1] / P.spacing(k + 1);
      LocalConstraint g{ConstraintFamily::monotone, K::affine, k};
      g.c = {-a, a + b, -b};
      out.push_back(g);
    }
  }
  return out;
}

} // namespace fgp
