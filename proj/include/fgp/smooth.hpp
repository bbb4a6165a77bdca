#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"
#include "genfun.hpp"
#include "generator.hpp"

namespace fgp {

struct SmoothingConfig {
  double alpha = 0.9;
  double M = 1.0;
  std::size_t sample_density = 64;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw InputError("smoothing needs 0 < alpha < 1");
    }
    if (!(M > 0.0) || sample_density < 2) {
      throw InputError("smoothing needs M > 0 and sample_density >= 2");
    }
  }
};

/// s(x) = a + b t + c t^2 with t = x - lo on [lo, hi).
struct SmoothPiece {
  double lo;
  double hi;
  double a;
  double b;
  double c;
  bool quadratic;

  double s(double x) const {
    const double t = x - lo;
    return a + t * (b + t * c);
  }
  double ds(double x) const { return b + 2.0 * c * (x - lo); }
  double dds() const { return 2.0 * c; }
};

/// l_{alpha,P}(x) = log(s(x) + dmin^alpha) + shift, with s the piecewise
/// quadratic smoothing of the interpolant of exp(l) over the partition.
class CertifiedGenerator {
public:
  CertifiedGenerator(GenVector base, std::vector<SmoothPiece> pieces,
                     double alpha)
      : base_(std::move(base)), pieces_(std::move(pieces)), alpha_(alpha) {
    bump_ = std::pow(base_.partition().min_mesh(), alpha_);
    shift_ = -std::log(s(0.5) + bump_);
  }

  const GenVector &base() const { return base_; }
  const std::vector<SmoothPiece> &pieces() const { return pieces_; }
  double alpha() const { return alpha_; }
  double shift() const { return shift_; }
  /// dmin^alpha, the additive lift inside the logarithm.
  double bump() const { return bump_; }

  /// Piece owning x; pieces are half-open on the right, the last owns 1.
  std::size_t piece(double x) const {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw InputError("evaluation point outside [0,1]");
    }
    auto it = std::upper_bound(
        pieces_.begin(), pieces_.end(), x,
        [](double v, const SmoothPiece &p) { return v < p.lo; });
    const std::size_t k = static_cast<std::size_t>(it - pieces_.begin());
    return k == 0 ? 0 : k - 1;
  }

  double s(double x) const { return pieces_[piece(x)].s(x); }

  double value(double x) const { return std::log(s(x) + bump_) + shift_; }

  double slope(double x) const { return slope_on(piece(x), x); }

  double curvature(double x) const { return curvature_on(piece(x), x); }

  /// One-sided derivatives using the formula of piece k at x.
  double slope_on(std::size_t k, double x) const {
    const auto &p = pieces_[k];
    return p.ds(x) / (p.s(x) + bump_);
  }

  double curvature_on(std::size_t k, double x) const {
    const auto &p = pieces_[k];
    const double S = p.s(x) + bump_;
    const double q = p.ds(x) / S;
    return p.dds() / S - q * q;
  }

private:
  GenVector base_;
  std::vector<SmoothPiece> pieces_;
  double alpha_;
  double bump_ = 0.0;
  double shift_ = 0.0;
};

inline CertifiedGenerator build_smoother(const GenVector &g,
                                         const SmoothingConfig &cfg) {
  cfg.validate();
  const Partition &P = g.partition();
  if (!P.almost_uniform(cfg.M)) {
    throw InputError("partition is not almost uniform for the given M");
  }
  const auto feas = verify_membership(g, std::numeric_limits<double>::max(), false);
  if (!feas.exp_concave_ok) {
    throw InputError("generator violates exponential concavity");
  }
  const std::size_t d = P.size();
  const double dm = P.min_mesh();
  std::vector<double> f(d), m(d - 1);
  for (std::size_t i = 0; i < d; ++i) {
    f[i] = std::exp(g[i]);
  }
  for (std::size_t k = 0; k + 1 < d; ++k) {
    m[k] = (f[k + 1] - f[k]) / P.spacing(k);
  }
  std::vector<SmoothPiece> pieces;
  auto affine = [&](std::size_t k, double lo, double hi) {
    if (hi - lo > 1e-15) {
      pieces.push_back({lo, hi, f[k] + m[k] * (lo - P[k]), m[k], 0.0, false});
    }
  };
  affine(0, 0.0, d > 2 ? P[1] - 0.5 * dm : 1.0);
  for (std::size_t i = 1; i + 1 < d; ++i) {
    const double lo = P[i] - 0.5 * dm;
    // f(x_i - dmin) lies on segment i-1, f(x_i + dmin) on segment i
    pieces.push_back({lo, P[i] + 0.5 * dm, f[i] - 0.5 * m[i - 1] * dm,
                      m[i - 1], 0.5 * (m[i] - m[i - 1]) / dm, true});
    const double next = i + 2 < d ? P[i + 1] - 0.5 * dm : 1.0;
    affine(i, P[i] + 0.5 * dm, next);
  }
  return CertifiedGenerator(g, std::move(pieces), cfg.alpha);
}

struct CertificationReport {
  double beta = 0.0;
  double min_curvature = std::numeric_limits<double>::infinity();
  double max_curvature = -std::numeric_limits<double>::infinity();
  double min_curvature_at = 0.0;
  double max_curvature_at = 0.0;
  double max_abs_slope = 0.0;
  double max_c1_gap = 0.0;    // derivative mismatch at junctions
  double max_c0_gap = 0.0;    // value mismatch at junctions
  double max_leading = -std::numeric_limits<double>::infinity(); // max c
  double max_slope_rise = 0.0; // s' increase across junctions
  double value_at_half = 0.0;
  std::vector<std::size_t> failing_pieces;
  bool curvature_ok = false;
  bool c1_ok = false;
  bool exp_concave_ok = false;
  bool slope_ok = false;

  bool ok() const { return curvature_ok && c1_ok && exp_concave_ok; }
};

namespace detail {

/// Critical points of l'' on a quadratic piece, in local t = x - lo:
/// s' = 0, or c^2 t^2 + b c t + b^2 - 3 c (a + bump) = 0.
inline std::vector<double> curvature_critical_points(const SmoothPiece &p,
                                                     double bump) {
  std::vector<double> out;
  if (p.c == 0.0) {
    return out;
  }
  out.push_back(-p.b / (2.0 * p.c));
  const double A = p.c * p.c, B = p.b * p.c,
               C = p.b * p.b - 3.0 * p.c * (p.a + bump);
  const double disc = B * B - 4.0 * A * C;
  if (disc >= 0.0) {
    const double r = std::sqrt(disc);
    out.push_back((-B + r) / (2.0 * A));
    out.push_back((-B - r) / (2.0 * A));
  }
  for (double &t : out) {
    t += p.lo;
  }
  return out;
}

} // namespace detail

inline CertificationReport certify_membership(const CertifiedGenerator &c,
                                              double beta,
                                              const SmoothingConfig &cfg) {
  constexpr double kCurvatureTol = 1e-8;
  constexpr double kC1Tol = 1e-10;
  CertificationReport rep;
  rep.beta = beta;
  const auto &pieces = c.pieces();
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const auto &p = pieces[k];
    std::vector<double> xs;
    for (std::size_t j = 0; j <= cfg.sample_density; ++j) {
      xs.push_back(p.lo + (p.hi - p.lo) * static_cast<double>(j) /
                              static_cast<double>(cfg.sample_density));
    }
    for (double x : detail::curvature_critical_points(p, c.bump())) {
      if (x > p.lo && x < p.hi) {
        xs.push_back(x);
      }
    }
    bool fail = false;
    for (double x : xs) {
      const double q = c.curvature_on(k, x);
      if (q < rep.min_curvature) {
        rep.min_curvature = q;
        rep.min_curvature_at = x;
      }
      if (q > rep.max_curvature) {
        rep.max_curvature = q;
        rep.max_curvature_at = x;
      }
      fail = fail || q < -beta - kCurvatureTol || q > kCurvatureTol ||
             std::isnan(q);
      rep.max_abs_slope = std::max(rep.max_abs_slope, std::abs(c.slope_on(k, x)));
    }
    if (fail) {
      rep.failing_pieces.push_back(k);
    }
    rep.max_leading = std::max(rep.max_leading, p.c);
    if (k + 1 < pieces.size()) {
      const auto &q = pieces[k + 1];
      const double x = q.lo;
      rep.max_c1_gap = std::max(rep.max_c1_gap,
                                std::abs(c.slope_on(k, x) - c.slope_on(k + 1, x)));
      rep.max_c0_gap = std::max(rep.max_c0_gap, std::abs(p.s(x) - q.s(x)));
      rep.max_slope_rise = std::max(rep.max_slope_rise, q.ds(x) - p.ds(x));
    }
  }
  rep.value_at_half = c.value(0.5);
  rep.curvature_ok = rep.failing_pieces.empty();
  rep.c1_ok = rep.max_c1_gap <= kC1Tol;
  rep.exp_concave_ok = rep.max_leading <= kCurvatureTol &&
                       rep.max_slope_rise <= kC1Tol;
  rep.slope_ok = rep.max_abs_slope <= std::sqrt(beta) + kCurvatureTol;
  return rep;
}

/// sup |l'_{alpha,P} - l_hat'| over a dense sample; on each base segment
/// l_hat' is that segment's slope, endpoints included as one-sided limits.
inline double derivative_gap(const CertifiedGenerator &c, const GenVector &g,
                             const SmoothingConfig &cfg) {
  const Partition &P = g.partition();
  double gap = 0.0;
  for (std::size_t k = 0; k + 1 < P.size(); ++k) {
    const double sk = g.segment_slope(k);
    for (std::size_t j = 0; j <= cfg.sample_density; ++j) {
      const double x = P[k] + P.spacing(k) * static_cast<double>(j) /
                                  static_cast<double>(cfg.sample_density);
      gap = std::max(gap, std::abs(c.slope(x) - sk));
    }
    // junctions of the smoother inside this segment
    for (const auto &p : c.pieces()) {
      if (p.lo > P[k] && p.lo < P[k + 1]) {
        gap = std::max(gap, std::abs(c.slope(p.lo) - sk));
      }
    }
  }
  return gap;
}

/// Explicit bound K dmin^alpha on the derivative gap, summing the three
/// component estimates (log f vs l_hat, log s vs log f, lift).
inline double derivative_gap_bound(double beta, double M, double alpha,
                                   double dmin) {
  const double sb = std::sqrt(beta);
  const double e1 = 0.5 * std::exp(sb) * beta * (M + 1.0) * dmin;
  const double e2 = 2.0 * beta * (1.0 + std::exp(sb)) * (M + 1.0) *
                    (std::exp(0.5 * sb) * dmin + sb * std::exp(2.0 * sb) * dmin * dmin);
  const double e3 = 2.0 * sb * std::exp(2.0 * sb) *
                    (std::pow(dmin, alpha) +
                     sb * (1.0 + std::exp(-sb)) * (M + 1.0) * std::pow(dmin, 1.0 + alpha));
  return e1 + e2 + e3;
}

} // namespace fgp
