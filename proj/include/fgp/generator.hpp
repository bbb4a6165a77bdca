#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "partition.hpp"

namespace fgp {

/// Anything with l(x) and l'(x) on [0,1].
template <typename G>
concept Generator = requires(const G &g, double x) {
  { g.value(x) } -> std::convertible_to<double>;
  { g.slope(x) } -> std::convertible_to<double>;
};

/// Node values of a discretized generating function. The piecewise-affine
/// extension uses the right-segment slope at nodes (left slope at x = 1).
class GenVector {
public:
  GenVector() = default;

  GenVector(Partition partition, std::vector<double> values)
      : p_(std::move(partition)), v_(std::move(values)) {
    if (v_.size() != p_.size()) {
      throw InputError("generator has " + std::to_string(v_.size()) +
                       " values for " + std::to_string(p_.size()) + " nodes");
    }
    double &h = v_[p_.half_index()];
    if (std::abs(h) > 1e-12) {
      throw InputError("generator value at 1/2 must be 0");
    }
    h = 0.0;
  }

  static GenVector zero(const Partition &p) {
    return GenVector(p, std::vector<double>(p.size(), 0.0));
  }

  const Partition &partition() const { return p_; }
  const std::vector<double> &values() const { return v_; }
  std::size_t size() const { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }

  double segment_slope(std::size_t k) const {
    return (v_[k + 1] - v_[k]) / p_.spacing(k);
  }

  std::vector<double> slopes() const {
    std::vector<double> s(v_.size() - 1);
    for (std::size_t k = 0; k < s.size(); ++k) {
      s[k] = segment_slope(k);
    }
    return s;
  }

  double value(double x) const {
    const std::size_t k = p_.segment(x);
    return v_[k] + segment_slope(k) * (x - p_[k]);
  }

  double slope(double x) const { return segment_slope(p_.segment(x)); }

  bool operator==(const GenVector &o) const = default;

private:
  Partition p_;
  std::vector<double> v_;
};

/// Closed-form generator; used as an oracle and as a backtest rule.
class AnalyticGenerator {
public:
  AnalyticGenerator(std::function<double(double)> eval,
                    std::function<double(double)> deriv, std::string label)
      : eval_(std::move(eval)), deriv_(std::move(deriv)),
        label_(std::move(label)) {
    if (std::abs(eval_(0.5)) > 1e-12) {
      throw InputError("analytic generator " + label_ +
                       " must vanish at 1/2");
    }
  }

  double value(double x) const { return eval_(x); }
  double slope(double x) const { return deriv_(x); }
  const std::string &label() const { return label_; }

private:
  std::function<double(double)> eval_;
  std::function<double(double)> deriv_;
  std::string label_;
};

/// Node values of g on p, shifted so the value at 1/2 is exactly 0.
template <Generator G> GenVector sample_on(const Partition &p, const G &g) {
  std::vector<double> v(p.size());
  const double c = g.value(0.5);
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = g.value(p[i]) - c;
  }
  v[p.half_index()] = 0.0;
  return GenVector(p, std::move(v));
}

namespace analytic {

/// l = 0, the market portfolio.
inline AnalyticGenerator market() {
  return AnalyticGenerator([](double) { return 0.0; },
                           [](double) { return 0.0; }, "market");
}

/// l = lambda log(2x); mixes market and equal weights. Not in any E_beta.
inline AnalyticGenerator log_scaled(double lambda) {
  return AnalyticGenerator(
      [lambda](double x) { return lambda * std::log(2.0 * x); },
      [lambda](double x) { return lambda / x; },
      "log_scaled(" + std::to_string(lambda) + ")");
}

/// l = -x^2/2 + 1/8.
inline AnalyticGenerator neg_quadratic() {
  return AnalyticGenerator([](double x) { return -0.5 * x * x + 0.125; },
                           [](double x) { return -x; }, "neg_quadratic");
}

/// l = log(a + x) - log(a + 1/2); beta-smooth with beta = 1/a^2.
inline AnalyticGenerator log_shift(double a) {
  if (!(a > 0.0)) {
    throw InputError("log_shift needs a > 0");
  }
  return AnalyticGenerator(
      [a](double x) { return std::log(a + x) - std::log(a + 0.5); },
      [a](double x) { return 1.0 / (a + x); },
      "log_shift(" + std::to_string(a) + ")");
}

/// One factor c log(a + x) (rising) or c log(a + 1 - x) (falling).
struct LogAffineTerm {
  double c;
  double a;
  bool rising;
};

/// sum_k c_k log(h_k(x)) with h_k affine and positive on [0,1]. When
/// sum c_k <= 1 the exponential is a weighted geometric mean of concave
/// functions, hence concave; |l''| <= sum c_k / a_k^2.
inline AnalyticGenerator log_affine_mixture(std::vector<LogAffineTerm> terms) {
  double total = 0.0;
  for (const auto &t : terms) {
    if (!(t.c >= 0.0) || !(t.a > 0.0)) {
      throw InputError("mixture terms need c >= 0 and a > 0");
    }
    total += t.c;
  }
  if (total > 1.0 + 1e-12) {
    throw InputError("mixture exponents must sum to at most 1");
  }
  auto raw = [terms](double x) {
    double s = 0.0;
    for (const auto &t : terms) {
      s += t.c * std::log(t.a + (t.rising ? x : 1.0 - x));
    }
    return s;
  };
  const double c = raw(0.5);
  return AnalyticGenerator(
      [raw, c](double x) { return raw(x) - c; },
      [terms](double x) {
        double s = 0.0;
        for (const auto &t : terms) {
          s += t.rising ? t.c / (t.a + x) : -t.c / (t.a + 1.0 - x);
        }
        return s;
      },
      "log_affine_mixture");
}

inline double mixture_beta(const std::vector<LogAffineTerm> &terms) {
  double b = 0.0;
  for (const auto &t : terms) {
    b += t.c / (t.a * t.a);
  }
  return b;
}

} // namespace analytic
} // namespace fgp
