#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "generator.hpp"
#include "measure.hpp"
#include "partition.hpp"
#include "rules.hpp"

namespace fgp {

struct RegularizerSpec {
  enum class Kind {
    none,
    l2_derivative,       // integral of l'^2
    reference_deviation, // integral of (l' - l0')^2
    portfolio_distance   // mean over atoms of |pi(u) - target(u)|^2
  };

  Kind kind = Kind::none;
  std::optional<GenVector> reference;
  std::optional<WeightRule> target;

  static RegularizerSpec none() { return {}; }
  static RegularizerSpec l2_derivative() {
    RegularizerSpec r;
    r.kind = Kind::l2_derivative;
    return r;
  }
  static RegularizerSpec reference_deviation(GenVector ref) {
    RegularizerSpec r;
    r.kind = Kind::reference_deviation;
    r.reference = std::move(ref);
    return r;
  }
  static RegularizerSpec portfolio_distance(WeightRule target) {
    RegularizerSpec r;
    r.kind = Kind::portfolio_distance;
    r.target = std::move(target);
    return r;
  }

  /// True when the penalty does not depend on the measure's atoms.
  bool atom_free() const { return kind != Kind::portfolio_distance; }
};

struct ProblemSpec {
  EmpiricalMeasure measure;
  Partition partition;
  double beta = 1.0;
  double eta0 = 0.0;
  double eta1 = 1.0;
  double lambda = 0.0;
  RegularizerSpec regularizer;
  bool monotone = false;

  void validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
      throw InputError("beta must be positive");
    }
    if (!(eta1 > 0.0) || !std::isfinite(eta0) || !std::isfinite(eta1)) {
      throw InputError("eta1 must be positive and eta0 finite");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw InputError("lambda must be non-negative");
    }
    if (!measure.rank_based()) {
      throw InputError("optimization needs a rank-based measure");
    }
    if (regularizer.kind == RegularizerSpec::Kind::reference_deviation &&
        (!regularizer.reference ||
         !(regularizer.reference->partition() == partition))) {
      throw InputError("reference generator must live on the problem grid");
    }
    if (regularizer.kind == RegularizerSpec::Kind::portfolio_distance &&
        !regularizer.target) {
      throw InputError("portfolio_distance needs a target rule");
    }
  }
};

struct EtaWeights {
  double eta0;
  double eta1;
};

/// Weights w0 on the diversity part and w1 on the divergence part of the
/// decomposition become eta0 = w0 - w1, eta1 = w1.
inline EtaWeights eta_from_decomposition_weights(double w0, double w1) {
  return {w0 - w1, w1};
}

/// Sparse linear form over node values.
struct SparseRow {
  std::vector<std::pair<std::size_t, double>> terms;

  double dot(const double *l) const {
    double s = 0.0;
    for (const auto &[j, c] : terms) {
      s += c * l[j];
    }
    return s;
  }

  void add(std::size_t j, double c) { terms.emplace_back(j, c); }

  void add(const SparseRow &o, double scale) {
    for (const auto &[j, c] : o.terms) {
      terms.emplace_back(j, c * scale);
    }
  }

  /// Merge duplicate indices and drop exact zeros.
  void compress() {
    std::sort(terms.begin(), terms.end(),
              [](const auto &a, const auto &b) { return a.first < b.first; });
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto &t : terms) {
      if (!out.empty() && out.back().first == t.first) {
        out.back().second += t.second;
      } else {
        out.push_back(t);
      }
    }
    std::erase_if(out, [](const auto &t) { return t.second == 0.0; });
    terms = std::move(out);
  }
};

/// l_hat'(x) as a row over node values.
inline SparseRow slope_row(const Partition &P, double x) {
  const std::size_t k = P.segment(x);
  const double inv = 1.0 / P.spacing(k);
  SparseRow r;
  r.add(k, -inv);
  r.add(k + 1, inv);
  return r;
}

/// l_hat(x) as a row over node values.
inline SparseRow value_row(const Partition &P, double x) {
  const std::size_t k = P.segment(x);
  const double t = (x - P[k]) / P.spacing(k);
  SparseRow r;
  r.add(k, 1.0 - t);
  r.add(k + 1, t);
  return r;
}

/// J_hat in closed form over the node values: per atom the return ratio is
/// 1 + a_s . l and the diversity term is b_s . l; the penalty is the
/// quadratic l'Ql + q'l + q0.
class ObjectiveModel {
public:
  explicit ObjectiveModel(const ProblemSpec &spec)
      : eta0_(spec.eta0), eta1_(spec.eta1), lambda_(spec.lambda) {
    spec.validate();
    const Partition &P = spec.partition;
    const std::size_t d = P.size();
    const auto &mu = spec.measure;
    const double inv_n = 1.0 / static_cast<double>(mu.dimension());
    w_ = mu.weights();
    for (std::size_t s = 0; s < mu.size(); ++s) {
      const auto &u = mu.atom(s).first;
      const auto v = aitchison_add(u, mu.atom(s).second);
      SparseRow a, b;
      for (std::size_t i = 0; i < u.size(); ++i) {
        a.add(slope_row(P, u[i]), inv_n * (v[i] - u[i]));
        b.add(value_row(P, v[i]), inv_n);
        b.add(value_row(P, u[i]), -inv_n);
      }
      a.compress();
      b.compress();
      a_.push_back(std::move(a));
      b_.push_back(std::move(b));
    }
    Q_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    q_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    q0_ = 0.0;
    build_penalty(spec);
  }

  std::size_t atoms() const { return a_.size(); }
  const SparseRow &return_row(std::size_t s) const { return a_[s]; }
  const SparseRow &diversity_row(std::size_t s) const { return b_[s]; }

  bool in_domain(const double *l) const {
    for (const auto &a : a_) {
      if (!(1.0 + a.dot(l) > 0.0)) {
        return false;
      }
    }
    return true;
  }

  double penalty(const double *l) const {
    Eigen::Map<const Eigen::VectorXd> x(l, q_.size());
    return x.dot(Q_ * x) + q_.dot(x) + q0_;
  }

  /// J_hat(l); -infinity outside the log domain.
  double value(const double *l) const {
    double j = 0.0;
    for (std::size_t s = 0; s < a_.size(); ++s) {
      const double ratio = 1.0 + a_[s].dot(l);
      if (!(ratio > 0.0)) {
        return -std::numeric_limits<double>::infinity();
      }
      j += w_[s] * (eta0_ * b_[s].dot(l) + eta1_ * std::log(ratio));
    }
    if (lambda_ != 0.0) {
      j -= lambda_ * penalty(l);
    }
    return j;
  }

  /// Adds the gradient and Hessian of J_hat at l into g and H.
  void add_derivatives(const double *l, Eigen::VectorXd &g,
                       Eigen::MatrixXd &H) const {
    for (std::size_t s = 0; s < a_.size(); ++s) {
      const double ratio = 1.0 + a_[s].dot(l);
      const double c = w_[s] * eta1_ / ratio;
      const double h = c / ratio;
      for (const auto &[j, cj] : a_[s].terms) {
        g[static_cast<Eigen::Index>(j)] += c * cj;
        for (const auto &[k, ck] : a_[s].terms) {
          H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) -= h * cj * ck;
        }
      }
      for (const auto &[j, cj] : b_[s].terms) {
        g[static_cast<Eigen::Index>(j)] += w_[s] * eta0_ * cj;
      }
    }
    if (lambda_ != 0.0) {
      Eigen::Map<const Eigen::VectorXd> x(l, q_.size());
      g -= lambda_ * (2.0 * (Q_ * x) + q_);
      H -= 2.0 * lambda_ * Q_;
    }
  }

private:
  // sum of weight * (row . l - y)^2
  void add_square(const SparseRow &row, double y, double weight) {
    for (const auto &[j, cj] : row.terms) {
      q_[static_cast<Eigen::Index>(j)] -= 2.0 * weight * y * cj;
      for (const auto &[k, ck] : row.terms) {
        Q_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) += weight * cj * ck;
      }
    }
    q0_ += weight * y * y;
  }

  void build_penalty(const ProblemSpec &spec) {
    const Partition &P = spec.partition;
    using K = RegularizerSpec::Kind;
    switch (spec.regularizer.kind) {
    case K::none:
      return;
    case K::l2_derivative:
    case K::reference_deviation:
      for (std::size_t k = 0; k + 1 < P.size(); ++k) {
        SparseRow r;
        r.add(k, -1.0 / P.spacing(k));
        r.add(k + 1, 1.0 / P.spacing(k));
        const double y = spec.regularizer.kind == K::reference_deviation
                             ? spec.regularizer.reference->segment_slope(k)
                             : 0.0;
        add_square(r, y, P.spacing(k));
      }
      return;
    case K::portfolio_distance: {
      const auto &mu = spec.measure;
      const double inv_n = 1.0 / static_cast<double>(mu.dimension());
      for (std::size_t s = 0; s < mu.size(); ++s) {
        const auto &u = mu.atom(s).first;
        const auto target = spec.regularizer.target->apply(u);
        SparseRow mean;
        for (std::size_t j = 0; j < u.size(); ++j) {
          mean.add(slope_row(P, u[j]), u[j]);
        }
        for (std::size_t i = 0; i < u.size(); ++i) {
          SparseRow r = slope_row(P, u[i]);
          r.add(mean, -1.0);
          for (auto &t : r.terms) {
            t.second *= u[i] * inv_n;
          }
          r.compress();
          add_square(r, target[i] - u[i], mu.weight(s));
        }
      }
      return;
    }
    }
  }

  std::vector<double> w_;
  std::vector<SparseRow> a_, b_;
  double eta0_, eta1_, lambda_;
  Eigen::MatrixXd Q_;
  Eigen::VectorXd q_;
  double q0_;
};

inline void require_grid(const GenVector &g, const ProblemSpec &spec) {
  if (!(g.partition() == spec.partition)) {
    throw InputError("generator does not live on the problem grid");
  }
}

/// J_hat = sum_s w_s [eta0 D + eta1 L] - lambda R_hat.
inline double objective_value(const GenVector &g, const ProblemSpec &spec) {
  require_grid(g, spec);
  const double j = ObjectiveModel(spec).value(g.values().data());
  if (!std::isfinite(j)) {
    throw NumericalError("generator leaves the log domain of the objective");
  }
  return j;
}

inline double regularizer_value(const GenVector &g, const ProblemSpec &spec) {
  require_grid(g, spec);
  return ObjectiveModel(spec).penalty(g.values().data());
}

/// max over segments of |slope difference|.
inline double solution_deviation(const GenVector &g, const GenVector &ref) {
  if (!(g.partition() == ref.partition())) {
    throw InputError("solution_deviation needs a common partition");
  }
  double m = 0.0;
  for (std::size_t k = 0; k + 1 < g.size(); ++k) {
    m = std::max(m, std::abs(g.segment_slope(k) - ref.segment_slope(k)));
  }
  return m;
}

} // namespace fgp
