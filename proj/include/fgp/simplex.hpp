#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "error.hpp"

namespace fgp {

/// A point of the open simplex. Entries are renormalized on construction.
class WeightVector {
public:
  static constexpr double kMinEntry = 1e-14;
  static constexpr double kMaxRenormShift = 1e-6;

  WeightVector() = default;

  explicit WeightVector(std::vector<double> entries) : w_(std::move(entries)) {
    if (w_.size() < 2) {
      throw InputError("weight vector needs n >= 2 entries");
    }
    double total = 0.0;
    for (double x : w_) {
      if (!std::isfinite(x) || x <= kMinEntry) {
        throw InputError("weight entry not positive: " + std::to_string(x));
      }
      total += x;
    }
    for (double &x : w_) {
      const double y = x / total;
      if (std::abs(y - x) > kMaxRenormShift) {
        throw InputError("weights do not sum to one (sum " +
                         std::to_string(total) + ")");
      }
      x = y;
    }
  }

  /// Normalize an arbitrary positive vector, e.g. capitalizations.
  static WeightVector normalized(const std::vector<double> &positive) {
    double total = 0.0;
    for (double x : positive) {
      total += x;
    }
    std::vector<double> w(positive.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = positive[i] / total;
    }
    return WeightVector(std::move(w));
  }

  static WeightVector uniform(std::size_t n) {
    return WeightVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  const std::vector<double> &entries() const { return w_; }
  auto begin() const { return w_.begin(); }
  auto end() const { return w_.end(); }

  bool operator==(const WeightVector &other) const = default;

private:
  std::vector<double> w_;
};

/// A point of the ordered simplex, u_1 >= ... >= u_n.
class OrderedWeightVector : public WeightVector {
public:
  OrderedWeightVector() = default;

  explicit OrderedWeightVector(std::vector<double> entries)
      : WeightVector(std::move(entries)) {
    check();
  }

  explicit OrderedWeightVector(const WeightVector &w) : WeightVector(w) {
    check();
  }

private:
  void check() const {
    for (std::size_t i = 1; i < size(); ++i) {
      if ((*this)[i] > (*this)[i - 1]) {
        throw InputError("ordered weights must be non-increasing");
      }
    }
  }
};

inline void require_same_size(const WeightVector &a, const WeightVector &b) {
  if (a.size() != b.size()) {
    throw InputError("dimension mismatch: " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  }
}

inline double dot(const WeightVector &a, const WeightVector &b) {
  require_same_size(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

/// a (+) b = (a_i b_i) / (a . b)
inline WeightVector aitchison_add(const WeightVector &a, const WeightVector &b) {
  require_same_size(a, b);
  std::vector<double> out(a.size());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] * b[i];
    total += out[i];
  }
  for (double &x : out) {
    x /= total;
  }
  return WeightVector(std::move(out));
}

/// a (-) b = (a_i / b_i) / sum_j (a_j / b_j)
inline WeightVector aitchison_sub(const WeightVector &a, const WeightVector &b) {
  require_same_size(a, b);
  std::vector<double> out(a.size());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] / b[i];
    total += out[i];
  }
  for (double &x : out) {
    x /= total;
  }
  return WeightVector(std::move(out));
}

/// Ranked view of a transition p -> q. sigma is 0-based: p[sigma[k]] = u[k].
struct RankTransition {
  OrderedWeightVector u;
  WeightVector r;
  std::vector<std::size_t> sigma;
};

/// Descending order of p; ties go to the lower original index.
inline std::vector<std::size_t> rank_order(const WeightVector &p) {
  std::vector<std::size_t> sigma(p.size());
  std::iota(sigma.begin(), sigma.end(), std::size_t{0});
  std::stable_sort(sigma.begin(), sigma.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  return sigma;
}

inline RankTransition rank_transform(const WeightVector &p,
                                     const WeightVector &q) {
  require_same_size(p, q);
  const std::size_t n = p.size();
  auto sigma = rank_order(p);
  std::vector<double> u(n), v(n);
  for (std::size_t k = 0; k < n; ++k) {
    u[k] = p[sigma[k]];
    v[k] = q[sigma[k]];
  }
  // u is a permutation of an already normalized vector; keep it bit-exact.
  OrderedWeightVector uu(std::move(u));
  WeightVector vv(std::move(v));
  return RankTransition{uu, aitchison_sub(vv, uu), std::move(sigma)};
}

/// Recovers q: q_{sigma(k)} = (u (+) r)_k.
inline WeightVector inverse_rank_transform(const RankTransition &t) {
  require_same_size(t.u, t.r);
  if (t.sigma.size() != t.u.size()) {
    throw InputError("permutation has wrong length");
  }
  const WeightVector v = aitchison_add(t.u, t.r);
  std::vector<double> q(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    q[t.sigma[k]] = v[k];
  }
  return WeightVector(std::move(q));
}

/// log( max_i p_i/q_i * max_j q_j/p_j )
inline double hilbert_metric(const WeightVector &p, const WeightVector &q) {
  require_same_size(p, q);
  double up = 0.0;
  double down = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    up = std::max(up, p[i] / q[i]);
    down = std::max(down, q[i] / p[i]);
  }
  return std::max(0.0, std::log(up) + std::log(down));
}

inline double l1_distance(const WeightVector &p, const WeightVector &q) {
  require_same_size(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += std::abs(p[i] - q[i]);
  }
  return s;
}

/// max{d_H, l1}, the per-component distance inside rho.
inline double simplex_distance(const WeightVector &p, const WeightVector &q) {
  return std::max(hilbert_metric(p, q), l1_distance(p, q));
}

/// A point (first, second) of the product space; (u, r) for rank data,
/// (p, q) for name-based data.
struct Atom {
  WeightVector first;
  WeightVector second;
};

inline double rho_metric(const Atom &x, const Atom &y) {
  return simplex_distance(x.first, y.first) +
         simplex_distance(x.second, y.second);
}

} // namespace fgp
