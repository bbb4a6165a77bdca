#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "simplex.hpp"

namespace fgp {

/// Weighted point cloud on the product of two simplices. Rank-based
/// measures carry (u, r) atoms with u ordered; name-based ones carry (p, q).
class EmpiricalMeasure {
public:
  EmpiricalMeasure() = default;

  EmpiricalMeasure(std::vector<Atom> atoms, std::vector<double> weights,
                   bool rank_based = true)
      : atoms_(std::move(atoms)), w_(std::move(weights)),
        rank_based_(rank_based) {
    if (atoms_.empty()) {
      throw InputError("measure needs at least one atom");
    }
    if (atoms_.size() != w_.size()) {
      throw InputError("measure has mismatched atom and weight counts");
    }
    const std::size_t n = atoms_[0].first.size();
    double total = 0.0;
    for (std::size_t s = 0; s < atoms_.size(); ++s) {
      const Atom &a = atoms_[s];
      if (a.first.size() != n || a.second.size() != n) {
        throw InputError("atom " + std::to_string(s) + " has wrong dimension");
      }
      if (rank_based_) {
        OrderedWeightVector check(a.first);
      }
      if (!(w_[s] > 0.0) || !std::isfinite(w_[s])) {
        throw InputError("measure weights must be positive");
      }
      total += w_[s];
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw InputError("measure weights must sum to 1 (sum " +
                       std::to_string(total) + ")");
    }
    for (double &x : w_) {
      x /= total;
    }
  }

  static EmpiricalMeasure uniform(std::vector<Atom> atoms,
                                  bool rank_based = true) {
    std::vector<double> w(atoms.size(),
                          1.0 / static_cast<double>(atoms.size()));
    return EmpiricalMeasure(std::move(atoms), std::move(w), rank_based);
  }

  std::size_t size() const { return atoms_.size(); }
  std::size_t dimension() const { return atoms_[0].first.size(); }
  const Atom &atom(std::size_t s) const { return atoms_[s]; }
  double weight(std::size_t s) const { return w_[s]; }
  const std::vector<Atom> &atoms() const { return atoms_; }
  const std::vector<double> &weights() const { return w_; }
  bool rank_based() const { return rank_based_; }

private:
  std::vector<Atom> atoms_;
  std::vector<double> w_;
  bool rank_based_ = true;
};

inline void check_sequence(const std::vector<WeightVector> &market) {
  if (market.size() < 2) {
    throw InputError("market sequence needs at least two dates");
  }
  for (std::size_t t = 1; t < market.size(); ++t) {
    if (market[t].size() != market[0].size()) {
      throw InputError("dimension changes at date " + std::to_string(t));
    }
  }
}

/// Atoms (u(s), r(s)) of consecutive market weights, uniform weights.
inline EmpiricalMeasure
from_market_sequence(const std::vector<WeightVector> &market) {
  check_sequence(market);
  std::vector<Atom> atoms;
  atoms.reserve(market.size() - 1);
  for (std::size_t t = 0; t + 1 < market.size(); ++t) {
    auto tr = rank_transform(market[t], market[t + 1]);
    atoms.push_back(Atom{tr.u, tr.r});
  }
  return EmpiricalMeasure::uniform(std::move(atoms), true);
}

/// Atoms (mu(s), mu(s+1)) in name coordinates.
inline EmpiricalMeasure
name_based_from_market_sequence(const std::vector<WeightVector> &market) {
  check_sequence(market);
  std::vector<Atom> atoms;
  atoms.reserve(market.size() - 1);
  for (std::size_t t = 0; t + 1 < market.size(); ++t) {
    atoms.push_back(Atom{market[t], market[t + 1]});
  }
  return EmpiricalMeasure::uniform(std::move(atoms), false);
}

} // namespace fgp
