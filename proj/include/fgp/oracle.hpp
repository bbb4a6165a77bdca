#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "genfun.hpp"
#include "problem.hpp"

namespace fgp {

struct OracleResult {
  GenVector best;
  double objective = -std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;
  std::size_t skipped = 0; // infeasible grid points
};

/// Exhaustive scan over node values in [-sqrt(beta)/2, log 2] (plus 0),
/// with the node at 1/2 pinned to 0. For desk-scale verification only.
inline OracleResult brute_force_oracle(const ProblemSpec &spec,
                                       std::size_t steps_per_node) {
  spec.validate();
  const Partition &P = spec.partition;
  const std::size_t d = P.size();
  if (d > 5 || steps_per_node > 21 || steps_per_node < 2) {
    throw InputError("oracle needs d <= 5 and 2 <= steps <= 21");
  }
  const double lo = -0.5 * std::sqrt(spec.beta);
  const double hi = std::log(2.0);
  std::vector<double> grid;
  for (std::size_t k = 0; k < steps_per_node; ++k) {
    grid.push_back(lo + (hi - lo) * static_cast<double>(k) /
                            static_cast<double>(steps_per_node - 1));
  }
  grid.push_back(0.0);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const ObjectiveModel model(spec);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < d; ++i) {
    if (i != P.half_index()) {
      free.push_back(i);
    }
  }
  OracleResult out;
  std::vector<std::size_t> idx(free.size(), 0);
  std::vector<double> l(d, 0.0);
  while (true) {
    for (std::size_t k = 0; k < free.size(); ++k) {
      l[free[k]] = grid[idx[k]];
    }
    ++out.evaluated;
    GenVector g(P, l);
    if (verify_membership(g, spec.beta, spec.monotone).ok() &&
        model.in_domain(l.data())) {
      const double v = model.value(l.data());
      if (v > out.objective) {
        out.objective = v;
        out.best = g;
      }
    } else {
      ++out.skipped;
    }
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == grid.size()) {
      idx[k++] = 0;
    }
    if (k == idx.size()) {
      break;
    }
  }
  return out;
}

} // namespace fgp
