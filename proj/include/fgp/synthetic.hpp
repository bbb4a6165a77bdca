#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "market.hpp"
#include "measure.hpp"

namespace fgp {

/// Atlas-type caps: log X_i(t+1) = log X_i(t) + g_k + sigma_k Z, with k the
/// rank of i at t among listed assets.
struct SyntheticModelSpec {
  std::size_t n = 10;
  std::size_t periods = 250;
  std::vector<double> rank_drifts;
  std::vector<double> rank_vols;
  std::uint64_t seed = 1;
  /// Initial caps; default 1/k for rank k.
  std::vector<double> initial_caps;
  /// Assets whose weight drops below this are delisted (0 disables).
  double delist_floor = 0.0;
  double delist_return = -0.3;
  /// Per-period dividend yield added to total returns.
  double dividend_yield = 0.0;

  void validate() const {
    if (n < 2 || periods < 2) {
      throw InputError("synthetic market needs n >= 2 and periods >= 2");
    }
    if (rank_drifts.size() != n || rank_vols.size() != n) {
      throw InputError("rank drifts and vols must have length n");
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(rank_drifts[k]) || !(rank_vols[k] >= 0.0) ||
          !std::isfinite(rank_vols[k])) {
        throw InputError("rank vols must be non-negative and drifts finite");
      }
    }
    if (!initial_caps.empty()) {
      if (initial_caps.size() != n) {
        throw InputError("initial caps must have length n");
      }
      for (double c : initial_caps) {
        if (!(c > 0.0) || !std::isfinite(c)) {
          throw InputError("initial caps must be positive");
        }
      }
    }
    if (!(delist_floor >= 0.0 && delist_floor < 1.0) ||
        !(delist_return >= -1.0) || !(dividend_yield >= 0.0)) {
      throw InputError("invalid delisting or dividend parameters");
    }
  }
};

/// Drifts g_k = kappa (k - (n+1)/2) / n favour small stocks when kappa > 0;
/// equal vols.
inline SyntheticModelSpec stabilizing_model(std::size_t n, std::size_t periods,
                                            double kappa, double sigma,
                                            std::uint64_t seed) {
  SyntheticModelSpec s;
  s.n = n;
  s.periods = periods;
  s.seed = seed;
  s.rank_vols.assign(n, sigma);
  for (std::size_t k = 0; k < n; ++k) {
    s.rank_drifts.push_back(kappa * (static_cast<double>(k) -
                                     0.5 * static_cast<double>(n - 1)) /
                            static_cast<double>(n));
  }
  return s;
}

inline MarketHistory simulate_market(const SyntheticModelSpec &spec) {
  spec.validate();
  const std::size_t N = spec.n, T = spec.periods;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> Z(0.0, 1.0);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  MarketHistory h;
  for (std::size_t i = 0; i < N; ++i) {
    h.ids.push_back("A" + std::to_string(i + 1));
  }
  for (std::size_t t = 0; t < T; ++t) {
    h.dates.push_back(std::to_string(t));
  }
  h.caps.assign(T, std::vector<double>(N, nan));
  h.returns.assign(T, std::vector<double>(N, nan));

  std::vector<double> logx(N);
  for (std::size_t i = 0; i < N; ++i) {
    logx[i] = spec.initial_caps.empty() ? -std::log(static_cast<double>(i + 1))
                                        : std::log(spec.initial_caps[i]);
  }
  std::vector<bool> alive(N, true);
  for (std::size_t i = 0; i < N; ++i) {
    h.caps[0][i] = std::exp(logx[i]);
  }
  std::vector<std::size_t> order(N);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    order.clear();
    for (std::size_t i = 0; i < N; ++i) {
      if (alive[i]) {
        order.push_back(i);
      }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return logx[a] > logx[b];
    });
    // draw for every asset in a fixed order so the stream does not depend
    // on the ranking
    std::vector<double> z(N);
    for (auto &x : z) {
      x = Z(rng);
    }
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t i = order[k];
      logx[i] += spec.rank_drifts[k] + spec.rank_vols[k] * z[i];
    }
    double total = 0.0;
    for (std::size_t i : order) {
      total += std::exp(logx[i]);
    }
    for (std::size_t i : order) {
      const double cap = std::exp(logx[i]);
      h.caps[t + 1][i] = cap;
      const bool last_two = order.size() <= 2;
      if (spec.delist_floor > 0.0 && !last_two && cap / total < spec.delist_floor) {
        h.delistings[{t + 1, i}] = spec.delist_return;
        alive[i] = false;
        continue;
      }
      h.returns[t + 1][i] = cap / h.caps[t][i] - 1.0 + spec.dividend_yield;
    }
  }
  h.validate();
  return h;
}

/// Noiseless two-asset measure: u_2 evenly spaced on [lo, 1/2] and
/// log(r_2 / r_1) = drift (1/2 - u_2).
inline EmpiricalMeasure rank_drift_measure(std::size_t atoms, double drift,
                                           double lo = 0.02) {
  if (atoms == 0 || !(lo > 0.0 && lo < 0.5)) {
    throw InputError("rank_drift_measure needs atoms > 0 and 0 < lo < 1/2");
  }
  std::vector<Atom> at;
  at.reserve(atoms);
  for (std::size_t s = 0; s < atoms; ++s) {
    const double x = lo + (0.5 - lo) * (static_cast<double>(s) + 0.5) /
                              static_cast<double>(atoms);
    const double e = std::exp(drift * (0.5 - x));
    at.push_back(Atom{WeightVector({1.0 - x, x}),
                      WeightVector({1.0 / (1.0 + e), e / (1.0 + e)})});
  }
  return EmpiricalMeasure::uniform(std::move(at));
}

} // namespace fgp
