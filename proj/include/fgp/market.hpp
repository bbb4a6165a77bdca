#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "rules.hpp"
#include "simplex.hpp"

namespace fgp {

/// caps[t][i] is NaN when asset i is not listed at date t. returns[t][i] is
/// the total return over (t-1, t]; row 0 is unused. A delisting at (t, i)
/// replaces that return and ends the listed range at t-1.
struct MarketHistory {
  std::vector<std::string> dates;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> caps;
  std::vector<std::vector<double>> returns;
  std::map<std::pair<std::size_t, std::size_t>, double> delistings;

  std::size_t periods() const { return dates.size(); }
  std::size_t assets() const { return ids.size(); }

  bool listed(std::size_t t, std::size_t i) const {
    return std::isfinite(caps[t][i]) && !delistings.count({t, i});
  }

  std::vector<std::size_t> listed_at(std::size_t t) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assets(); ++i) {
      if (listed(t, i)) {
        out.push_back(i);
      }
    }
    return out;
  }

  void validate() const {
    const std::size_t T = periods(), N = assets();
    if (T == 0 || N == 0) {
      throw InputError("market history is empty");
    }
    if (caps.size() != T || returns.size() != T) {
      throw InputError("market history matrices do not match the date count");
    }
    for (std::size_t t = 0; t < T; ++t) {
      if (caps[t].size() != N || returns[t].size() != N) {
        throw InputError("market history row " + std::to_string(t) +
                         " has the wrong width");
      }
      for (std::size_t i = 0; i < N; ++i) {
        const double c = caps[t][i];
        if (!std::isnan(c) && !(c > 0.0 && std::isfinite(c))) {
          throw InputError("non-positive cap for " + ids[i] + " at " + dates[t]);
        }
        if (std::isinf(returns[t][i])) {
          throw InputError("infinite return for " + ids[i] + " at " + dates[t]);
        }
      }
    }
    for (const auto &[key, ret] : delistings) {
      const auto [t, i] = key;
      if (t >= T || i >= N || !std::isfinite(ret) || ret < -1.0) {
        throw InputError("invalid delisting entry");
      }
      if (t == 0 || !std::isfinite(caps[t - 1][i])) {
        throw InputError("delisting of " + ids[i] + " at " + dates[t] +
                         " without a listed previous date");
      }
      for (std::size_t s = t + 1; s < T; ++s) {
        if (std::isfinite(caps[s][i])) {
          throw InputError(ids[i] + " is listed after its delisting");
        }
      }
    }
  }

  /// Market weights of the listed subset `names` at date t, in that order.
  WeightVector weights(std::size_t t, const std::vector<std::size_t> &names) const {
    std::vector<double> w;
    w.reserve(names.size());
    for (std::size_t i : names) {
      w.push_back(caps[t][i]);
    }
    return WeightVector::normalized(w);
  }

  /// Weight sequence of the whole universe; every asset must be listed at
  /// every date.
  std::vector<WeightVector> weight_sequence() const {
    std::vector<std::size_t> all(assets());
    std::iota(all.begin(), all.end(), 0);
    std::vector<WeightVector> out;
    for (std::size_t t = 0; t < periods(); ++t) {
      for (std::size_t i : all) {
        if (!listed(t, i)) {
          throw InputError(ids[i] + " is not listed at " + dates[t]);
        }
      }
      out.push_back(weights(t, all));
    }
    return out;
  }
};

/// Largest `n` assets by cap at date t, in decreasing cap order.
inline std::vector<std::size_t> top_by_cap(const MarketHistory &h, std::size_t t,
                                           std::size_t n) {
  auto names = h.listed_at(t);
  if (names.size() < n) {
    throw InputError("only " + std::to_string(names.size()) +
                     " listed assets at " + h.dates[t] + ", need " +
                     std::to_string(n));
  }
  std::stable_sort(names.begin(), names.end(), [&](std::size_t a, std::size_t b) {
    return h.caps[t][a] > h.caps[t][b];
  });
  names.resize(n);
  return names;
}

/// Closed market of the top n at t0 among assets listed on all of [t0, t1].
inline std::vector<WeightVector> closed_market(const MarketHistory &h,
                                               std::size_t t0, std::size_t t1,
                                               std::size_t n) {
  if (!(t0 < t1 && t1 < h.periods())) {
    throw InputError("closed market window out of range");
  }
  std::vector<std::size_t> survivors;
  for (std::size_t i : h.listed_at(t0)) {
    bool ok = true;
    for (std::size_t t = t0; t <= t1 && ok; ++t) {
      ok = h.listed(t, i);
    }
    if (ok) {
      survivors.push_back(i);
    }
  }
  if (survivors.size() < n) {
    throw InputError("too few surviving assets for a closed market");
  }
  std::stable_sort(survivors.begin(), survivors.end(),
                   [&](std::size_t a, std::size_t b) {
                     return h.caps[t0][a] > h.caps[t0][b];
                   });
  survivors.resize(n);
  std::vector<WeightVector> out;
  for (std::size_t t = t0; t <= t1; ++t) {
    out.push_back(h.weights(t, survivors));
  }
  return out;
}

struct DividendSplit {
  double dividend;
  double price;
};

inline DividendSplit dividend_split(double total_return, double cap_old,
                                    double cap_new) {
  if (!(cap_old > 0.0) || !(cap_new > 0.0)) {
    throw InputError("dividend_split needs positive caps");
  }
  const double d = std::max(1.0 + total_return - cap_new / cap_old, 0.0);
  return {d, total_return - d};
}

struct TradeResult {
  std::vector<double> dollars;
  double wealth = 0.0; // post-trade
  double cost = 0.0;
  double traded = 0.0; // dollar volume
};

/// Post-trade wealth W' solves W' = W - tc sum_i |W' w_i - h_i|. The map
/// W' - W + tc sum|.| is increasing, negative at 0 and non-negative at W.
inline TradeResult apply_transaction_costs(const std::vector<double> &current,
                                           const std::vector<double> &target,
                                           double wealth, double tc) {
  if (current.size() != target.size()) {
    throw InputError("holdings and target have different sizes");
  }
  if (!(tc >= 0.0 && tc < 1.0)) {
    throw InputError("transaction cost rate must lie in [0, 1)");
  }
  if (!(wealth > 0.0)) {
    throw InputError("wealth must be positive");
  }
  double held = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!(target[i] >= 0.0) || !(current[i] >= 0.0)) {
      throw InputError("holdings and target weights must be non-negative");
    }
    held += current[i];
    wsum += target[i];
  }
  if (std::abs(wsum - 1.0) > 1e-9 || held > wealth * (1.0 + 1e-12)) {
    throw InputError("target must sum to 1 and holdings must not exceed wealth");
  }
  auto volume = [&](double w) {
    double s = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      s += std::abs(w * target[i] - current[i]);
    }
    return s;
  };
  double post = wealth;
  if (tc > 0.0) {
    double lo = 0.0, hi = wealth;
    while (hi - lo > 1e-12 * wealth) {
      const double mid = 0.5 * (lo + hi);
      if (mid - wealth + tc * volume(mid) < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    post = 0.5 * (lo + hi);
  }
  TradeResult r;
  r.wealth = post;
  r.cost = wealth - post;
  r.traded = volume(post);
  r.dollars.resize(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    r.dollars[i] = post * target[i];
  }
  return r;
}

/// (sum_i mu_i^theta)^(1/theta)
inline double diversity(const WeightVector &mu, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw InputError("diversity needs 0 < theta < 1");
  }
  double s = 0.0;
  for (double x : mu) {
    s += std::pow(x, theta);
  }
  return std::pow(s, 1.0 / theta);
}

inline std::vector<double> diversity_series(const std::vector<WeightVector> &market,
                                            double theta) {
  std::vector<double> out;
  out.reserve(market.size());
  for (const auto &m : market) {
    out.push_back(diversity(m, theta));
  }
  return out;
}

struct BacktestConfig {
  enum class Mode { closed, open };
  std::size_t rebalance_every = 5;
  double tc = 0.0;
  Mode mode = Mode::closed;
  std::size_t n_top = 100;
  std::size_t renewal_every = 126;
  double diversity_theta = 0.5;

  void validate() const {
    if (rebalance_every == 0 || renewal_every == 0) {
      throw InputError("rebalance and renewal periods must be positive");
    }
    if (!(tc >= 0.0 && tc < 1.0)) {
      throw InputError("transaction cost rate must lie in [0, 1)");
    }
    if (!(diversity_theta > 0.0 && diversity_theta < 1.0)) {
      throw InputError("diversity theta must lie in (0, 1)");
    }
    if (n_top < 2) {
      throw InputError("n_top must be at least 2");
    }
  }
};

struct BacktestEvent {
  std::size_t t;
  std::string kind; // renewal, delisting, missing_return
  std::string asset;
  double amount;
};

struct BacktestResult {
  std::string rule;
  std::string benchmark;
  std::vector<double> value;
  std::vector<double> benchmark_value;
  std::vector<double> relative_value;
  std::vector<double> turnover;  // traded volume / pre-trade wealth
  std::vector<double> costs_paid; // cumulative
  std::vector<double> diversity;
  std::vector<std::pair<std::string, double>> holdings; // final weights
  std::vector<BacktestEvent> events;
};

namespace detail {

struct Track {
  std::vector<double> h; // dollars per asset
  double cash = 0.0;
  double costs = 0.0;
  std::vector<double> value, turnover, costs_paid;

  double wealth() const {
    return std::accumulate(h.begin(), h.end(), cash);
  }

  void rebalance(const std::vector<double> &target, double tc) {
    const double W = wealth();
    const TradeResult r = apply_transaction_costs(h, target, W, tc);
    h = r.dollars;
    cash = 0.0;
    costs += r.cost;
    turnover.back() = r.traded / W;
  }

  // initial position, taken at no cost
  void open(const std::vector<double> &target) {
    const double W = wealth();
    for (std::size_t i = 0; i < h.size(); ++i) {
      h[i] = target[i] * W;
    }
    cash = 0.0;
  }

  void record() {
    value.push_back(wealth());
    turnover.push_back(0.0);
    costs_paid.push_back(costs);
  }
};

inline void finish(BacktestResult &res, const Track &p, const Track &b,
                   const std::vector<std::string> &ids) {
  res.value = p.value;
  res.benchmark_value = b.value;
  res.turnover = p.turnover;
  res.costs_paid = p.costs_paid;
  res.relative_value.resize(p.value.size());
  for (std::size_t t = 0; t < p.value.size(); ++t) {
    res.relative_value[t] = p.value[t] / b.value[t];
  }
  const double W = p.wealth();
  if (p.cash > 0.0) {
    res.holdings.emplace_back("cash", p.cash / W);
  }
  for (std::size_t i = 0; i < p.h.size(); ++i) {
    if (p.h[i] > 0.0) {
      res.holdings.emplace_back(ids[i], p.h[i] / W);
    }
  }
}

} // namespace detail

/// Closed market in market numeraire: asset i grows by mu_i(s+1)/mu_i(s).
/// The benchmark is the market portfolio. The market rule holds its
/// initial position without trading, since drifted holdings already equal
/// its target.
inline BacktestResult run_closed(const WeightRule &rule,
                                 const std::vector<WeightVector> &market,
                                 const BacktestConfig &cfg) {
  cfg.validate();
  if (market.empty()) {
    throw InputError("closed backtest needs a market sequence");
  }
  const std::size_t n = market[0].size();
  for (const auto &m : market) {
    require_same_size(m, market[0]);
  }
  BacktestResult res;
  res.rule = rule.name();
  res.benchmark = "market";
  const WeightRule bench = WeightRule::market();
  detail::Track p, b;
  p.h.assign(n, 0.0);
  p.cash = 1.0;
  b.h.assign(n, 0.0);
  b.cash = 1.0;
  auto trade = [&](detail::Track &tr, const WeightRule &r, std::size_t s) {
    if (s == 0) {
      tr.open(r.apply(market[s]).entries());
    } else if (r.kind() != WeightRule::Kind::market) {
      tr.rebalance(r.apply(market[s]).entries(), cfg.tc);
    }
  };
  for (std::size_t s = 0; s < market.size(); ++s) {
    if (s > 0) {
      for (std::size_t i = 0; i < n; ++i) {
        const double g = market[s][i] / market[s - 1][i];
        p.h[i] *= g;
        b.h[i] *= g;
      }
    }
    p.record();
    b.record();
    res.diversity.push_back(diversity(market[s], cfg.diversity_theta));
    if (s + 1 < market.size() && s % cfg.rebalance_every == 0) {
      trade(p, rule, s);
      trade(b, bench, s);
      p.value.back() = p.wealth();
      b.value.back() = b.wealth();
      p.costs_paid.back() = p.costs;
      b.costs_paid.back() = b.costs;
    }
  }
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = "rank" + std::to_string(i + 1);
  }
  detail::finish(res, p, b, ids);
  return res;
}

/// Open market: constituents reset to the top n_top every renewal_every
/// periods; rules see renormalized constituent weights; dividends and
/// delisting proceeds are held as cash until the next rebalance. The
/// benchmark is index tracking.
inline BacktestResult run_open(const WeightRule &rule, const MarketHistory &hist,
                               const BacktestConfig &cfg) {
  cfg.validate();
  hist.validate();
  const std::size_t T = hist.periods(), N = hist.assets();
  if (T < 2) {
    throw InputError("open backtest needs at least two dates");
  }
  BacktestResult res;
  res.rule = rule.name();
  res.benchmark = "index_tracking";
  const WeightRule bench = WeightRule::index_tracking();
  detail::Track p, b;
  p.h.assign(N, 0.0);
  p.cash = 1.0;
  b.h.assign(N, 0.0);
  b.cash = 1.0;
  std::vector<std::size_t> members;
  std::size_t next_renewal = 0;

  auto target = [&](const WeightRule &r, std::size_t t) {
    const WeightVector w = r.apply(hist.weights(t, members));
    std::vector<double> full(N, 0.0);
    for (std::size_t k = 0; k < members.size(); ++k) {
      full[members[k]] = w[k];
    }
    return full;
  };

  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      for (std::size_t i = 0; i < N; ++i) {
        if (p.h[i] == 0.0 && b.h[i] == 0.0) {
          continue;
        }
        auto dl = hist.delistings.find({t, i});
        if (dl != hist.delistings.end()) {
          const double f = 1.0 + dl->second;
          res.events.push_back({t, "delisting", hist.ids[i], p.h[i] * f});
          p.cash += p.h[i] * f;
          b.cash += b.h[i] * f;
          p.h[i] = b.h[i] = 0.0;
          continue;
        }
        if (!std::isfinite(hist.caps[t][i])) {
          // vanished without a delisting return
          res.events.push_back({t, "delisting", hist.ids[i], p.h[i]});
          p.cash += p.h[i];
          b.cash += b.h[i];
          p.h[i] = b.h[i] = 0.0;
          continue;
        }
        double ret = hist.returns[t][i];
        if (std::isnan(ret)) {
          res.events.push_back({t, "missing_return", hist.ids[i], 0.0});
          ret = 0.0;
        }
        const auto split = dividend_split(ret, hist.caps[t - 1][i], hist.caps[t][i]);
        for (detail::Track *tr : {&p, &b}) {
          tr->cash += tr->h[i] * split.dividend;
          tr->h[i] *= 1.0 + split.price;
        }
      }
      members.erase(std::remove_if(members.begin(), members.end(),
                                   [&](std::size_t i) { return !hist.listed(t, i); }),
                    members.end());
    }
    p.record();
    b.record();
    if (t + 1 < T && t % cfg.rebalance_every == 0) {
      if (t >= next_renewal) {
        while (next_renewal <= t) {
          next_renewal += cfg.renewal_every;
        }
        members = top_by_cap(hist, t, cfg.n_top);
        res.events.push_back({t, "renewal", "", static_cast<double>(members.size())});
      }
      if (members.size() < 2) {
        throw InputError("fewer than two constituents left at " + hist.dates[t]);
      }
      if (t == 0) {
        p.open(target(rule, t));
        b.open(target(bench, t));
      } else {
        p.rebalance(target(rule, t), cfg.tc);
        b.rebalance(target(bench, t), cfg.tc);
      }
      p.value.back() = p.wealth();
      b.value.back() = b.wealth();
      p.costs_paid.back() = p.costs;
      b.costs_paid.back() = b.costs;
    }
    if (members.size() >= 2) {
      res.diversity.push_back(diversity(hist.weights(t, members), cfg.diversity_theta));
    } else {
      res.diversity.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  detail::finish(res, p, b, hist.ids);
  return res;
}

} // namespace fgp
