#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "fgp/consistency.hpp"
#include "fgp/io.hpp"
#include "fgp/market.hpp"
#include "fgp/oracle.hpp"
#include "fgp/smooth.hpp"
#include "fgp/solver.hpp"
#include "fgp/stability.hpp"
#include "fgp/synthetic.hpp"
#include "fgp/transport.hpp"
#include "manifest.hpp"

namespace fgp::cli {

namespace fs = std::filesystem;

struct Context {
  Config cfg;
  fs::path out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool oracle = false;
  Manifest *manifest = nullptr;

  fs::path file(const std::string &name) const { return out / name; }
  void wrote(const std::string &name) const { manifest->output(file(name)); }
  void read(const std::string &path) const { manifest->input(path); }
};

/// Runs fn(0..count-1) on up to `threads` workers; each index writes only
/// its own slot, so results do not depend on the thread count.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)> &fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex m;
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < threads; ++k) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!err) {
            err = std::current_exception();
          }
        }
      }
    });
  }
  for (auto &t : pool) {
    t.join();
  }
  if (err) {
    std::rethrow_exception(err);
  }
}

// ---- inputs ---------------------------------------------------------------

inline MarketHistory history_from(const Context &c) {
  const Config &cfg = c.cfg;
  if (cfg.has("data.history")) {
    const std::string path = cfg.require("data.history");
    c.read(path);
    auto loaded = load_history(path);
    if (loaded.report.missing_returns > 0) {
      std::cerr << "note: " << loaded.report.missing_returns
                << " missing returns treated as 0\n";
    }
    return loaded.history;
  }
  if (cfg.has("simulate.n") || cfg.has("simulate.periods")) {
    auto spec = stabilizing_model(cfg.get<std::size_t>("simulate.n", 10),
                                  cfg.get<std::size_t>("simulate.periods", 1000),
                                  cfg.get<double>("simulate.kappa", 0.02),
                                  cfg.get<double>("simulate.sigma", 0.05),
                                  c.seed.value_or(cfg.get<std::uint64_t>("simulate.seed", 1)));
    spec.delist_floor = cfg.get<double>("simulate.delist_floor", 0.0);
    spec.delist_return = cfg.get<double>("simulate.delist_return", -0.3);
    spec.dividend_yield = cfg.get<double>("simulate.dividend_yield", 0.0);
    if (cfg.has("simulate.rank_drifts")) {
      spec.rank_drifts = cfg.numbers("simulate.rank_drifts", {});
    }
    if (cfg.has("simulate.rank_vols")) {
      spec.rank_vols = cfg.numbers("simulate.rank_vols", {});
    }
    return simulate_market(spec);
  }
  throw InputError("config needs data.history or a [simulate] section");
}

/// Every `step`-th entry; step = 5 turns daily data into weekly.
inline std::vector<WeightVector> sampled(const std::vector<WeightVector> &w,
                                         std::size_t step) {
  if (step == 0) {
    throw InputError("data.step must be positive");
  }
  std::vector<WeightVector> out;
  for (std::size_t t = 0; t < w.size(); t += step) {
    out.push_back(w[t]);
  }
  return out;
}

inline std::vector<WeightVector> closed_weights(const Context &c,
                                                const MarketHistory &h) {
  const std::size_t start = c.cfg.get<std::size_t>("data.start", 0);
  const std::size_t end = c.cfg.get<std::size_t>("data.end", h.periods() - 1);
  const std::size_t n = c.cfg.get<std::size_t>("data.n", h.listed_at(start).size());
  return closed_market(h, start, end, n);
}

inline EmpiricalMeasure measure_from(const Context &c) {
  const Config &cfg = c.cfg;
  if (cfg.has("data.measure")) {
    const std::string path = cfg.require("data.measure");
    c.read(path);
    auto all = load_measures(path);
    const auto k = cfg.get<std::size_t>("data.period", 0);
    if (k >= all.size()) {
      throw InputError(path + " has no period " + std::to_string(k));
    }
    return all[k];
  }
  if (cfg.str("data.model", "") == "rank_drift") {
    return rank_drift_measure(cfg.get<std::size_t>("data.atoms", 2000),
                              cfg.get<double>("data.drift", 0.2),
                              cfg.get<double>("data.lo", 0.02));
  }
  const auto h = history_from(c);
  return from_market_sequence(
      sampled(closed_weights(c, h), cfg.get<std::size_t>("data.step", 1)));
}

inline Partition partition_from(const Config &cfg, std::size_t n) {
  const std::string grid = cfg.str("problem.grid", "clustered");
  if (grid == "uniform") {
    return Partition::uniform(cfg.get<std::size_t>("problem.nodes", 33));
  }
  if (grid == "clustered") {
    return Partition::clustered(n, cfg.get<std::size_t>("problem.n_geometric", 6),
                                cfg.get<std::size_t>("problem.n_uniform", 24),
                                cfg.numbers("problem.extra_nodes", {}));
  }
  if (grid == "nodes") {
    return Partition(cfg.numbers("problem.node_list", {}));
  }
  throw InputError("problem.grid must be uniform, clustered or nodes");
}

inline WeightRule rule_from(const std::string &name,
                            const std::optional<GenVector> &gen) {
  if (name == "market") {
    return WeightRule::market();
  }
  if (name == "equal") {
    return WeightRule::equal();
  }
  if (name == "index_tracking") {
    return WeightRule::index_tracking();
  }
  if (name.rfind("diversity", 0) == 0) {
    double theta = 0.5;
    if (name.size() > 9) {
      if (name[9] != ':') {
        throw InputError("unknown rule '" + name + "'");
      }
      try {
        theta = std::stod(name.substr(10));
      } catch (const std::exception &) {
        throw InputError("bad theta in rule '" + name + "'");
      }
    }
    return WeightRule::diversity(theta);
  }
  if (name == "generated") {
    if (!gen) {
      throw InputError("rule 'generated' needs backtest.generator or a training window");
    }
    return WeightRule::generated(*gen);
  }
  throw InputError("unknown rule '" + name + "'");
}

inline ProblemSpec spec_from(const Context &c, EmpiricalMeasure mu) {
  const Config &cfg = c.cfg;
  ProblemSpec s;
  s.partition = partition_from(cfg, mu.dimension());
  s.measure = std::move(mu);
  s.beta = cfg.get<double>("problem.beta", 1.0);
  if (cfg.has("problem.w0") || cfg.has("problem.w1")) {
    const auto e = eta_from_decomposition_weights(cfg.get<double>("problem.w0", 1.0),
                                                  cfg.get<double>("problem.w1", 1.0));
    s.eta0 = e.eta0;
    s.eta1 = e.eta1;
  } else {
    s.eta0 = cfg.get<double>("problem.eta0", 0.0);
    s.eta1 = cfg.get<double>("problem.eta1", 1.0);
  }
  s.lambda = cfg.get<double>("problem.lambda", 0.0);
  s.monotone = cfg.flag("problem.monotone", false);
  const std::string reg = cfg.str("problem.regularizer", "none");
  if (reg == "none") {
    s.regularizer = RegularizerSpec::none();
  } else if (reg == "l2_derivative") {
    s.regularizer = RegularizerSpec::l2_derivative();
  } else if (reg == "reference_deviation") {
    const std::string path = cfg.require("problem.reference");
    c.read(path);
    s.regularizer =
        RegularizerSpec::reference_deviation(generator_from_json(read_json(path)).generator);
  } else if (reg == "portfolio_distance") {
    s.regularizer = RegularizerSpec::portfolio_distance(
        rule_from(cfg.str("problem.target", "equal"), std::nullopt));
  } else {
    throw InputError("unknown regularizer '" + reg + "'");
  }
  s.validate();
  return s;
}

inline SolverOptions solver_from(const Config &cfg) {
  SolverOptions o;
  o.tolerance = cfg.get<double>("solver.tolerance", o.tolerance);
  o.max_outer = cfg.get<int>("solver.max_outer", o.max_outer);
  o.max_inner = cfg.get<int>("solver.max_inner", o.max_inner);
  return o;
}

inline SmoothingConfig smoothing_from(const Config &cfg) {
  SmoothingConfig s;
  s.alpha = cfg.get<double>("smooth.alpha", s.alpha);
  s.M = cfg.get<double>("smooth.M", s.M);
  s.sample_density = cfg.get<std::size_t>("smooth.sample_density", s.sample_density);
  s.validate();
  return s;
}

inline std::string tc_label(double tc) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << tc;
  return os.str();
}

inline void write_text(const Context &c, const std::string &name,
                       const std::string &text) {
  auto out = detail::open_out(c.file(name).string());
  out << text;
  out.close();
  c.wrote(name);
}

// ---- fit ------------------------------------------------------------------

struct FitOutput {
  ProblemSpec spec;
  SolveReport report;
};

inline FitOutput fit_measure(const Context &c, EmpiricalMeasure mu,
                             const std::string &prefix) {
  FitOutput f{spec_from(c, std::move(mu)), {}};
  f.report = solve(f.spec, solver_from(c.cfg));
  auto gj = to_json(f.report.solution, f.spec.beta);
  gj["n"] = f.spec.measure.dimension();
  write_json(gj, c.file(prefix + "solution.json").string());
  c.wrote(prefix + "solution.json");
  auto rj = to_json(f.report, f.spec.beta);
  rj["n"] = f.spec.measure.dimension();
  rj["atoms"] = f.spec.measure.size();
  rj["nodes"] = f.spec.partition.size();
  write_json(rj, c.file(prefix + "report.json").string());
  c.wrote(prefix + "report.json");
  return f;
}

inline int cmd_fit(const Context &c) {
  auto f = fit_measure(c, measure_from(c), "");
  std::cout << "objective " << fmt_num(f.report.objective) << "  iterations "
            << f.report.iterations << "  kkt " << fmt_num(f.report.kkt_residual)
            << (f.report.converged ? "  converged\n" : "  NOT converged\n");
  if (c.oracle) {
    const auto steps = c.cfg.get<std::size_t>("problem.oracle_steps", 21);
    const auto o = brute_force_oracle(f.spec, steps);
    const double diff = f.report.objective - o.objective;
    nlohmann::json j{{"oracle_objective", detail::num(o.objective)},
                     {"solve_objective", detail::num(f.report.objective)},
                     {"difference", detail::num(diff)},
                     {"agree", std::abs(diff) <= 1e-3},
                     {"steps_per_node", steps},
                     {"evaluated", o.evaluated},
                     {"skipped", o.skipped},
                     {"best", to_json(o.best, f.spec.beta)}};
    write_json(j, c.file("oracle.json").string());
    c.wrote("oracle.json");
    std::cout << "oracle " << fmt_num(o.objective) << "  difference " << fmt_num(diff) << '\n';
  }
  return f.report.converged ? 0 : 2;
}

// ---- certify --------------------------------------------------------------

inline int cmd_certify(const Context &c) {
  const Config &cfg = c.cfg;
  const SmoothingConfig sc = smoothing_from(cfg);
  int code = 0;
  std::optional<LoadedGenerator> gen;
  if (cfg.has("smooth.generator")) {
    const std::string path = cfg.require("smooth.generator");
    c.read(path);
    gen = generator_from_json(read_json(path));
  } else if (!cfg.has("smooth.meshes")) {
    auto f = fit_measure(c, measure_from(c), "");
    gen = LoadedGenerator{f.report.solution, f.spec.beta};
  }
  if (gen) {
    const auto cert = build_smoother(gen->generator, sc);
    const auto rep = certify_membership(cert, gen->beta, sc);
    auto j = to_json(rep);
    j["derivative_gap"] = derivative_gap(cert, gen->generator, sc);
    j["derivative_gap_bound"] = derivative_gap_bound(
        gen->beta, sc.M, sc.alpha, gen->generator.partition().min_mesh());
    j["alpha"] = sc.alpha;
    j["min_mesh"] = gen->generator.partition().min_mesh();
    write_json(j, c.file("certification.json").string());
    c.wrote("certification.json");
    std::cout << "certification " << (rep.ok() ? "passed" : "FAILED")
              << "  curvature [" << fmt_num(rep.min_curvature) << ", "
              << fmt_num(rep.max_curvature) << "]  C1 gap " << fmt_num(rep.max_c1_gap)
              << '\n';
    if (!rep.ok()) {
      code = 2;
    }
  }
  if (cfg.has("smooth.meshes")) {
    ProblemSpec base = spec_from(c, measure_from(c));
    std::vector<std::size_t> meshes;
    for (double m : cfg.numbers("smooth.meshes", {})) {
      if (!(m >= 3) || m != std::floor(m)) {
        throw InputError("smooth.meshes must be node counts >= 3");
      }
      meshes.push_back(static_cast<std::size_t>(m));
    }
    const auto t = consistency_experiment(base, meshes, sc, solver_from(cfg));
    write_json(to_json(t), c.file("consistency.json").string());
    c.wrote("consistency.json");
    std::ostringstream csv;
    csv << "nodes,mesh,objective,gap,converged,certified\n";
    for (const auto &r : t.rows) {
      csv << r.nodes << ',' << fmt_num(r.mesh) << ',' << fmt_num(r.objective) << ','
          << fmt_num(r.gap) << ',' << r.converged << ',' << r.certified << '\n';
    }
    write_text(c, "consistency.csv", csv.str());
    std::cout << "consistency slope " << fmt_num(t.slope) << "  decreasing "
              << (t.gaps_decreasing ? "yes" : "no") << "  envelope "
              << (t.envelope_ok ? "ok" : "violated") << '\n';
    if (cfg.flag("smooth.search", false)) {
      const auto s = certified_mesh_search(base, meshes.front(),
                                           cfg.get<std::size_t>("smooth.max_nodes", 1025),
                                           sc, solver_from(cfg));
      nlohmann::json j{{"found", s.found},
                       {"nodes", s.nodes},
                       {"certification", to_json(s.certification)},
                       {"report", to_json(s.report, base.beta)}};
      write_json(j, c.file("certified_mesh.json").string());
      c.wrote("certified_mesh.json");
      if (!s.found) {
        code = 2;
      }
    }
  }
  return code;
}

// ---- backtest -------------------------------------------------------------

inline BacktestConfig backtest_from(const Config &cfg) {
  BacktestConfig b;
  b.rebalance_every = cfg.get<std::size_t>("backtest.rebalance_every", b.rebalance_every);
  b.renewal_every = cfg.get<std::size_t>("backtest.renewal_every", b.renewal_every);
  b.n_top = cfg.get<std::size_t>("backtest.n_top", b.n_top);
  b.diversity_theta = cfg.get<double>("backtest.theta", b.diversity_theta);
  const std::string mode = cfg.str("backtest.mode", "closed");
  if (mode == "closed") {
    b.mode = BacktestConfig::Mode::closed;
  } else if (mode == "open") {
    b.mode = BacktestConfig::Mode::open;
  } else {
    throw InputError("backtest.mode must be closed or open");
  }
  return b;
}

/// Dates a..b of h; delistings inside (a, b] are kept.
inline MarketHistory slice(const MarketHistory &h, std::size_t a, std::size_t b) {
  MarketHistory s;
  s.ids = h.ids;
  for (std::size_t t = a; t <= b; ++t) {
    s.dates.push_back(h.dates[t]);
    s.caps.push_back(h.caps[t]);
    s.returns.push_back(h.returns[t]);
  }
  for (const auto &[key, ret] : h.delistings) {
    if (key.first > a && key.first <= b) {
      s.delistings[{key.first - a, key.second}] = ret;
    } else if (key.first == a) {
      // already gone at the slice start
      s.caps[0][key.second] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return s;
}

struct RunSpec {
  std::string rule;
  double tc;
};

inline std::vector<BacktestResult>
run_all(const Context &c, const std::vector<RunSpec> &runs, BacktestConfig bc,
        const MarketHistory &h, const std::vector<WeightVector> *closed,
        const std::optional<GenVector> &gen) {
  std::vector<BacktestResult> res(runs.size());
  parallel_for(runs.size(), c.threads, [&](std::size_t k) {
    BacktestConfig b = bc;
    b.tc = runs[k].tc;
    const WeightRule rule = rule_from(runs[k].rule, gen);
    res[k] = closed ? run_closed(rule, *closed, b) : run_open(rule, h, b);
  });
  return res;
}

inline void emit_runs(const Context &c, const std::string &prefix,
                      const std::vector<RunSpec> &runs,
                      const std::vector<BacktestResult> &res,
                      const std::vector<std::string> &dates,
                      std::ostringstream &summary) {
  for (std::size_t k = 0; k < runs.size(); ++k) {
    std::string tag = runs[k].rule;
    std::replace(tag.begin(), tag.end(), ':', '_');
    const std::string name = prefix + tag + "_tc" + tc_label(runs[k].tc);
    save_backtest(res[k], dates, c.file(name + ".csv").string());
    c.wrote(name + ".csv");
    if (!res[k].events.empty()) {
      save_events(res[k], dates, c.file(name + "_events.csv").string());
      c.wrote(name + "_events.csv");
    }
    double turnover = 0.0;
    for (double x : res[k].turnover) {
      turnover += x;
    }
    summary << (prefix.empty() ? "all" : prefix.substr(0, prefix.size() - 1)) << ','
            << runs[k].rule << ',' << fmt_num(runs[k].tc) << ','
            << fmt_num(res[k].value.back()) << ',' << fmt_num(res[k].relative_value.back())
            << ',' << fmt_num(res[k].costs_paid.back()) << ',' << fmt_num(turnover) << ','
            << res[k].benchmark << '\n';
  }
}

inline int cmd_backtest(const Context &c) {
  const Config &cfg = c.cfg;
  const BacktestConfig bc = backtest_from(cfg);
  const auto h = history_from(c);
  auto rules = cfg.words("backtest.rules");
  if (rules.empty()) {
    rules = {"market", "equal", "diversity:0.5"};
  }
  const auto tcs = cfg.numbers("backtest.tc", {0.0});
  std::vector<RunSpec> runs;
  for (const auto &r : rules) {
    for (double tc : tcs) {
      runs.push_back({r, tc});
    }
  }
  std::ostringstream summary;
  summary << "window,rule,tc,terminal_value,terminal_relative_value,costs_paid,"
             "total_turnover,benchmark\n";
  const bool open = bc.mode == BacktestConfig::Mode::open;
  const auto train = cfg.get<std::size_t>("backtest.train", 0);
  const auto test = cfg.get<std::size_t>("backtest.test", 0);
  const auto step = cfg.get<std::size_t>("data.step", 1);
  int code = 0;

  if (train > 0 && test > 0) {
    // rolling: fit on a closed market of the training window, trade the test
    // window with the fitted generator
    std::size_t k = 0;
    for (std::size_t t0 = 0; t0 + train + 1 < h.periods(); t0 += test, ++k) {
      const std::size_t t1 = t0 + train;
      const std::size_t t2 = std::min(t1 + test, h.periods() - 1);
      const std::string prefix = "window" + std::to_string(k) + "_";
      const auto train_w = closed_market(h, t0, t1, bc.n_top);
      auto f = fit_measure(c, from_market_sequence(sampled(train_w, step)), prefix);
      if (!f.report.converged) {
        code = 2;
      }
      const std::optional<GenVector> gen = f.report.solution;
      const MarketHistory part = slice(h, t1, t2);
      std::vector<WeightVector> closed;
      if (!open) {
        closed = closed_market(part, 0, part.periods() - 1, bc.n_top);
      }
      const auto res = run_all(c, runs, bc, part, open ? nullptr : &closed, gen);
      emit_runs(c, prefix, runs, res, part.dates, summary);
    }
    if (k == 0) {
      throw InputError("history too short for backtest.train + 1 periods");
    }
  } else {
    std::optional<GenVector> gen;
    if (cfg.has("backtest.generator")) {
      const std::string path = cfg.require("backtest.generator");
      c.read(path);
      const auto j = read_json(path);
      gen = generator_from_json(j).generator;
      if (j.contains("n")) {
        const auto n = j["n"].get<std::size_t>();
        const std::size_t universe =
            open ? bc.n_top : cfg.get<std::size_t>("data.n", h.listed_at(0).size());
        if (n != universe) {
          throw InputError("generator was fitted on " + std::to_string(n) +
                           " assets but the backtest universe has " +
                           std::to_string(universe));
        }
      }
    }
    std::vector<WeightVector> closed;
    std::vector<std::string> dates = h.dates;
    if (!open) {
      closed = closed_weights(c, h);
      const auto start = cfg.get<std::size_t>("data.start", 0);
      dates.assign(h.dates.begin() + static_cast<std::ptrdiff_t>(start),
                   h.dates.begin() + static_cast<std::ptrdiff_t>(start + closed.size()));
    }
    const auto res = run_all(c, runs, bc, h, open ? nullptr : &closed, gen);
    emit_runs(c, "", runs, res, dates, summary);
  }
  write_text(c, "summary.csv", summary.str());
  std::cout << summary.str();
  return code;
}

// ---- stability ------------------------------------------------------------

inline std::vector<std::vector<double>>
distance_matrix(const std::vector<EmpiricalMeasure> &m, unsigned threads) {
  const std::size_t k = m.size();
  std::vector<std::vector<double>> w(k, std::vector<double>(k, 0.0));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      pairs.emplace_back(i, j);
    }
  }
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    w[i][j] = wasserstein1(m[i], m[j]);
  });
  for (const auto &[i, j] : pairs) {
    w[j][i] = w[i][j];
  }
  return w;
}

inline std::string table_layout(const std::vector<std::vector<double>> &a,
                                const std::vector<std::vector<double>> &b) {
  std::ostringstream os;
  const std::size_t k = a.size();
  auto head = [&](const char *sym) {
    os << std::setw(10) << "W";
    for (std::size_t j = 0; j < k; ++j) {
      os << std::setw(9) << (std::string(sym) + std::to_string(j + 1));
    }
  };
  head("g");
  if (!b.empty()) {
    os << "   |";
    head("g~");
  }
  os << '\n';
  for (std::size_t i = 0; i < k; ++i) {
    os << std::setw(10) << ("g" + std::to_string(i + 1));
    for (double x : a[i]) {
      os << std::setw(9) << std::fixed << std::setprecision(3) << x;
    }
    if (!b.empty()) {
      os << "   |" << std::setw(10) << ("g~" + std::to_string(i + 1));
      for (double x : b[i]) {
        os << std::setw(9) << std::fixed << std::setprecision(3) << x;
      }
    }
    os << '\n';
  }
  return os.str();
}

inline double mean_offdiag(const std::vector<std::vector<double>> &w) {
  double s = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (i != j) {
        s += w[i][j];
        ++cnt;
      }
    }
  }
  return cnt ? s / static_cast<double>(cnt) : 0.0;
}

inline int cmd_stability(const Context &c) {
  const Config &cfg = c.cfg;
  std::vector<EmpiricalMeasure> rank, name;
  if (cfg.has("data.measure")) {
    const std::string path = cfg.require("data.measure");
    c.read(path);
    rank = load_measures(path);
  } else {
    const auto h = history_from(c);
    const auto w = sampled(closed_weights(c, h), cfg.get<std::size_t>("data.step", 1));
    const auto k = cfg.get<std::size_t>("stability.periods", 5);
    if (k < 2 || w.size() < 2 * k + 1) {
      throw InputError("stability needs at least 2 periods of 2 or more steps");
    }
    const std::size_t len = (w.size() - 1) / k;
    for (std::size_t p = 0; p < k; ++p) {
      std::vector<WeightVector> part(w.begin() + static_cast<std::ptrdiff_t>(p * len),
                                     w.begin() + static_cast<std::ptrdiff_t>((p + 1) * len + 1));
      rank.push_back(from_market_sequence(part));
      name.push_back(name_based_from_market_sequence(part));
    }
  }
  if (rank.size() < 2) {
    throw InputError("stability needs at least two period measures");
  }
  for (const auto &m : rank) {
    if (m.dimension() != rank[0].dimension()) {
      throw InputError("period measures have different dimensions");
    }
  }
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < rank.size(); ++i) {
    labels.push_back("gamma_" + std::to_string(i + 1));
  }
  const auto wr = distance_matrix(rank, c.threads);
  save_matrix(labels, wr, c.file("w_rank.csv").string());
  c.wrote("w_rank.csv");
  std::vector<std::vector<double>> wn;
  if (!name.empty()) {
    wn = distance_matrix(name, c.threads);
    std::vector<std::string> nl;
    for (std::size_t i = 0; i < name.size(); ++i) {
      nl.push_back("gamma~_" + std::to_string(i + 1));
    }
    save_matrix(nl, wn, c.file("w_name.csv").string(), "W~");
    c.wrote("w_name.csv");
  }
  write_text(c, "table.txt", table_layout(wr, wn));
  std::cout << table_layout(wr, wn);

  // bound margins for consecutive periods
  const SolverOptions so = solver_from(cfg);
  std::vector<StabilityReport> reps(rank.size() - 1);
  const ProblemSpec base = spec_from(c, rank[0]);
  parallel_for(reps.size(), c.threads, [&](std::size_t i) {
    reps[i] = check_stability(rank[i], rank[i + 1], base, so);
  });
  std::ostringstream csv;
  csv << "pair,wasserstein,K,J,J_tilde,J_cross,value_margin,lower_margin,"
         "upper_margin,holds\n";
  bool all = true;
  bool converged = true;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto &r = reps[i];
    csv << labels[i] << "~" << labels[i + 1] << ',' << fmt_num(r.wasserstein) << ','
        << fmt_num(r.constants.K) << ',' << fmt_num(r.J) << ',' << fmt_num(r.J_tilde) << ','
        << fmt_num(r.J_cross) << ',' << fmt_num(r.value_margin) << ','
        << fmt_num(r.lower_margin) << ',' << fmt_num(r.upper_margin) << ','
        << (r.holds() ? "true" : "false") << '\n';
    all = all && r.holds();
    converged = converged && r.converged;
  }
  write_text(c, "stability.csv", csv.str());
  nlohmann::json j{{"mean_rank_offdiag", mean_offdiag(wr)},
                   {"bounds_hold", all}};
  if (!wn.empty()) {
    j["mean_name_offdiag"] = mean_offdiag(wn);
    j["rank_smaller"] = mean_offdiag(wr) < mean_offdiag(wn);
  }
  write_json(j, c.file("stability_summary.json").string());
  c.wrote("stability_summary.json");
  std::cout << j.dump(2) << '\n';
  return converged ? 0 : 2;
}

// ---- simulate -------------------------------------------------------------

inline int cmd_simulate(const Context &c) {
  Context sim = c;
  if (!sim.cfg.has("simulate.n") && !sim.cfg.has("simulate.periods")) {
    sim.cfg.set("simulate.n", "10");
  }
  const auto h = history_from(sim);
  save_history(h, c.file("history.csv").string());
  c.wrote("history.csv");
  std::cout << "simulated " << h.periods() << " dates x " << h.assets()
            << " assets, " << h.delistings.size() << " delistings\n";
  return 0;
}

// ---- report ---------------------------------------------------------------

inline int cmd_report(const Context &c) {
  std::ostringstream os;
  os << "# Run report: " << c.out.string() << "\n\n";
  auto maybe = [&](const std::string &name) -> std::optional<nlohmann::json> {
    if (!fs::exists(c.file(name))) {
      return std::nullopt;
    }
    c.read(c.file(name).string());
    return read_json(c.file(name).string());
  };
  bool any = false;
  if (auto j = maybe("MANIFEST.json")) {
    any = true;
    os << "command: " << (*j)["command"].get<std::string>() << ", exit code "
       << (*j).value("exit_code", -1) << ", finished " << (*j).value("finished", "?")
       << "\n\n";
  }
  if (auto j = maybe("report.json")) {
    any = true;
    os << "## fit\n\nobjective " << (*j)["objective"] << ", iterations "
       << (*j)["iterations"] << ", kkt residual " << (*j)["kkt_residual"]
       << ", converged " << (*j)["converged"] << ", feasible "
       << (*j)["feasibility"]["ok"] << "\n\n";
  }
  if (auto j = maybe("oracle.json")) {
    any = true;
    os << "oracle objective " << (*j)["oracle_objective"] << ", difference "
       << (*j)["difference"] << "\n\n";
  }
  if (auto j = maybe("certification.json")) {
    any = true;
    os << "## certification\n\npassed " << (*j)["ok"] << ", curvature ["
       << (*j)["curvature"]["min"] << ", " << (*j)["curvature"]["max"]
       << "], derivative gap " << (*j)["derivative_gap"] << "\n\n";
  }
  if (auto j = maybe("consistency.json")) {
    any = true;
    os << "## consistency\n\n| nodes | mesh | objective | gap |\n|---|---|---|---|\n";
    for (const auto &r : (*j)["rows"]) {
      os << "| " << r["nodes"] << " | " << r["mesh"] << " | " << r["objective"]
         << " | " << r["gap"] << " |\n";
    }
    os << "\nslope " << (*j)["slope"] << ", decreasing " << (*j)["gaps_decreasing"]
       << ", envelope ok " << (*j)["envelope_ok"] << "\n\n";
  }
  if (auto j = maybe("stability_summary.json")) {
    any = true;
    os << "## stability\n\n" << j->dump(2) << "\n\n";
    if (fs::exists(c.file("table.txt"))) {
      std::ifstream in(c.file("table.txt"));
      os << "```\n" << in.rdbuf() << "```\n\n";
    }
  }
  if (fs::exists(c.file("summary.csv"))) {
    any = true;
    std::ifstream in(c.file("summary.csv"));
    os << "## backtest\n\n```\n" << in.rdbuf() << "```\n";
  }
  if (!any) {
    throw InputError("no run outputs found in " + c.out.string());
  }
  write_text(c, "report.md", os.str());
  std::cout << os.str();
  return 0;
}

} // namespace fgp::cli
