#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/tokenizer.hpp>
#include <nlohmann/json.hpp>

#include "consistency.hpp"
#include "error.hpp"
#include "generator.hpp"
#include "market.hpp"
#include "measure.hpp"
#include "smooth.hpp"
#include "solver.hpp"
#include "stability.hpp"

namespace fgp {

inline std::string fmt_num(double x) {
  if (std::isnan(x)) {
    return "";
  }
  // shortest form that reads back to the same double
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace detail {

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines; // 1-based source line of each row

  std::size_t column(const std::string &name, bool required = true) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) {
        return j;
      }
    }
    if (required) {
      throw InputError(path + ": missing column '" + name + "'");
    }
    return header.size();
  }

  [[noreturn]] void fail(std::size_t row, const std::string &msg) const {
    throw InputError(path + ":" + std::to_string(lines[row]) + ": " + msg);
  }

  double number(std::size_t row, std::size_t col, bool allow_empty = false) const {
    const std::string &s = rows[row][col];
    if (s.empty()) {
      if (allow_empty) {
        return std::numeric_limits<double>::quiet_NaN();
      }
      fail(row, "empty value in column '" + header[col] + "'");
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      fail(row, "cannot parse '" + s + "' in column '" + header[col] + "'");
    }
    return v;
  }

  std::size_t index(std::size_t row, std::size_t col) const {
    const std::string &s = rows[row][col];
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      fail(row, "cannot parse index '" + s + "' in column '" + header[col] + "'");
    }
    return v;
  }
};

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

inline CsvTable read_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open " + path);
  }
  using Tok = boost::tokenizer<boost::escaped_list_separator<char>>;
  CsvTable t;
  t.path = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    std::vector<std::string> cells;
    try {
      Tok tok(line);
      for (const auto &c : tok) {
        cells.push_back(trim(c));
      }
    } catch (const boost::escaped_list_error &e) {
      throw InputError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(t.header.size()) + " fields, found " +
                       std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(lineno);
  }
  if (t.rows.empty()) {
    throw InputError(path + ": no data rows");
  }
  return t;
}

inline std::ofstream open_out(const std::string &path) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write " + path);
  }
  return out;
}

inline nlohmann::json num(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

} // namespace detail

// ---- market history -------------------------------------------------------

struct LoadReport {
  std::size_t rows = 0;
  std::size_t missing_returns = 0; // blank total_return after the first date
  std::size_t delistings = 0;
};

struct LoadedHistory {
  MarketHistory history;
  LoadReport report;
};

/// Columns date, asset_id, cap, total_return and optionally delist_return.
/// Dates and assets are ordered by first appearance.
inline LoadedHistory load_history(const std::string &path) {
  const auto t = detail::read_csv(path);
  const std::size_t cd = t.column("date"), ca = t.column("asset_id"),
                    cc = t.column("cap"), cr = t.column("total_return"),
                    cx = t.column("delist_return", false);
  std::map<std::string, std::size_t> date_ix, asset_ix;
  LoadedHistory out;
  MarketHistory &h = out.history;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto &row = t.rows[r];
    if (row[cd].empty() || row[ca].empty()) {
      t.fail(r, "empty date or asset_id");
    }
    if (date_ix.emplace(row[cd], h.dates.size()).second) {
      h.dates.push_back(row[cd]);
    }
    if (asset_ix.emplace(row[ca], h.ids.size()).second) {
      h.ids.push_back(row[ca]);
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::size_t T = h.dates.size(), N = h.ids.size();
  h.caps.assign(T, std::vector<double>(N, nan));
  h.returns.assign(T, std::vector<double>(N, nan));
  std::vector<std::vector<bool>> seen(T, std::vector<bool>(N, false));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto &row = t.rows[r];
    const std::size_t d = date_ix[row[cd]], a = asset_ix[row[ca]];
    if (seen[d][a]) {
      t.fail(r, "duplicate row for " + row[ca] + " at " + row[cd]);
    }
    seen[d][a] = true;
    const double cap = t.number(r, cc);
    if (!(cap > 0.0) || !std::isfinite(cap)) {
      t.fail(r, "cap must be positive");
    }
    h.caps[d][a] = cap;
    if (cx < t.header.size() && !row[cx].empty()) {
      h.delistings[{d, a}] = t.number(r, cx);
      ++out.report.delistings;
      continue;
    }
    h.returns[d][a] = t.number(r, cr, true);
    if (d > 0 && std::isnan(h.returns[d][a])) {
      ++out.report.missing_returns;
    }
  }
  out.report.rows = t.rows.size();
  h.validate();
  return out;
}

inline void save_history(const MarketHistory &h, const std::string &path) {
  auto out = detail::open_out(path);
  out << "date,asset_id,cap,total_return,delist_return\n";
  for (std::size_t t = 0; t < h.periods(); ++t) {
    for (std::size_t i = 0; i < h.assets(); ++i) {
      if (!std::isfinite(h.caps[t][i])) {
        continue;
      }
      auto dl = h.delistings.find({t, i});
      out << h.dates[t] << ',' << h.ids[i] << ',' << fmt_num(h.caps[t][i]) << ','
          << (dl == h.delistings.end() ? fmt_num(h.returns[t][i]) : std::string())
          << ',' << (dl == h.delistings.end() ? std::string() : fmt_num(dl->second))
          << '\n';
    }
  }
}

// ---- measures and matrices ------------------------------------------------

/// Columns period_index, atom_index, weight, u_1..u_n, r_1..r_n.
inline void save_measures(const std::vector<EmpiricalMeasure> &periods,
                          const std::string &path) {
  if (periods.empty()) {
    throw InputError("no measures to save");
  }
  const std::size_t n = periods[0].dimension();
  auto out = detail::open_out(path);
  out << "period_index,atom_index,weight";
  for (const char *p : {"u", "r"}) {
    for (std::size_t j = 1; j <= n; ++j) {
      out << ',' << p << '_' << j;
    }
  }
  out << '\n';
  for (std::size_t k = 0; k < periods.size(); ++k) {
    if (periods[k].dimension() != n) {
      throw InputError("measures have different dimensions");
    }
    for (std::size_t s = 0; s < periods[k].size(); ++s) {
      out << k << ',' << s << ',' << fmt_num(periods[k].weight(s));
      for (const WeightVector *w : {&periods[k].atom(s).first, &periods[k].atom(s).second}) {
        for (double x : *w) {
          out << ',' << fmt_num(x);
        }
      }
      out << '\n';
    }
  }
}

inline std::vector<EmpiricalMeasure> load_measures(const std::string &path,
                                                   bool rank_based = true) {
  const auto t = detail::read_csv(path);
  const std::size_t cp = t.column("period_index"), cw = t.column("weight");
  t.column("atom_index");
  std::size_t n = 0;
  while (t.column("u_" + std::to_string(n + 1), false) < t.header.size()) {
    ++n;
  }
  if (n < 2) {
    throw InputError(path + ": need columns u_1..u_n with n >= 2");
  }
  std::vector<std::size_t> cu(n), cr(n);
  for (std::size_t j = 0; j < n; ++j) {
    cu[j] = t.column("u_" + std::to_string(j + 1));
    cr[j] = t.column("r_" + std::to_string(j + 1));
  }
  std::map<std::size_t, std::pair<std::vector<Atom>, std::vector<double>>> by;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<double> u(n), q(n);
    for (std::size_t j = 0; j < n; ++j) {
      u[j] = t.number(r, cu[j]);
      q[j] = t.number(r, cr[j]);
    }
    try {
      auto &slot = by[t.index(r, cp)];
      slot.first.push_back(Atom{WeightVector(u), WeightVector(q)});
      slot.second.push_back(t.number(r, cw));
    } catch (const InputError &e) {
      t.fail(r, e.what());
    }
  }
  std::vector<EmpiricalMeasure> out;
  for (auto &[k, slot] : by) {
    try {
      out.emplace_back(std::move(slot.first), std::move(slot.second), rank_based);
    } catch (const InputError &e) {
      throw InputError(path + ": period " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

/// Square matrix with a label column, the layout of a pairwise distance table.
inline void save_matrix(const std::vector<std::string> &labels,
                        const std::vector<std::vector<double>> &m,
                        const std::string &path, const std::string &corner = "W") {
  auto out = detail::open_out(path);
  out << corner;
  for (const auto &l : labels) {
    out << ',' << l;
  }
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << labels[i];
    for (double x : m[i]) {
      out << ',' << fmt_num(x);
    }
    out << '\n';
  }
}

inline void save_backtest(const BacktestResult &r,
                          const std::vector<std::string> &dates,
                          const std::string &path) {
  auto out = detail::open_out(path);
  out << "date,value,relative_value,turnover,cum_costs,diversity\n";
  for (std::size_t t = 0; t < r.value.size(); ++t) {
    out << (t < dates.size() ? dates[t] : std::to_string(t)) << ','
        << fmt_num(r.value[t]) << ',' << fmt_num(r.relative_value[t]) << ','
        << fmt_num(r.turnover[t]) << ',' << fmt_num(r.costs_paid[t]) << ','
        << fmt_num(r.diversity[t]) << '\n';
  }
}

inline void save_events(const BacktestResult &r,
                        const std::vector<std::string> &dates,
                        const std::string &path) {
  auto out = detail::open_out(path);
  out << "date,kind,asset,amount\n";
  for (const auto &e : r.events) {
    out << (e.t < dates.size() ? dates[e.t] : std::to_string(e.t)) << ','
        << e.kind << ',' << e.asset << ',' << fmt_num(e.amount) << '\n';
  }
}

// ---- JSON -----------------------------------------------------------------

inline nlohmann::json to_json(const GenVector &g, double beta) {
  return {{"nodes", g.partition().nodes()}, {"values", g.values()}, {"beta", beta}};
}

struct LoadedGenerator {
  GenVector generator;
  double beta;
};

inline LoadedGenerator generator_from_json(const nlohmann::json &j) {
  try {
    return {GenVector(Partition(j.at("nodes").get<std::vector<double>>()),
                      j.at("values").get<std::vector<double>>()),
            j.at("beta").get<double>()};
  } catch (const nlohmann::json::exception &e) {
    throw InputError(std::string("bad generator JSON: ") + e.what());
  }
}

inline nlohmann::json read_json(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open " + path);
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void write_json(const nlohmann::json &j, const std::string &path) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json to_json(const FeasibilityReport &f) {
  using detail::num;
  return {{"ok", f.ok()},
          {"exp_concave", {{"ok", f.exp_concave_ok}, {"worst", num(f.exp_concave_worst)}}},
          {"beta_smooth", {{"ok", f.beta_smooth_ok}, {"worst", num(f.beta_smooth_worst)}}},
          {"endpoint", {{"ok", f.endpoint_ok}, {"worst", num(f.endpoint_worst)}}},
          {"monotone", {{"ok", f.monotone_ok}, {"worst", num(f.monotone_worst)}}}};
}

inline nlohmann::json to_json(const SolveReport &r, double beta) {
  using detail::num;
  return {{"objective", num(r.objective)},
          {"iterations", r.iterations},
          {"outer_iterations", r.outer_iterations},
          {"kkt_residual", num(r.kkt_residual)},
          {"gradient_norm", num(r.gradient_norm)},
          {"barrier_final", num(r.barrier_final)},
          {"converged", r.converged},
          {"zero_incumbent", r.zero_incumbent},
          {"feasibility", to_json(r.feasibility)},
          {"solution", to_json(r.solution, beta)}};
}

inline nlohmann::json to_json(const CertificationReport &c) {
  using detail::num;
  return {{"ok", c.ok()},
          {"beta", c.beta},
          {"curvature", {{"ok", c.curvature_ok},
                         {"min", num(c.min_curvature)},
                         {"min_at", c.min_curvature_at},
                         {"max", num(c.max_curvature)},
                         {"max_at", c.max_curvature_at}}},
          {"c1", {{"ok", c.c1_ok}, {"max_gap", num(c.max_c1_gap)}}},
          {"c0_max_gap", num(c.max_c0_gap)},
          {"exp_concave", {{"ok", c.exp_concave_ok},
                           {"max_leading", num(c.max_leading)},
                           {"max_slope_rise", num(c.max_slope_rise)}}},
          {"slope", {{"ok", c.slope_ok}, {"max_abs", num(c.max_abs_slope)}}},
          {"value_at_half", num(c.value_at_half)},
          {"failing_pieces", c.failing_pieces}};
}

inline nlohmann::json to_json(const ConsistencyTable &t) {
  using detail::num;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto &r : t.rows) {
    rows.push_back({{"nodes", r.nodes},
                    {"mesh", r.mesh},
                    {"objective", num(r.objective)},
                    {"gap", num(r.gap)},
                    {"converged", r.converged},
                    {"certified", r.certified}});
  }
  return {{"alpha", t.alpha},
          {"rows", rows},
          {"slope", num(t.slope)},
          {"gaps_decreasing", t.gaps_decreasing},
          {"envelope", num(t.envelope)},
          {"worst_envelope_excess", num(t.worst_envelope_excess)},
          {"envelope_ok", t.envelope_ok}};
}

inline nlohmann::json to_json(const StabilityReport &s) {
  using detail::num;
  return {{"J", num(s.J)},
          {"J_tilde", num(s.J_tilde)},
          {"J_cross", num(s.J_cross)},
          {"wasserstein", num(s.wasserstein)},
          {"K0", s.constants.K0},
          {"K1", s.constants.K1},
          {"K2", s.constants.K2},
          {"K", s.constants.K},
          {"value_margin", num(s.value_margin)},
          {"lower_margin", num(s.lower_margin)},
          {"upper_margin", num(s.upper_margin)},
          {"holds", s.holds()},
          {"converged", s.converged}};
}

} // namespace fgp
