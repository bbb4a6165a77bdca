#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "error.hpp"
#include "smooth.hpp"
#include "solver.hpp"

namespace fgp {

struct ConsistencyRow {
  std::size_t nodes = 0;
  double mesh = 0.0; // min spacing
  double objective = 0.0;
  double gap = 0.0; // |J_P - J_finest|
  bool converged = false;
  bool certified = false;
};

struct ConsistencyTable {
  std::vector<ConsistencyRow> rows; // coarse to fine
  double alpha = 0.9;
  /// Least-squares slope of log gap against log mesh, finest row excluded.
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool gaps_decreasing = false;
  /// C with gap <= C mesh^alpha at the two coarsest meshes.
  double envelope = 0.0;
  /// Largest drop J_coarse - J_fine between consecutive meshes, less the
  /// envelope allowance C (mesh_coarse^alpha + mesh_fine^alpha).
  double worst_envelope_excess = -std::numeric_limits<double>::infinity();
  bool envelope_ok = false;
};

/// Solves `base` on each uniform partition with `meshes[k]` nodes and
/// tabulates objective gaps to the finest one. Each solution is also
/// smoothed and certified when the partition allows it.
inline ConsistencyTable consistency_experiment(const ProblemSpec &base,
                                               std::vector<std::size_t> meshes,
                                               const SmoothingConfig &cfg = {},
                                               const SolverOptions &opts = {}) {
  cfg.validate();
  if (meshes.size() < 3) {
    throw InputError("consistency experiment needs at least three meshes");
  }
  if (base.regularizer.kind != RegularizerSpec::Kind::none ||
      base.lambda != 0.0 || base.monotone) {
    throw InputError("consistency experiment runs without regularizer or "
                     "extra constraints");
  }
  std::sort(meshes.begin(), meshes.end());
  ConsistencyTable t;
  t.alpha = cfg.alpha;
  for (std::size_t d : meshes) {
    ProblemSpec spec = base;
    spec.partition = Partition::uniform(d);
    SolverOptions o = opts;
    o.start.reset();
    const SolveReport r = solve(spec, o);
    ConsistencyRow row;
    row.nodes = d;
    row.mesh = spec.partition.min_mesh();
    row.objective = r.objective;
    row.converged = r.converged;
    try {
      const auto c = build_smoother(r.solution, cfg);
      row.certified = certify_membership(c, spec.beta, cfg).ok();
    } catch (const InputError &) {
      row.certified = false;
    }
    t.rows.push_back(row);
  }
  const double finest = t.rows.back().objective;
  for (auto &row : t.rows) {
    row.gap = std::abs(row.objective - finest);
  }

  const std::size_t m = t.rows.size() - 1;
  const double tol = 10.0 * opts.tolerance;
  t.gaps_decreasing = true;
  for (std::size_t k = 1; k < m; ++k) {
    if (!(t.rows[k].gap < t.rows[k - 1].gap)) {
      t.gaps_decreasing = false;
    }
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < m; ++k) {
    if (t.rows[k].gap > 0.0) {
      const double x = std::log(t.rows[k].mesh);
      const double y = std::log(t.rows[k].gap);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++used;
    }
  }
  if (used >= 2) {
    const double nu = static_cast<double>(used);
    t.slope = (nu * sxy - sx * sy) / (nu * sxx - sx * sx);
  }

  for (std::size_t k = 0; k < 2; ++k) {
    t.envelope = std::max(t.envelope,
                          t.rows[k].gap / std::pow(t.rows[k].mesh, cfg.alpha));
  }
  for (std::size_t k = 1; k < t.rows.size(); ++k) {
    const double drop = t.rows[k - 1].objective - t.rows[k].objective;
    const double allow =
        t.envelope * (std::pow(t.rows[k - 1].mesh, cfg.alpha) +
                      std::pow(t.rows[k].mesh, cfg.alpha));
    t.worst_envelope_excess = std::max(t.worst_envelope_excess, drop - allow);
  }
  t.envelope_ok = t.worst_envelope_excess <= tol;
  return t;
}

struct CertifiedMesh {
  std::size_t nodes = 0;
  SolveReport report;
  CertificationReport certification;
  bool found = false;
};

/// Halves the mesh of a uniform partition, starting at `start_nodes`, until
/// the smoothed solution certifies or `max_nodes` is exceeded.
inline CertifiedMesh certified_mesh_search(const ProblemSpec &base,
                                           std::size_t start_nodes,
                                           std::size_t max_nodes,
                                           const SmoothingConfig &cfg = {},
                                           const SolverOptions &opts = {}) {
  cfg.validate();
  CertifiedMesh out;
  for (std::size_t d = start_nodes; d <= max_nodes; d = 2 * d - 1) {
    ProblemSpec spec = base;
    spec.partition = Partition::uniform(d);
    SolverOptions o = opts;
    o.start.reset();
    out.nodes = d;
    out.report = solve(spec, o);
    out.certification =
        certify_membership(build_smoother(out.report.solution, cfg), spec.beta, cfg);
    if (out.certification.ok()) {
      out.found = true;
      return out;
    }
  }
  return out;
}

} // namespace fgp
