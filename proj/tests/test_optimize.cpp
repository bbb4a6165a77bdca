#include <algorithm>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "fgp/oracle.hpp"
#include "fgp/problem.hpp"
#include "fgp/solver.hpp"
#include "support.hpp"

using namespace fgp;
namespace ft = fgp::testing;
using ft::Rng;

namespace {

ProblemSpec make_spec(EmpiricalMeasure m, Partition P, double beta) {
  ProblemSpec s;
  s.measure = std::move(m);
  s.partition = std::move(P);
  s.beta = beta;
  return s;
}

EmpiricalMeasure single_barycentre_atom(std::size_t n, Rng &rng) {
  return EmpiricalMeasure::uniform(
      {Atom{ft::random_ordered(n, rng), WeightVector::uniform(n)}});
}

// integral of l_hat'^2, segment by segment
double l2_slope(const GenVector &g) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < g.size(); ++k) {
    s += g.partition().spacing(k) * g.segment_slope(k) * g.segment_slope(k);
  }
  return s;
}

const Partition kTiny({0.0, 0.25, 0.5, 1.0});

} // namespace

TEST(Eta, FromDecompositionWeights) {
  const auto e = eta_from_decomposition_weights(0.3, 0.7);
  EXPECT_DOUBLE_EQ(e.eta0, 0.3 - 0.7);
  EXPECT_DOUBLE_EQ(e.eta1, 0.7);
  const auto same = eta_from_decomposition_weights(1.0, 1.0);
  EXPECT_EQ(same.eta0, 0.0);
}

TEST(ProblemSpec, RejectsBadParameters) {
  Rng rng(1);
  auto s = make_spec(ft::random_measure(3, 4, 0.05, rng), Partition::uniform(5), 1.0);
  EXPECT_NO_THROW(s.validate());
  auto bad = s;
  bad.beta = 0.0;
  EXPECT_THROW(bad.validate(), InputError);
  bad = s;
  bad.eta1 = 0.0;
  EXPECT_THROW(bad.validate(), InputError);
  bad = s;
  bad.lambda = -1.0;
  EXPECT_THROW(bad.validate(), InputError);
  bad = s;
  bad.measure = EmpiricalMeasure(s.measure.atoms(), s.measure.weights(), false);
  EXPECT_THROW(bad.validate(), InputError);
  bad = s;
  bad.regularizer = RegularizerSpec::reference_deviation(GenVector::zero(Partition::uniform(7)));
  EXPECT_THROW(bad.validate(), InputError);
  EXPECT_THROW(objective_value(GenVector::zero(Partition::uniform(7)), s), InputError);
}

TEST(ObjectiveValue, ZeroGeneratorGivesZero) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    auto s = make_spec(ft::random_measure(2 + k % 4, 6, 0.1, rng), Partition::uniform(9), 1.0);
    s.eta0 = -0.4;
    s.lambda = 0.5;
    s.regularizer = RegularizerSpec::l2_derivative();
    EXPECT_EQ(objective_value(GenVector::zero(s.partition), s), 0.0);
  }
}

TEST(ObjectiveValue, BarycentreAtomIsMinusPenalty) {
  Rng rng(3);
  const auto P = Partition::uniform(9);
  for (int k = 0; k < 50; ++k) {
    auto s = make_spec(single_barycentre_atom(4, rng), P, 2.0);
    s.eta0 = 0.0;
    s.lambda = 0.7;
    s.regularizer = RegularizerSpec::l2_derivative();
    const auto g = ft::random_feasible(P, 2.0, rng);
    EXPECT_NEAR(objective_value(g, s), -0.7 * l2_slope(g), 1e-12);
    EXPECT_NEAR(regularizer_value(g, s), l2_slope(g), 1e-12);
  }
}

TEST(ObjectiveValue, MatchesSumOfGenfunTerms) {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + k % 4;
    const auto m = ft::random_measure(n, 3, 0.2, rng);
    const auto g = ft::random_feasible(kTiny, 1.0, rng);
    auto s = make_spec(m, kTiny, 1.0);
    s.eta0 = -0.3;
    s.eta1 = 1.4;
    s.lambda = 0.2;
    const auto ref = ft::random_feasible(kTiny, 1.0, rng);
    s.regularizer = RegularizerSpec::reference_deviation(ref);

    double expect = 0.0;
    for (std::size_t a = 0; a < m.size(); ++a) {
      const auto &[u, r] = m.atom(a);
      const auto v = aitchison_add(u, r);
      expect += m.weight(a) * (-0.3 * diversity_contribution(g, v, u) +
                               1.4 * relative_log_return(u, r, g));
    }
    double pen = 0.0;
    for (std::size_t j = 0; j + 1 < kTiny.size(); ++j) {
      const double ds = g.segment_slope(j) - ref.segment_slope(j);
      pen += kTiny.spacing(j) * ds * ds;
    }
    expect -= 0.2 * pen;
    EXPECT_NEAR(objective_value(g, s), expect, 1e-12);
  }
}

TEST(ObjectiveValue, PortfolioDistancePenalty) {
  Rng rng(5);
  const auto P = Partition::uniform(9);
  for (int k = 0; k < 30; ++k) {
    const auto m = ft::random_measure(3, 4, 0.1, rng);
    auto s = make_spec(m, P, 1.0);
    s.lambda = 1.0;
    s.regularizer = RegularizerSpec::portfolio_distance(WeightRule::equal());
    const auto g = ft::random_feasible(P, 1.0, rng);
    double expect = 0.0;
    for (std::size_t a = 0; a < m.size(); ++a) {
      const auto &u = m.atom(a).first;
      const auto pi = portfolio_weights(g, u);
      for (std::size_t i = 0; i < 3; ++i) {
        expect += m.weight(a) * (pi[i] - 1.0 / 3.0) * (pi[i] - 1.0 / 3.0);
      }
    }
    EXPECT_NEAR(regularizer_value(g, s), expect, 1e-12);
  }
}

TEST(ObjectiveValue, ConcaveInNodeValues) {
  Rng rng(6);
  const auto P = Partition::uniform(17);
  for (int k = 0; k < 100; ++k) {
    auto s = make_spec(ft::random_measure(3, 8, 0.2, rng), P, 4.0);
    s.eta0 = -0.5;
    s.lambda = 0.1;
    s.regularizer = RegularizerSpec::l2_derivative();
    const auto g1 = ft::random_feasible(P, 4.0, rng);
    const auto g2 = ft::random_feasible(P, 4.0, rng);
    std::vector<double> mid(P.size());
    for (std::size_t i = 0; i < P.size(); ++i) {
      mid[i] = 0.5 * (g1[i] + g2[i]);
    }
    EXPECT_GE(objective_value(GenVector(P, mid), s),
              0.5 * (objective_value(g1, s) + objective_value(g2, s)) - 1e-9);
  }
}

TEST(Solve, DegenerateBarycentreAtom) {
  Rng rng(7);
  for (std::size_t n : {2, 3, 10}) {
    auto s = make_spec(single_barycentre_atom(n, rng), Partition::uniform(17), 1.0);
    s.eta0 = 0.0;
    s.lambda = 1.0;
    s.regularizer = RegularizerSpec::l2_derivative();
    for (double tol : {1e-8, 1e-12}) {
      SolverOptions o;
      o.tolerance = tol;
      const auto rep = solve(s, o);
      EXPECT_TRUE(rep.converged);
      for (double x : rep.solution.values()) {
        EXPECT_LE(std::abs(x), 1e-6);
      }
      EXPECT_EQ(rep.objective, 0.0);
    }
  }
}

TEST(Solve, DegenerateIterateApproachesZero) {
  // every exp-chord constraint is active at l = 0, so the barrier iterate
  // only gets within about sqrt(mu / lambda)
  Rng rng(16);
  auto s = make_spec(single_barycentre_atom(3, rng), Partition::uniform(17), 1.0);
  s.lambda = 1.0;
  s.regularizer = RegularizerSpec::l2_derivative();
  SolverOptions o;
  o.tolerance = 1e-12;
  std::vector<double> last;
  o.observer = [&](const std::vector<double> &l) { last = l; };
  const auto rep = solve(s, o);
  EXPECT_TRUE(rep.zero_incumbent);
  double worst = 0.0;
  for (double x : last) {
    worst = std::max(worst, std::abs(x));
  }
  EXPECT_LE(worst, 1e-6);
  EXPECT_GT(worst, 0.0);
}

TEST(Solve, UnpenalizedObjectiveNonNegative) {
  Rng rng(8);
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 2 + k % 5;
    auto s = make_spec(ft::random_measure(n, 10, 0.1, rng), Partition::uniform(9),
                       std::pow(10.0, k % 3 - 1));
    s.monotone = k % 2 == 1;
    const auto rep = solve(s);
    EXPECT_TRUE(rep.converged) << "instance " << k;
    EXPECT_TRUE(rep.feasibility.ok());
    EXPECT_GE(rep.objective, 0.0);
    EXPECT_GE(rep.objective, objective_value(GenVector::zero(s.partition), s));
    EXPECT_LE(rep.kkt_residual, 1e-8);
  }
}

TEST(Solve, MatchesBruteForceOnTinyInstances) {
  Rng rng(9);
  for (int k = 0; k < 8; ++k) {
    const std::size_t n = 2 + k % 2;
    auto s = make_spec(ft::random_measure(n, 2 + k % 4, 0.03, rng), kTiny, 1.0);
    const auto rep = solve(s);
    const auto orc = brute_force_oracle(s, 21);
    EXPECT_GT(orc.evaluated, orc.skipped);
    EXPECT_LE(std::abs(rep.objective - orc.objective), 1e-3) << "instance " << k;
    EXPECT_GE(rep.objective, orc.objective - 1e-3);
  }
}

TEST(Oracle, FindsZeroWhenZeroIsOptimal) {
  Rng rng(10);
  auto s = make_spec(single_barycentre_atom(3, rng), kTiny, 1.0);
  s.lambda = 1.0;
  s.regularizer = RegularizerSpec::l2_derivative();
  const auto orc = brute_force_oracle(s, 5);
  EXPECT_EQ(orc.objective, 0.0);
  EXPECT_EQ(orc.best, GenVector::zero(kTiny));
  // the grid holds concave and non-concave points alike
  EXPECT_GT(orc.skipped, 0u);
  EXPECT_EQ(orc.evaluated, 6u * 6u * 6u);
  EXPECT_THROW(brute_force_oracle(s, 22), InputError);
  EXPECT_THROW(brute_force_oracle(make_spec(s.measure, Partition::uniform(7), 1.0), 5),
               InputError);
}

TEST(SolutionDeviation, Examples) {
  Rng rng(11);
  const auto P = Partition::uniform(9);
  const auto g = ft::random_feasible(P, 1.0, rng);
  EXPECT_EQ(solution_deviation(g, g), 0.0);
  std::vector<double> v(P.size());
  for (std::size_t i = 0; i < P.size(); ++i) {
    v[i] = -0.3 * (P[i] - 0.5);
  }
  EXPECT_NEAR(solution_deviation(GenVector::zero(P), GenVector(P, v)), 0.3, 1e-15);
  EXPECT_THROW(solution_deviation(g, GenVector::zero(Partition::uniform(5))), InputError);
}

TEST(SolutionDeviation, NonIncreasingAlongLambdaPath) {
  Rng rng(12);
  for (int k = 0; k < 3; ++k) {
    auto s = make_spec(ft::random_measure(3, 20, 0.2, rng), Partition::uniform(9), 4.0);
    s.regularizer = RegularizerSpec::l2_derivative();
    SolverOptions o;
    o.tolerance = 1e-10;
    double last = std::numeric_limits<double>::infinity();
    for (double lambda : {1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
      s.lambda = lambda;
      const auto rep = solve(s, o);
      const double dev = solution_deviation(rep.solution, GenVector::zero(s.partition));
      EXPECT_LE(dev, last + 1e-6) << "lambda " << lambda;
      last = dev;
    }
  }
}

TEST(Solve, Deterministic) {
  Rng rng(13);
  auto s = make_spec(ft::random_measure(4, 12, 0.1, rng), Partition::uniform(9), 1.0);
  s.eta0 = -0.2;
  const auto a = solve(s);
  const auto b = solve(s);
  EXPECT_EQ(a.solution, b.solution);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.kkt_residual, b.kkt_residual);
}

TEST(Solve, RestartsAgreeOnReturnRatios) {
  Rng rng(14);
  const auto P = Partition::uniform(9);
  for (int k = 0; k < 3; ++k) {
    auto s = make_spec(ft::random_measure(3, 15, 0.15, rng), P, 2.0);
    const auto base = solve(s);
    ASSERT_TRUE(base.converged);
    for (int r = 0; r < 4; ++r) {
      SolverOptions o;
      // sampled at half the curvature budget, so strictly inside
      o.start = ft::random_feasible(P, 1.0, rng);
      const auto rep = solve(s, o);
      ASSERT_TRUE(rep.converged);
      EXPECT_NEAR(rep.objective, base.objective, 10.0 * o.tolerance);
      for (const auto &[u, rr] : s.measure.atoms()) {
        EXPECT_NEAR(std::exp(relative_log_return(u, rr, rep.solution)),
                    std::exp(relative_log_return(u, rr, base.solution)), 1e-6);
      }
    }
  }
}

TEST(Solve, IteratesStayWithinNodeBounds) {
  Rng rng(15);
  for (double beta : {0.1, 1.0, 25.0}) {
    auto s = make_spec(ft::random_measure(3, 10, 0.3, rng), Partition::uniform(9), beta);
    SolverOptions o;
    const double lo = -0.5 * std::sqrt(beta) - o.tolerance;
    const double hi = std::log(2.0) + o.tolerance;
    std::size_t seen = 0;
    o.observer = [&](const std::vector<double> &l) {
      ++seen;
      for (double x : l) {
        EXPECT_GE(x, lo);
        EXPECT_LE(x, hi);
      }
    };
    const auto rep = solve(s, o);
    EXPECT_EQ(seen, static_cast<std::size_t>(rep.iterations));
    EXPECT_GT(seen, 0u);
  }
}
