#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "fgp/stability.hpp"
#include "fgp/synthetic.hpp"
#include "fgp/transport.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fgp;
namespace ft = fgp::testing;
using ft::Rng;

namespace {

Atom random_atom(std::size_t n, Rng &rng, double sigma = 0.3) {
  return Atom{ft::random_ordered(n, rng), ft::perturb(WeightVector::uniform(n), sigma, rng)};
}

EmpiricalMeasure random_weighted(std::size_t n, std::size_t k, Rng &rng) {
  std::vector<Atom> atoms;
  for (std::size_t s = 0; s < k; ++s) {
    atoms.push_back(random_atom(n, rng));
  }
  if (k == 1) {
    return EmpiricalMeasure::uniform(atoms);
  }
  return EmpiricalMeasure(atoms, ft::random_weights(k, rng, 0.7).entries());
}

} // namespace

TEST(FromMarketSequence, ConstantSequence) {
  const WeightVector p({0.5, 0.3, 0.2});
  const auto m = from_market_sequence({p, p, p});
  ASSERT_EQ(m.size(), 2u);
  for (const auto &[u, r] : m.atoms()) {
    EXPECT_EQ(u.entries(), (std::vector<double>{0.5, 0.3, 0.2}));
    for (double x : r) {
      EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
    }
  }
  EXPECT_DOUBLE_EQ(m.weight(0), 0.5);
}

TEST(FromMarketSequence, SingleStep) {
  const auto m = from_market_sequence({WeightVector({0.6, 0.4}), WeightVector({0.3, 0.7})});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.weight(0), 1.0);
  EXPECT_TRUE(m.rank_based());
  EXPECT_THROW(from_market_sequence({WeightVector({0.6, 0.4})}), InputError);
  EXPECT_THROW(from_market_sequence({WeightVector({0.6, 0.4}), WeightVector::uniform(3)}),
               InputError);
}

TEST(FromMarketSequence, MatchesRankTransforms) {
  Rng rng(1);
  const auto mu = ft::random_market(5, 6, 0.2, rng);
  const auto m = from_market_sequence(mu);
  const auto nb = name_based_from_market_sequence(mu);
  ASSERT_EQ(m.size(), 6u);
  EXPECT_FALSE(nb.rank_based());
  for (std::size_t t = 0; t < 6; ++t) {
    const auto tr = rank_transform(mu[t], mu[t + 1]);
    EXPECT_EQ(m.atom(t).first, tr.u);
    EXPECT_EQ(m.atom(t).second, tr.r);
    EXPECT_EQ(nb.atom(t).first, mu[t]);
    EXPECT_EQ(nb.atom(t).second, mu[t + 1]);
  }
}

TEST(EmpiricalMeasure, RejectsBadInput) {
  Rng rng(2);
  const auto a = random_atom(3, rng);
  EXPECT_THROW(EmpiricalMeasure({}, {}), InputError);
  EXPECT_THROW(EmpiricalMeasure({a}, {0.5}), InputError);
  EXPECT_THROW(EmpiricalMeasure({a, a}, {1.0}), InputError);
  EXPECT_THROW(EmpiricalMeasure({a, random_atom(4, rng)}, {0.5, 0.5}), InputError);
  EXPECT_THROW(EmpiricalMeasure({a, a}, {1.5, -0.5}), InputError);
  // unordered u is fine name-based, not rank-based
  const Atom raw{WeightVector({0.2, 0.8}), WeightVector({0.5, 0.5})};
  EXPECT_THROW(EmpiricalMeasure::uniform({raw}, true), InputError);
  EXPECT_NO_THROW(EmpiricalMeasure::uniform({raw}, false));
}

TEST(Wasserstein, TrivialCases) {
  Rng rng(3);
  const auto m = random_weighted(3, 5, rng);
  EXPECT_NEAR(wasserstein1(m, m), 0.0, 1e-12);
  const Atom a = random_atom(3, rng), b = random_atom(3, rng);
  EXPECT_NEAR(wasserstein1(EmpiricalMeasure::uniform({a}), EmpiricalMeasure::uniform({b})),
              rho_metric(a, b), 1e-15);
  EXPECT_THROW(wasserstein1(m, random_weighted(4, 2, rng)), InputError);
}

TEST(Wasserstein, MatchesVertexEnumeration) {
  Rng rng(4);
  for (std::size_t p = 1; p <= 4; ++p) {
    for (std::size_t q = 1; q <= 4; ++q) {
      for (int k = 0; k < 10; ++k) {
        const auto x = random_weighted(3, p, rng), y = random_weighted(3, q, rng);
        const double oracle =
            ft::transport_by_vertices(x.weights(), y.weights(), ground_costs(x, y));
        EXPECT_NEAR(wasserstein1(x, y), oracle, 1e-9) << p << "x" << q;
      }
    }
  }
}

TEST(Wasserstein, MatchesPermutationsForUniformWeights) {
  Rng rng(5);
  for (std::size_t k = 1; k <= 4; ++k) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<Atom> xa, ya;
      for (std::size_t s = 0; s < k; ++s) {
        xa.push_back(random_atom(4, rng));
        ya.push_back(random_atom(4, rng));
      }
      const auto x = EmpiricalMeasure::uniform(xa), y = EmpiricalMeasure::uniform(ya);
      EXPECT_NEAR(wasserstein1(x, y), ft::transport_by_permutations(k, ground_costs(x, y)),
                  1e-9);
    }
  }
}

TEST(Wasserstein, PlanIsFeasible) {
  Rng rng(6);
  const auto x = random_weighted(3, 7, rng), y = random_weighted(3, 5, rng);
  const auto c = ground_costs(x, y);
  const auto res = solve_transport(x.weights(), y.weights(), c, true);
  ASSERT_EQ(res.plan.size(), 35u);
  double total = 0.0;
  for (std::size_t i = 0; i < 7; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_GE(res.plan[i * 5 + j], -1e-15);
      row += res.plan[i * 5 + j];
      total += res.plan[i * 5 + j] * c[i * 5 + j];
    }
    EXPECT_NEAR(row, x.weight(i), 1e-12);
  }
  for (std::size_t j = 0; j < 5; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
      col += res.plan[i * 5 + j];
    }
    EXPECT_NEAR(col, y.weight(j), 1e-12);
  }
  EXPECT_NEAR(total, res.cost, 1e-12);
}

TEST(Wasserstein, MetricAxioms) {
  Rng rng(7);
  for (int k = 0; k < 1000; ++k) {
    const auto x = random_weighted(3, 1 + k % 6, rng);
    const auto y = random_weighted(3, 1 + (k / 6) % 6, rng);
    const auto z = random_weighted(3, 1 + (k / 36) % 6, rng);
    const double xy = wasserstein1(x, y), yx = wasserstein1(y, x);
    EXPECT_EQ(xy, yx);
    EXPECT_GE(xy, 0.0);
    EXPECT_LE(wasserstein1(x, z), xy + wasserstein1(y, z) + 1e-9);
  }
}

TEST(Wasserstein, KantorovichRubinsteinLowerBounds) {
  Rng rng(8);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const auto x = random_weighted(3, 2 + k % 8, rng), y = random_weighted(3, 2 + k % 5, rng);
    const double w = wasserstein1(x, y);
    // min_k (rho(., z_k) + c_k) is 1-Lipschitz for rho
    std::vector<Atom> z;
    std::vector<double> c;
    for (int j = 0; j < 1 + k % 4; ++j) {
      z.push_back(random_atom(3, rng));
      c.push_back(U(rng));
    }
    auto f = [&](const Atom &a) {
      double v = 1e300;
      for (std::size_t j = 0; j < z.size(); ++j) {
        v = std::min(v, rho_metric(a, z[j]) + c[j]);
      }
      return v;
    };
    double ix = 0.0, iy = 0.0;
    for (std::size_t s = 0; s < x.size(); ++s) {
      ix += x.weight(s) * f(x.atom(s));
    }
    for (std::size_t s = 0; s < y.size(); ++s) {
      iy += y.weight(s) * f(y.atom(s));
    }
    EXPECT_LE(std::abs(ix - iy), w + 1e-9);
  }
}

TEST(StabilityConstants, Examples) {
  const auto c = stability_constants(1.0, 2, 0.0, 1.0);
  EXPECT_NEAR(c.K0, 2.5, 1e-15);
  EXPECT_NEAR(c.K1, 2.0 + 1.5 * std::exp(1.0), 1e-14);
  EXPECT_NEAR(c.K1, 6.0774, 1e-4);
  EXPECT_EQ(c.K, c.K1);
  const auto d = stability_constants(4.0, 5, -0.5, 2.0, 0.3);
  EXPECT_NEAR(d.K, 0.5 * d.K0 + 2.0 * d.K1 + 0.3, 1e-14);
  const auto tiny = stability_constants(1e-14, 3, 1.0, 1.0);
  EXPECT_NEAR(tiny.K0, 2.0, 1e-6);
  EXPECT_NEAR(tiny.K1, 2.0, 1e-6);
  EXPECT_THROW(stability_constants(0.0, 3, 0.0, 1.0), InputError);
  EXPECT_THROW(stability_constants(1.0, 1, 0.0, 1.0), InputError);
}

TEST(StabilityConstants, LipschitzOfReturnAndDiversity) {
  Rng rng(9);
  for (int k = 0; k < 2000; ++k) {
    const std::size_t n = 2 + k % 8;
    const double beta = std::pow(10.0, k % 4 - 1);
    const auto g = ft::random_analytic(beta, rng);
    const auto c = stability_constants(beta, n, 0.0, 1.0);
    const Atom x = random_atom(n, rng), y = random_atom(n, rng);
    const double d = rho_metric(x, y);
    const double lx = relative_log_return(x.first, x.second, g);
    const double ly = relative_log_return(y.first, y.second, g);
    EXPECT_LE(std::abs(lx - ly), c.K1 * d + 1e-12);
    const double dx = diversity_contribution(g, aitchison_add(x.first, x.second), x.first);
    const double dy = diversity_contribution(g, aitchison_add(y.first, y.second), y.first);
    EXPECT_LE(std::abs(dx - dy), c.K0 * d + 1e-12);
  }
}

TEST(CheckStability, IdenticalMeasures) {
  Rng rng(10);
  const auto m = ft::random_measure(3, 12, 0.1, rng);
  ProblemSpec s;
  s.partition = Partition::uniform(9);
  const auto rep = check_stability(m, m, s);
  EXPECT_NEAR(rep.wasserstein, 0.0, 1e-12);
  EXPECT_EQ(rep.J, rep.J_tilde);
  EXPECT_EQ(rep.J_cross, rep.J_tilde);
  EXPECT_TRUE(rep.holds());
  EXPECT_TRUE(rep.converged);
}

TEST(CheckStability, PermutedAtoms) {
  Rng rng(11);
  const auto m = ft::random_measure(3, 12, 0.1, rng);
  auto atoms = m.atoms();
  auto weights = m.weights();
  std::reverse(atoms.begin(), atoms.end());
  std::reverse(weights.begin(), weights.end());
  const EmpiricalMeasure p(atoms, weights);
  ProblemSpec s;
  s.partition = Partition::uniform(9);
  s.eta0 = -0.3;
  const auto rep = check_stability(m, p, s);
  EXPECT_NEAR(rep.wasserstein, 0.0, 1e-12);
  EXPECT_LE(std::abs(rep.J - rep.J_tilde), SolverOptions{}.tolerance);
  EXPECT_TRUE(rep.holds());
}

TEST(CheckStability, SyntheticPairs) {
  const auto h = simulate_market(stabilizing_model(4, 400, 0.02, 0.05, 3));
  const auto mu = h.weight_sequence();
  Rng rng(12);
  std::uniform_int_distribution<std::size_t> start(0, mu.size() - 41);
  for (int k = 0; k < 10; ++k) {
    const std::size_t a = start(rng), b = start(rng);
    const auto ga = from_market_sequence({mu.begin() + a, mu.begin() + a + 40});
    const auto gb = from_market_sequence({mu.begin() + b, mu.begin() + b + 40});
    ProblemSpec s;
    s.partition = Partition::uniform(9);
    s.beta = k % 2 ? 4.0 : 1.0;
    s.eta0 = k % 3 == 0 ? -0.5 : 0.0;
    if (k % 4 == 1) {
      s.lambda = 0.1;
      s.regularizer = RegularizerSpec::l2_derivative();
    }
    if (k % 4 == 3) {
      s.lambda = 0.1;
      s.regularizer = RegularizerSpec::portfolio_distance(WeightRule::equal());
    }
    const auto rep = check_stability(ga, gb, s);
    EXPECT_TRUE(rep.converged) << "pair " << k;
    EXPECT_TRUE(rep.holds()) << "pair " << k << " value " << rep.value_margin
                             << " lower " << rep.lower_margin << " upper "
                             << rep.upper_margin;
    EXPECT_GT(rep.wasserstein, 0.0);
    if (k % 4 == 3) {
      EXPECT_GT(rep.constants.K2, 0.0);
    } else {
      EXPECT_EQ(rep.constants.K2, 0.0);
    }
  }
}
