#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "egap/brute_oracle.hpp"
#include "egap/egap_solver.hpp"
#include "egap/errors.hpp"
#include "egap/expgrad.hpp"
#include "support/test_support.hpp"

namespace egap {
namespace {

using oracle::ExplicitDual;
using testing::max_rel_diff;
using testing::random_problem;
using testing::rel_diff;

ExplicitDual random_u(const oracle::ExplicitProblem& ep, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  ExplicitDual u(ep.size());
  for (std::size_t i = 0; i < ep.size(); ++i)
    for (std::size_t j = 0; j < ep.labelings[i].size(); ++j) u[i].push_back(normal(rng));
  return u;
}

TEST(Enumeration, LexicographicOrderAndSizeGuard) {
  const auto ys = oracle::enumerate_labelings(2, 3);
  ASSERT_EQ(ys.size(), 9u);
  EXPECT_EQ(ys.front(), (Labeling{0, 0}));
  EXPECT_EQ(ys[1], (Labeling{0, 1}));
  EXPECT_EQ(ys.back(), (Labeling{2, 2}));
  EXPECT_NO_THROW(oracle::enumerate_labelings(12, 2));
  EXPECT_THROW(oracle::enumerate_labelings(13, 2), std::length_error);
}

TEST(Materialize, GuardsSizeAndKernel) {
  Dataset data = testing::random_dataset(1, {1, 1, 2, 2});
  data.num_states = 2;
  auto& inst = data.instances[0];
  inst.labels.assign(13, 0);
  inst.features.assign(13 * data.feature_dim, 0.5);
  inst.losses = hamming_losses(inst.labels, 2);
  EXPECT_THROW(oracle::materialize(build_problem(data, 1.0)), std::length_error);

  ProblemOptions options;
  options.kernel = KernelSpec::gaussian(1.0);
  EXPECT_THROW(oracle::materialize(random_problem(2, {}, options)), std::invalid_argument);
}

TEST(ExplicitDual, SimplexMembership) {
  const auto ep = oracle::materialize(random_problem(3));
  EXPECT_TRUE(oracle::on_simplex(ep, oracle::uniform_dual(ep)));
  EXPECT_TRUE(oracle::on_simplex(ep, oracle::truth_dual(ep)));
  auto bad = oracle::uniform_dual(ep);
  bad[0][0] += 1e-9;
  EXPECT_FALSE(oracle::on_simplex(ep, bad));
}

TEST(ProjectSimplex, ProducesFeasibleClosestPoint) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(1 + rng() % 6);
    for (double& x : v) x = normal(rng);
    const auto p = oracle::project_simplex(v, 0.25);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 0.25, 1e-15);
    for (double x : p) EXPECT_GE(x, 0.0);
    // Optimality: moving mass between coordinates cannot get closer to v.
    for (std::size_t a = 0; a < p.size(); ++a)
      for (std::size_t b = 0; b < p.size(); ++b)
        if (p[a] > 0.0) EXPECT_GE(v[a] - p[a], v[b] - p[b] - 1e-12);
  }
}

TEST(BruteDual, ReferenceValuesAndOptimality) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Problem p = random_problem(seed, {3, 3, 2, 2, true});
    const auto ep = oracle::materialize(p);
    EXPECT_EQ(oracle::brute_dual(ep, oracle::truth_dual(ep)), 0.0);
    EXPECT_LE(rel_diff(oracle::brute_dual(ep, oracle::uniform_dual(ep)),
                       dual_objective(p, uniform_alpha(p))),
              1e-12);
    const auto opt = oracle::maximize_dual(ep);
    EXPECT_LT(opt.kkt_residual, 1e-8);
    EXPECT_TRUE(oracle::on_simplex(ep, opt.alpha, 1e-12));
    for (int trial = 0; trial < 10; ++trial) {
      const auto u = random_u(ep, rng, 1.0);
      ExplicitDual alpha(ep.size());
      for (std::size_t i = 0; i < ep.size(); ++i) alpha[i] = oracle::project_simplex(u[i], 1.0 / ep.size());
      EXPECT_LE(oracle::brute_dual(ep, alpha), opt.value + 1e-12);
    }
  }
}

TEST(SmoothedConjugate, ZeroCase) {
  ProblemOptions options;
  const Problem p = build_problem(testing::with_zero_losses(testing::random_dataset(6)), 1.0, options);
  const auto ep = oracle::materialize(p);
  ExplicitDual u = oracle::uniform_dual(ep);
  for (auto& row : u) std::fill(row.begin(), row.end(), 0.0);
  EXPECT_NEAR(oracle::brute_smoothed_conjugate(ep, u, 0.7, 10).closed_form, 0.0, 1e-14);
}

TEST(SmoothedConjugate, ClosedFormMatchesSimplexMaximization) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Problem p = random_problem(static_cast<std::uint64_t>(trial), {3, 3, 3, 2, true});
    const auto ep = oracle::materialize(p);
    const double mu = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
    const auto u = random_u(ep, rng, 1.0);
    const auto check = oracle::brute_smoothed_conjugate(ep, u, mu);
    EXPECT_NEAR(check.closed_form, check.numerical, 1e-6) << "trial " << trial;
    EXPECT_LT(check.kkt_residual, 1e-8);
    for (const auto& row : check.gradient)
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0 / ep.size(), 1e-12);
  }
}

TEST(Replica, SchedulesMatchAndInvariantHolds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Problem p = random_problem(seed);
    const auto replica = oracle::brute_solver_replica(oracle::materialize(p), 50);
    ASSERT_EQ(replica.size(), 51u);
    for (const auto& r : replica) {
      EXPECT_DOUBLE_EQ(r.tau, tau_schedule(r.k));
      EXPECT_LE(rel_diff(r.mu, mu_schedule(p, r.k)), 1e-12);
      EXPECT_LE(r.smoothed, r.dual + kExcessiveGapTolerance * (1.0 + std::abs(r.dual)));
      EXPECT_LE(r.primal - r.dual, gap_bound(p, r.k) * (1.0 + 1e-9) + 1e-9);
    }
  }
}

TEST(ExpGrad, ZeroGradientLeavesAlphaUniform) {
  ProblemOptions off;
  off.transition_features = false;
  const Problem p = build_problem(
      testing::with_zero_losses(testing::with_zero_features(testing::random_dataset(7))), 1.0, off);
  const auto result = expgrad_run(ExplicitBackend(p), {.epsilon = 1e-12, .max_iter = 5});
  EXPECT_LE(max_rel_diff(result.alpha, uniform_alpha(p)), 1e-15);
  EXPECT_EQ(result.gap(), 0.0);
  EXPECT_DOUBLE_EQ(result.step_size, 1.0);
}

TEST(ExpGrad, TracksDenseReplica) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Problem p = random_problem(seed, {.random_losses = true});
    const auto ep = oracle::materialize(p);
    const double eta = default_expgrad_step(p);
    const auto replica = oracle::brute_expgrad_replica(ep, eta, 30);
    for (std::size_t k = 0; k <= 30; k += 5) {
      const auto result = expgrad_run(ExplicitBackend(p), {.epsilon = 1e-300, .max_iter = k});
      ASSERT_EQ(result.steps, k);
      EXPECT_LE(max_rel_diff(result.alpha, oracle::marginalize(ep, replica[k].alpha)), 1e-8);
      EXPECT_LE(rel_diff(result.dual, replica[k].dual), 1e-8);
    }
  }
}

TEST(ExpGrad, DualStaysBelowOptimumAndKernelMatches) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Problem p = random_problem(seed, {3, 3, 2, 2});
    const auto opt = oracle::maximize_dual(oracle::materialize(p));
    const auto result = expgrad_run(ExplicitBackend(p), {.epsilon = 1e-300, .max_iter = 200});
    for (const auto& r : result.trace) EXPECT_LE(r.dual, opt.value + 1e-9);
    const auto kernel = expgrad_run(KernelBackend(p), {.epsilon = 1e-300, .max_iter = 200});
    EXPECT_LE(max_rel_diff(kernel.alpha, result.alpha), 1e-8);
    EXPECT_LE(rel_diff(kernel.gap(), result.gap()), 1e-8);
  }
}

TEST(ExpGrad, RejectsBadOptions) {
  const ExplicitBackend backend(random_problem(1));
  EXPECT_THROW(expgrad_run(backend, {.step_size = -1.0}), std::domain_error);
  EXPECT_THROW(expgrad_run(backend, {.epsilon = 0.0}), std::domain_error);
}

TEST(ExpGrad, OversizedStepIsReportedAsDivergence) {
  const Problem p = random_problem(3);
  ExpGradOptions options;
  options.step_size = 1e4 / p.lipschitz();
  options.epsilon = 1e-12;
  options.max_iter = 10000;
  options.divergence_window = 2;
  EXPECT_THROW(expgrad_run(ExplicitBackend(p), options), NumericalError);
}

}  // namespace
}  // namespace egap
