#pragma once

// Brute-force reference implementations over the explicit dual: every
// labeling of every instance is enumerated and every psi^i_y materialized.
// Only usable on tiny problems; intended for cross-checking the factorized
// code paths.

#include <cstddef>
#include <vector>

#include "egap/chain_inference.hpp"
#include "egap/m3n_problem.hpp"

namespace egap::oracle {

/// Per-instance enumeration limit.
inline constexpr std::size_t kMaxLabelings = 4096;

/// All s^length labelings in lexicographic order. Throws std::length_error
/// beyond kMaxLabelings.
std::vector<Labeling> enumerate_labelings(std::size_t length, std::size_t num_states);

double brute_log_partition(const FactorTable& tables);
MarginalTables brute_clique_marginals(const FactorTable& tables);
/// First maximizer in lexicographic order.
Labeling brute_map(const FactorTable& tables);

struct ExplicitProblem {
  Problem problem;
  std::vector<std::vector<Labeling>> labelings;
  std::vector<std::vector<WeightVector>> psi;
  std::vector<std::vector<double>> loss;

  std::size_t size() const noexcept { return labelings.size(); }
};

/// Throws std::length_error when an instance has more than kMaxLabelings
/// labelings and std::invalid_argument for a non-linear kernel.
ExplicitProblem materialize(const Problem& problem);

/// alpha[i][y] over the labelings of instance i; each row sums to 1/n.
using ExplicitDual = std::vector<std::vector<double>>;

ExplicitDual uniform_dual(const ExplicitProblem& ep);
ExplicitDual truth_dual(const ExplicitProblem& ep);
bool on_simplex(const ExplicitProblem& ep, const ExplicitDual& alpha, double tol = 1e-12);
MarginalSet marginalize(const ExplicitProblem& ep, const ExplicitDual& alpha);

WeightVector brute_w(const ExplicitProblem& ep, const ExplicitDual& alpha);
double brute_dual(const ExplicitProblem& ep, const ExplicitDual& alpha);
/// (grad D)^i_y = l^i_y - <psi^i_y, w(alpha)>.
ExplicitDual brute_dual_gradient(const ExplicitProblem& ep, const ExplicitDual& alpha);
double brute_primal(const ExplicitProblem& ep, const WeightVector& w);
double brute_smoothed_primal(const ExplicitProblem& ep, const WeightVector& w, double mu);
/// Per-instance softmax of (l - <psi, w>) / mu scaled to 1/n.
ExplicitDual brute_alpha_mu(const ExplicitProblem& ep, const WeightVector& w, double mu);
/// V(alpha, g): alpha exp(-g) renormalized per instance to 1/n.
ExplicitDual brute_bregman(const ExplicitProblem& ep, const ExplicitDual& alpha,
                           const ExplicitDual& g);
/// d(alpha) = sum alpha log alpha + log n + D_prox, the relative entropy to alpha_0.
double prox_divergence(const ExplicitProblem& ep, const ExplicitDual& alpha);

struct ConjugateCheck {
  double closed_form = 0.0;
  double numerical = 0.0;
  /// Gradient of the closed form w.r.t. u.
  ExplicitDual gradient;
  /// Spread of the objective gradient across labelings at the numerical maximizer.
  double kkt_residual = 0.0;
};
/// (g + mu d)^*(u) by the closed form and by maximizing
/// <u, alpha> - g(alpha) - mu d(alpha) over S^n with damped mirror ascent.
ConjugateCheck brute_smoothed_conjugate(const ExplicitProblem& ep, const ExplicitDual& u,
                                        double mu, std::size_t max_iter = 10000);

/// Euclidean projection of `v` onto {x >= 0, sum x = mass}.
std::vector<double> project_simplex(const std::vector<double>& v, double mass);

struct DualOptimum {
  ExplicitDual alpha;
  double value = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
};
/// max_alpha D(alpha) by accelerated projected gradient with restarts.
DualOptimum maximize_dual(const ExplicitProblem& ep, std::size_t max_iter = 10000,
                          double tol = 1e-8);

struct ReplicaRecord {
  std::size_t k = 0;
  double tau = 0.0;  // tau_k used to leave iterate k
  double mu = 0.0;
  WeightVector w;
  ExplicitDual alpha;
  double primal = 0.0;
  double dual = 0.0;
  double smoothed = 0.0;
};
/// The excessive gap iteration on dense vectors, with mu advanced by the
/// multiplicative recursion. Returns iterates k = 1 .. iterations + 1.
std::vector<ReplicaRecord> brute_solver_replica(const ExplicitProblem& ep,
                                                std::size_t iterations);

struct ExpGradRecord {
  ExplicitDual alpha;
  double dual = 0.0;
};
/// Dense exponentiated gradient: alpha <- alpha exp(eta grad D) renormalized.
std::vector<ExpGradRecord> brute_expgrad_replica(const ExplicitProblem& ep, double eta,
                                                 std::size_t iterations);

}  // namespace egap::oracle
