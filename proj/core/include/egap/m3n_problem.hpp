#pragma once

// The max-margin Markov network saddle problem on linear chains.
//
// Featurization: the node clique at position t contributes one-hot(y_t) (x) x_t
// to a node block, the edge clique (t, t+1) contributes one-hot(y_t, y_{t+1})
// to a transition block. psi^i_{y_c} = phi(x^i, y^i_c) - phi(x^i, y_c). Blocks
// are shared by template: with Tying::tied every position maps to template 0,
// with Tying::per_position position t maps to template t.
//
// Dual points alpha in S^n are represented only through their clique marginals
// (MarginalSet, mass 1/n per instance); the joint is never formed.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "egap/chain_inference.hpp"
#include "egap/dataset.hpp"
#include "egap/kernel_spec.hpp"

namespace egap {

enum class Tying { tied, per_position };

std::string tying_name(Tying tying);
/// Accepts "tied" and "per-position"; throws std::invalid_argument otherwise.
Tying parse_tying(const std::string& name);

class WeightVector {
 public:
  WeightVector() = default;
  WeightVector(std::size_t num_states, std::size_t feature_dim, std::size_t node_templates,
               std::size_t edge_templates);

  std::size_t num_states() const noexcept { return states_; }
  std::size_t feature_dim() const noexcept { return dim_; }
  std::size_t node_templates() const noexcept { return node_templates_; }
  std::size_t edge_templates() const noexcept { return edge_templates_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> node_row(std::size_t tmpl, std::size_t label) {
    return {values_.data() + (tmpl * states_ + label) * dim_, dim_};
  }
  std::span<const double> node_row(std::size_t tmpl, std::size_t label) const {
    return {values_.data() + (tmpl * states_ + label) * dim_, dim_};
  }
  double& edge(std::size_t tmpl, std::size_t a, std::size_t b) {
    return values_[edge_offset() + (tmpl * states_ + a) * states_ + b];
  }
  double edge(std::size_t tmpl, std::size_t a, std::size_t b) const {
    return values_[edge_offset() + (tmpl * states_ + a) * states_ + b];
  }

  /// Node blocks first, then transition blocks.
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double norm_sq() const;
  double dot(const WeightVector& other) const;
  void scale(double factor);
  /// this += factor * other
  void add_scaled(const WeightVector& other, double factor);
  bool same_shape(const WeightVector& other) const noexcept;

 private:
  std::size_t edge_offset() const noexcept { return node_templates_ * states_ * dim_; }

  std::size_t states_ = 0;
  std::size_t dim_ = 0;
  std::size_t node_templates_ = 0;
  std::size_t edge_templates_ = 0;
  std::vector<double> values_;
};

struct MarginalSet {
  std::vector<MarginalTables> instances;

  std::size_t size() const noexcept { return instances.size(); }
  MarginalTables& operator[](std::size_t i) { return instances[i]; }
  const MarginalTables& operator[](std::size_t i) const { return instances[i]; }
};

/// (1 - tau) * a + tau * b, table by table.
MarginalSet convex_combination(const MarginalSet& a, const MarginalSet& b, double tau);

/// Nonnegativity, per-table mass == `mass`, and edge/node consistency, all
/// within `tol` relative to `mass`.
bool satisfies_marginal_invariants(const MarginalSet& m, double mass, double tol = 1e-10);

/// <psi^i_{y_c}, w_c> for every instance, clique, and clique value.
using ScoreSet = std::vector<ChainTables>;

struct CliqueRef {
  enum class Kind { node, edge };
  Kind kind = Kind::node;
  std::size_t position = 0;

  static CliqueRef node(std::size_t t) { return {Kind::node, t}; }
  static CliqueRef edge(std::size_t t) { return {Kind::edge, t}; }
};

/// A clique value y_c: `first` for nodes, (first, second) for edges.
struct CliqueValue {
  int first = 0;
  int second = 0;
};

struct ProblemOptions {
  Tying tying = Tying::tied;
  /// Transition indicator features on edge cliques.
  bool transition_features = true;
  /// Kernel used for ||A|| (and by the kernel engine). Explicit-feature
  /// solvers require the linear kernel.
  KernelSpec kernel{};
  /// Instances with at most this many labelings get ||psi_y|| maximized by
  /// enumeration; beyond it a triangle-inequality bound is used.
  std::size_t exact_norm_limit = 4096;
};

class Problem {
 public:
  const Dataset& data() const noexcept { return *data_; }
  const ChainInstance& instance(std::size_t i) const { return data_->instances[i]; }
  std::size_t size() const noexcept { return data_->size(); }
  std::size_t num_states() const noexcept { return data_->num_states; }
  std::size_t feature_dim() const noexcept { return data_->feature_dim; }
  std::size_t max_length() const noexcept { return max_length_; }

  double lambda() const noexcept { return lambda_; }
  const ProblemOptions& options() const noexcept { return options_; }
  Tying tying() const noexcept { return options_.tying; }
  const KernelSpec& kernel() const noexcept { return options_.kernel; }
  bool transition_features() const noexcept { return options_.transition_features; }

  std::size_t node_template(std::size_t t) const noexcept {
    return options_.tying == Tying::tied ? 0 : t;
  }
  std::size_t edge_template(std::size_t t) const noexcept {
    return options_.tying == Tying::tied ? 0 : t;
  }
  std::size_t num_node_templates() const noexcept;
  std::size_t num_edge_templates() const noexcept;

  /// Strong convexity of the regularizer.
  double rho() const noexcept { return lambda_; }
  /// Strong convexity of the entropy prox-function w.r.t. the L1 norm.
  static constexpr double sigma() noexcept { return 1.0; }
  static constexpr double lipschitz_g() noexcept { return 0.0; }

  /// Upper bound on ||A||_{1,2} = max_{i,y} ||psi^i_y||.
  double a_norm() const noexcept { return a_norm_; }
  /// Whether a_norm() is the exact maximum rather than an upper bound.
  bool a_norm_exact() const noexcept { return a_norm_exact_; }
  double lipschitz() const noexcept { return lipschitz_; }
  double mu1() const noexcept { return lipschitz_ / sigma(); }
  /// max of the prox-function: (1/n) sum_i log |Y_i|.
  double d_prox() const noexcept { return d_prox_; }
  double log_label_count(std::size_t i) const { return log_label_counts_[i]; }
  double instance_mass() const noexcept { return 1.0 / static_cast<double>(size()); }

  WeightVector zero_weights() const;

 private:
  friend Problem build_problem(Dataset dataset, double lambda, ProblemOptions options);

  std::shared_ptr<const Dataset> data_;
  double lambda_ = 0.0;
  ProblemOptions options_;
  std::size_t max_length_ = 0;
  double a_norm_ = 0.0;
  bool a_norm_exact_ = true;
  double lipschitz_ = 0.0;
  double d_prox_ = 0.0;
  std::vector<double> log_label_counts_;
};

/// Throws std::domain_error when lambda <= 0 or the dataset is empty.
Problem build_problem(Dataset dataset, double lambda, ProblemOptions options = {});

/// max_y ||psi^i_y||^2 for one instance and whether the value is exact.
struct PsiNormBound {
  double value = 0.0;
  bool exact = true;
};
PsiNormBound max_psi_norm_sq(const Problem& problem, std::size_t i);

/// alpha_0: node tables 1/(n s), edge tables 1/(n s^2).
MarginalSet uniform_alpha(const Problem& problem);

/// F[psi_c; alpha] accumulated into template blocks.
WeightVector feature_expectations(const Problem& problem, const MarginalSet& marginals);

/// w(alpha) = (1/lambda) F[psi; alpha].
WeightVector w_of_alpha(const Problem& problem, const MarginalSet& marginals);

ScoreSet psi_scores(const Problem& problem, const WeightVector& w);

/// h_c(y_c) = scale * (l^i_{y_c} - score_c(y_c)).
FactorTable loss_augmented_potentials(const Problem& problem, const ChainTables& scores,
                                      std::size_t i, double scale);
FactorTable loss_augmented_potentials(const Problem& problem, const WeightVector& w,
                                      std::size_t i, double scale);

/// Clique marginals of alpha_mu(w) = grad (g + mu d)^*(A w).
MarginalSet alpha_mu_from_scores(const Problem& problem, const ScoreSet& scores, double mu);
MarginalSet alpha_mu_of_w(const Problem& problem, const WeightVector& w, double mu);

/// Per-clique summand of (grad D(alpha))^i_y: l^i_{y_c} - <psi^i_{y_c}, w(alpha)_c>.
double grad_D_clique(const Problem& problem, const MarginalSet& marginals, std::size_t i,
                     CliqueRef clique, CliqueValue value);
/// Full entry (grad D(alpha))^i_y for a labeling y.
double grad_D_entry(const Problem& problem, const MarginalSet& marginals, std::size_t i,
                    std::span<const int> labeling);

/// Marginals of V(alpha_mu(w_k), eta grad D(alpha_hat)), eta = -tau/((1-tau) mu).
/// `scores_hat` holds <psi, w(alpha_hat)>.
MarginalSet bregman_tilde_from_scores(const Problem& problem, const ScoreSet& scores_k,
                                      const ScoreSet& scores_hat, double mu, double tau);
/// `f_hat` is F[psi; alpha_hat] (not divided by lambda).
MarginalSet bregman_tilde(const Problem& problem, const WeightVector& w_k, double mu, double tau,
                          const WeightVector& f_hat);

/// sum_{i,c,y_c} l^i_{y_c} alpha^i_{y_c}
double expected_loss(const Problem& problem, const MarginalSet& marginals);

/// J(w) given the clique scores of w and ||w||^2.
double primal_from_scores(const Problem& problem, const ScoreSet& scores, double w_norm_sq);
double primal_objective(const Problem& problem, const WeightVector& w);

/// J_mu(w) given the clique scores of w and ||w||^2.
double smoothed_from_scores(const Problem& problem, const ScoreSet& scores, double w_norm_sq,
                            double mu);
double smoothed_primal(const Problem& problem, const WeightVector& w, double mu);
/// grad J_mu(w) = lambda w - F[psi; alpha_mu(w)].
WeightVector smoothed_primal_gradient(const Problem& problem, const WeightVector& w, double mu);

/// D(alpha) given ||w(alpha)||^2.
double dual_from_norm(const Problem& problem, const MarginalSet& marginals,
                      double w_alpha_norm_sq);
double dual_objective(const Problem& problem, const MarginalSet& marginals);

}  // namespace egap
