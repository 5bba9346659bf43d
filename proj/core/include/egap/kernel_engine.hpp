#pragma once

// Kernelized weights. The primal iterate is never formed; it is carried as a
// distribution beta in S^n with (w)_c = (1/lambda) F[psi_c; beta], and every
// inner product with w goes through clique kernels
//   <psi^i_{y_c}, psi^j_{y'_c}> = k(y^i_c, y^j_c) - k(y^i_c, y'_c) - k(y_c, y^j_c) + k(y_c, y'_c)
// where the node-level k is [labels equal] * kappa(x^i_t, x^j_u) and the edge-level
// k is [transitions equal]. Both also require the two cliques to share a template.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "egap/m3n_problem.hpp"

namespace egap {

/// Base-kernel values between every pair of nodes in the dataset.
class GramCache {
 public:
  explicit GramCache(const Problem& problem);

  std::size_t num_nodes() const noexcept { return count_; }
  std::size_t num_instances() const noexcept { return offsets_.size() - 1; }
  /// Throws StructuralError for an unknown instance or position.
  std::size_t node_index(std::size_t i, std::size_t t) const;
  std::size_t instance_offset(std::size_t i) const { return offsets_[i]; }
  double operator()(std::size_t g, std::size_t h) const { return values_[g * count_ + h]; }
  std::span<const double> row(std::size_t g) const { return {values_.data() + g * count_, count_}; }

 private:
  std::vector<std::size_t> offsets_;
  std::size_t count_ = 0;
  std::vector<double> values_;
};

struct BetaState {
  MarginalSet beta;
  std::shared_ptr<const GramCache> gram;
};

/// beta_{k+1} = (1 - tau) beta_k + tau alpha_hat.
BetaState update_beta(const BetaState& beta, const MarginalSet& alpha_hat, double tau);

class KernelEngine {
 public:
  explicit KernelEngine(const Problem& problem);

  const Problem& problem() const noexcept { return problem_; }
  const std::shared_ptr<const GramCache>& gram() const noexcept { return gram_; }

  /// beta_1 = alpha_0.
  BetaState initial_beta() const;

  /// <psi^i_{y_c}, (w)_c> for the implicit w carried by `beta`.
  double inner_w_psi(const BetaState& beta, std::size_t i, CliqueRef clique,
                     CliqueValue value) const;

  /// All clique scores <psi^i_{y_c}, w_c> for w = (1/lambda) F[psi; marginals].
  ScoreSet scores(const MarginalSet& marginals) const;

  /// ||A^T m||^2 = ||F[psi; m]||^2 through the clique kernels.
  double kernel_norm_sq(const MarginalSet& marginals) const;

  /// Decoding potentials <w, phi(x, y_c)> for an arbitrary input sequence.
  /// Node positions beyond the template range throw StructuralError.
  FactorTable decoding_potentials(const MarginalSet& beta, const ChainInstance& input) const;

 private:
  struct Residuals {
    std::vector<double> node;  // num_nodes x s: mass e_{y*} - m
    std::vector<double> edge;  // edge templates x s x s
  };
  Residuals residuals(const MarginalSet& m) const;
  // kernel-weighted node residuals: out[g][a] = sum_h kappa(g, h) [same template] r_h(a)
  std::vector<double> smooth(const std::vector<double>& node_residuals) const;

  Problem problem_;
  std::shared_ptr<const GramCache> gram_;
  std::vector<std::size_t> node_template_;  // per global node
};

}  // namespace egap
