#pragma once

// Excessive gap reduction with entropy (Bregman) projections, run entirely on
// clique marginals. Each step:
//   tau_k     = 2 / (k + 3)
//   alpha_hat = (1 - tau) alpha_k + tau alpha_mu(w_k)
//   w_{k+1}   = (1 - tau) w_k + tau w(alpha_hat)
//   alpha_~   = V(alpha_mu(w_k), -tau / ((1 - tau) mu_k) grad D(alpha_hat))
//   alpha_k+1 = (1 - tau) alpha_k + tau alpha_~
//   mu_{k+1}  = (1 - tau) mu_k = 6 L / (sigma (k + 2) (k + 3))
// which keeps J_mu_k(w_k) <= D(alpha_k) and J(w_k) - D(alpha_k) <= mu_k D_prox.

#include <cstddef>
#include <vector>

#include "egap/kernel_engine.hpp"
#include "egap/m3n_problem.hpp"

namespace egap {

/// Explicit weight vectors.
class ExplicitBackend {
 public:
  using Primal = WeightVector;

  /// Throws std::invalid_argument unless the problem uses the linear kernel.
  explicit ExplicitBackend(const Problem& problem);

  const Problem& problem() const noexcept { return problem_; }
  Primal primal_of(const MarginalSet& marginals) const { return w_of_alpha(problem_, marginals); }
  ScoreSet scores(const Primal& w) const { return psi_scores(problem_, w); }
  double norm_sq(const Primal& w) const { return w.norm_sq(); }
  void blend(Primal& w, double tau, const Primal& w_hat) const;

 private:
  Problem problem_;
};

/// Implicit weights carried by beta (kernel mode).
class KernelBackend {
 public:
  using Primal = BetaState;

  explicit KernelBackend(const Problem& problem) : engine_(problem) {}

  const Problem& problem() const noexcept { return engine_.problem(); }
  const KernelEngine& engine() const noexcept { return engine_; }
  Primal primal_of(const MarginalSet& marginals) const { return {marginals, engine_.gram()}; }
  ScoreSet scores(const Primal& beta) const { return engine_.scores(beta.beta); }
  /// ||w||^2 = ||F[psi; beta]||^2 / lambda^2.
  double norm_sq(const Primal& beta) const;
  void blend(Primal& beta, double tau, const Primal& hat) const {
    beta = update_beta(beta, hat.beta, tau);
  }

 private:
  KernelEngine engine_;
};

template <class Primal>
struct SolverState {
  std::size_t k = 1;
  double mu = 0.0;
  Primal w;
  MarginalSet alpha;
  ScoreSet scores;  // <psi, w_k> on every clique
  double w_norm_sq = 0.0;
  /// All psi vanish (L = 0); w = 0 and alpha is optimal.
  bool degenerate = false;

  bool evaluated = false;
  double primal = 0.0;
  double dual = 0.0;
  double smoothed = 0.0;

  double gap() const noexcept { return primal - dual; }
};

struct TraceRecord {
  std::size_t k = 0;
  double tau = 0.0;
  double mu = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double smoothed_primal = 0.0;
  double bound = 0.0;
  bool egap_ok = false;
  double elapsed_ms = 0.0;
};

struct RunOptions {
  double epsilon = 1e-3;
  std::size_t max_iter = 10000;
  /// Objectives are evaluated every `eval_stride` steps (and on the last).
  std::size_t eval_stride = 1;
};

enum class RunStatus { converged, budget_exhausted, degenerate };

template <class Primal>
struct RunResult {
  SolverState<Primal> state;  // converged state, or the best evaluated one
  std::vector<TraceRecord> trace;
  RunStatus status = RunStatus::budget_exhausted;
  std::size_t steps = 0;
};

/// Relative tolerance used for the excessive gap test.
inline constexpr double kExcessiveGapTolerance = 1e-9;

double tau_schedule(std::size_t k);
/// mu_k = 6 L / (sigma (k + 1) (k + 2)).
double mu_schedule(const Problem& problem, std::size_t k);
/// 6 L D_prox / (sigma (k + 1) (k + 2)).
double gap_bound(const Problem& problem, std::size_t k);
/// 6 L KL(alpha* || alpha_0) / (sigma (k + 1) (k + 2)).
double dual_gap_bound(const Problem& problem, std::size_t k, double kl_to_optimum);
/// 2 + max ||psi|| sqrt(6 D_prox / (lambda epsilon)).
double iteration_budget(const Problem& problem, double epsilon);

template <class Backend>
class EgapSolver {
 public:
  using Primal = typename Backend::Primal;
  using State = SolverState<Primal>;

  explicit EgapSolver(const Problem& problem) : backend_(problem) {}

  const Backend& backend() const noexcept { return backend_; }
  const Problem& problem() const noexcept { return backend_.problem(); }

  /// k = 1: mu_1 = L / sigma, w_1 = w(alpha_0), alpha_1 = V(alpha_0, -(1/mu_1) grad D(alpha_0)).
  State initialize() const;
  /// One iteration; throws NumericalError on NaN/inf.
  void step(State& state) const;
  /// Fills the objective cache (J, D, J_mu) of `state`.
  void evaluate(State& state) const;
  bool verify_excessive_gap(State& state) const;
  RunResult<Primal> run(const RunOptions& options) const;

  TraceRecord record(const State& state, double elapsed_ms) const;

 private:
  Backend backend_;
};

using ExplicitSolver = EgapSolver<ExplicitBackend>;
using KernelSolver = EgapSolver<KernelBackend>;

extern template class EgapSolver<ExplicitBackend>;
extern template class EgapSolver<KernelBackend>;

}  // namespace egap
