#pragma once

// Exponentiated-gradient dual ascent with a fixed step:
//   alpha^i  <-  alpha^i exp(eta grad D(alpha)^i) / normalizer
// The joint stays in the exponential family of the chain, so the update is a
// per-clique increment of log-potentials followed by re-marginalization.
// Progress is certified by the duality gap J(w(alpha)) - D(alpha).

#include <cstddef>
#include <vector>

#include "egap/egap_solver.hpp"

namespace egap {

struct ExpGradOptions {
  /// eta; 0 selects 1/L (or 1 when L = 0).
  double step_size = 0.0;
  double epsilon = 1e-3;
  std::size_t max_iter = 100000;
  /// Consecutive decreases of D that count as divergence.
  std::size_t divergence_window = 20;
};

double default_expgrad_step(const Problem& problem);

template <class Primal>
struct ExpGradResult {
  MarginalSet alpha;
  Primal w;  // w(alpha)
  std::vector<FactorTable> potentials;
  double primal = 0.0;
  double dual = 0.0;
  double step_size = 0.0;
  /// Rows use tau = eta, mu = 0, smoothed_primal = NaN, bound = +inf.
  std::vector<TraceRecord> trace;
  RunStatus status = RunStatus::budget_exhausted;
  std::size_t steps = 0;

  double gap() const noexcept { return primal - dual; }
};

/// Throws std::domain_error for a non-positive step or epsilon and
/// NumericalError on divergence or a non-finite objective.
template <class Backend>
ExpGradResult<typename Backend::Primal> expgrad_run(const Backend& backend,
                                                    const ExpGradOptions& options);

extern template ExpGradResult<WeightVector> expgrad_run<ExplicitBackend>(const ExplicitBackend&,
                                                                         const ExpGradOptions&);
extern template ExpGradResult<BetaState> expgrad_run<KernelBackend>(const KernelBackend&,
                                                                    const ExpGradOptions&);

}  // namespace egap
