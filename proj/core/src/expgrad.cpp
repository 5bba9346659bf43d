#include "egap/expgrad.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "egap/errors.hpp"
#include "egap/parallel.hpp"

namespace egap {

double default_expgrad_step(const Problem& problem) {
  return problem.lipschitz() > 0.0 ? 1.0 / problem.lipschitz() : 1.0;
}

namespace {

MarginalSet marginals_of(const Problem& problem, const std::vector<FactorTable>& potentials) {
  MarginalSet m;
  m.instances.resize(potentials.size());
  const double mass = problem.instance_mass();
  parallel_for(potentials.size(), [&](std::size_t i) {
    MarginalTables tables = clique_marginals(potentials[i]);
    for (double& v : tables.node_values()) v *= mass;
    for (double& v : tables.edge_values()) v *= mass;
    m[i] = std::move(tables);
  });
  return m;
}

}  // namespace

template <class Backend>
ExpGradResult<typename Backend::Primal> expgrad_run(const Backend& backend,
                                                    const ExpGradOptions& options) {
  const Problem& p = backend.problem();
  const double eta = options.step_size == 0.0 ? default_expgrad_step(p) : options.step_size;
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw std::domain_error("expgrad: step size must be positive");
  }
  if (!(options.epsilon > 0.0)) throw std::domain_error("expgrad: epsilon must be positive");

  const auto start = std::chrono::steady_clock::now();
  ExpGradResult<typename Backend::Primal> result;
  result.step_size = eta;
  result.potentials.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    result.potentials.emplace_back(p.instance(i).length(), p.num_states(), 0.0);
  }

  double previous_dual = -std::numeric_limits<double>::infinity();
  std::size_t decreasing = 0;
  for (std::size_t k = 1;; ++k) {
    result.alpha = marginals_of(p, result.potentials);
    result.w = backend.primal_of(result.alpha);
    const ScoreSet scores = backend.scores(result.w);
    const double norm_sq = backend.norm_sq(result.w);
    result.primal = primal_from_scores(p, scores, norm_sq);
    result.dual = dual_from_norm(p, result.alpha, norm_sq);
    if (!std::isfinite(result.primal) || !std::isfinite(result.dual)) {
      throw NumericalError("expgrad: non-finite objective at k = " + std::to_string(k));
    }

    TraceRecord r;
    r.k = k;
    r.tau = eta;
    r.primal = result.primal;
    r.dual = result.dual;
    r.gap = result.gap();
    r.smoothed_primal = std::numeric_limits<double>::quiet_NaN();
    r.bound = std::numeric_limits<double>::infinity();
    r.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    result.trace.push_back(r);

    decreasing = result.dual < previous_dual ? decreasing + 1 : 0;
    if (decreasing >= options.divergence_window) {
      throw NumericalError("expgrad: dual objective decreased for " + std::to_string(decreasing) +
                           " consecutive steps; step size " + std::to_string(eta) +
                           " is too large");
    }
    previous_dual = result.dual;

    if (result.gap() < options.epsilon) {
      result.status = RunStatus::converged;
      return result;
    }
    if (result.steps >= options.max_iter) {
      result.status = RunStatus::budget_exhausted;
      return result;
    }

    parallel_for(p.size(), [&](std::size_t i) {
      const FactorTable g = loss_augmented_potentials(p, scores[i], i, eta);
      auto node = result.potentials[i].node_values();
      auto g_node = g.node_values();
      for (std::size_t j = 0; j < node.size(); ++j) node[j] += g_node[j];
      auto edge = result.potentials[i].edge_values();
      auto g_edge = g.edge_values();
      for (std::size_t j = 0; j < edge.size(); ++j) edge[j] += g_edge[j];
    });
    ++result.steps;
  }
}

template ExpGradResult<WeightVector> expgrad_run<ExplicitBackend>(const ExplicitBackend&,
                                                                  const ExpGradOptions&);
template ExpGradResult<BetaState> expgrad_run<KernelBackend>(const KernelBackend&,
                                                             const ExpGradOptions&);

}  // namespace egap
