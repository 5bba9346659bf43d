#include "egap/egap_solver.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "egap/errors.hpp"

namespace egap {

namespace {

void blend_scores(ScoreSet& scores, double tau, const ScoreSet& hat) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto node = scores[i].node_values();
    auto node_hat = hat[i].node_values();
    for (std::size_t j = 0; j < node.size(); ++j) node[j] = (1.0 - tau) * node[j] + tau * node_hat[j];
    auto edge = scores[i].edge_values();
    auto edge_hat = hat[i].edge_values();
    for (std::size_t j = 0; j < edge.size(); ++j) edge[j] = (1.0 - tau) * edge[j] + tau * edge_hat[j];
  }
}

void require_finite(const ScoreSet& scores, const char* what) {
  for (const auto& table : scores) {
    for (double v : table.node_values()) {
      if (!std::isfinite(v)) throw NumericalError(std::string("egap step: non-finite ") + what);
    }
    for (double v : table.edge_values()) {
      if (!std::isfinite(v)) throw NumericalError(std::string("egap step: non-finite ") + what);
    }
  }
}

// Optimal dual point when every psi vanishes: all mass on a maximum-loss labeling.
MarginalSet degenerate_alpha(const Problem& problem, const ScoreSet& scores) {
  MarginalSet alpha = uniform_alpha(problem);
  const double mass = problem.instance_mass();
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const auto& losses = problem.instance(i).losses;
    bool any_loss = false;
    for (double v : losses) any_loss = any_loss || v != 0.0;
    if (!any_loss) continue;
    const Labeling y = map_assignment(loss_augmented_potentials(problem, scores[i], i, 1.0));
    MarginalTables delta(y.size(), problem.num_states(), 0.0);
    for (std::size_t t = 0; t < y.size(); ++t) {
      delta.node(t, static_cast<std::size_t>(y[t])) = mass;
      if (t + 1 < y.size()) {
        delta.edge(t, static_cast<std::size_t>(y[t]), static_cast<std::size_t>(y[t + 1])) = mass;
      }
    }
    alpha[i] = std::move(delta);
  }
  return alpha;
}

}  // namespace

ExplicitBackend::ExplicitBackend(const Problem& problem) : problem_(problem) {
  if (problem_.kernel().family != KernelSpec::Family::linear) {
    throw std::invalid_argument("explicit features require the linear kernel");
  }
}

void ExplicitBackend::blend(Primal& w, double tau, const Primal& w_hat) const {
  w.scale(1.0 - tau);
  w.add_scaled(w_hat, tau);
}

double KernelBackend::norm_sq(const Primal& beta) const {
  const double lambda = engine_.problem().lambda();
  return engine_.kernel_norm_sq(beta.beta) / (lambda * lambda);
}

double tau_schedule(std::size_t k) { return 2.0 / (static_cast<double>(k) + 3.0); }

double mu_schedule(const Problem& problem, std::size_t k) {
  const double kk = static_cast<double>(k);
  return 6.0 * problem.lipschitz() / (Problem::sigma() * (kk + 1.0) * (kk + 2.0));
}

double gap_bound(const Problem& problem, std::size_t k) {
  return mu_schedule(problem, k) * problem.d_prox();
}

double dual_gap_bound(const Problem& problem, std::size_t k, double kl_to_optimum) {
  return mu_schedule(problem, k) * kl_to_optimum;
}

double iteration_budget(const Problem& problem, double epsilon) {
  return 2.0 + problem.a_norm() * std::sqrt(6.0 * problem.d_prox() / (problem.lambda() * epsilon));
}

template <class Backend>
auto EgapSolver<Backend>::initialize() const -> State {
  const Problem& p = problem();
  State state;
  state.k = 1;
  state.mu = p.mu1();
  const MarginalSet alpha0 = uniform_alpha(p);
  state.w = backend_.primal_of(alpha0);
  state.scores = backend_.scores(state.w);
  state.w_norm_sq = backend_.norm_sq(state.w);
  if (p.lipschitz() == 0.0) {
    state.degenerate = true;
    state.mu = 0.0;
    state.alpha = degenerate_alpha(p, state.scores);
    return state;
  }
  // alpha_0 is uniform, so V(alpha_0, -(1/mu_1) grad D(alpha_0)) is alpha_mu_1(w_1).
  state.alpha = alpha_mu_from_scores(p, state.scores, state.mu);
  return state;
}

template <class Backend>
void EgapSolver<Backend>::step(State& state) const {
  if (state.degenerate) return;
  const Problem& p = problem();
  const double tau = tau_schedule(state.k);

  const MarginalSet alpha_mu = alpha_mu_from_scores(p, state.scores, state.mu);
  const MarginalSet alpha_hat = convex_combination(state.alpha, alpha_mu, tau);
  const Primal w_hat = backend_.primal_of(alpha_hat);
  const ScoreSet scores_hat = backend_.scores(w_hat);
  require_finite(scores_hat, "scores of w(alpha_hat)");

  const MarginalSet alpha_tilde =
      bregman_tilde_from_scores(p, state.scores, scores_hat, state.mu, tau);

  backend_.blend(state.w, tau, w_hat);
  blend_scores(state.scores, tau, scores_hat);
  state.alpha = convex_combination(state.alpha, alpha_tilde, tau);
  state.k += 1;
  state.mu = mu_schedule(p, state.k);
  state.evaluated = false;
  if (!std::isfinite(state.mu) || !(state.mu > 0.0)) {
    throw NumericalError("egap step: smoothing parameter underflowed at k = " +
                         std::to_string(state.k));
  }
}

template <class Backend>
void EgapSolver<Backend>::evaluate(State& state) const {
  if (state.evaluated) return;
  const Problem& p = problem();
  state.w_norm_sq = backend_.norm_sq(state.w);
  state.primal = primal_from_scores(p, state.scores, state.w_norm_sq);
  state.dual = dual_from_norm(p, state.alpha, backend_.norm_sq(backend_.primal_of(state.alpha)));
  state.smoothed = state.mu > 0.0 ? smoothed_from_scores(p, state.scores, state.w_norm_sq, state.mu)
                                  : state.primal;
  if (!std::isfinite(state.primal) || !std::isfinite(state.dual) ||
      !std::isfinite(state.smoothed)) {
    throw NumericalError("egap: non-finite objective at k = " + std::to_string(state.k));
  }
  state.evaluated = true;
}

template <class Backend>
bool EgapSolver<Backend>::verify_excessive_gap(State& state) const {
  evaluate(state);
  return state.smoothed <= state.dual + kExcessiveGapTolerance * (1.0 + std::abs(state.dual));
}

template <class Backend>
TraceRecord EgapSolver<Backend>::record(const State& state, double elapsed_ms) const {
  TraceRecord r;
  r.k = state.k;
  r.tau = tau_schedule(state.k);
  r.mu = state.mu;
  r.primal = state.primal;
  r.dual = state.dual;
  r.gap = state.gap();
  r.smoothed_primal = state.smoothed;
  r.bound = state.degenerate ? 0.0 : gap_bound(problem(), state.k);
  r.egap_ok =
      state.smoothed <= state.dual + kExcessiveGapTolerance * (1.0 + std::abs(state.dual));
  r.elapsed_ms = elapsed_ms;
  return r;
}

template <class Backend>
auto EgapSolver<Backend>::run(const RunOptions& options) const -> RunResult<Primal> {
  if (!(options.epsilon > 0.0)) throw std::domain_error("run: epsilon must be positive");
  const std::size_t stride = options.eval_stride == 0 ? 1 : options.eval_stride;
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  };

  RunResult<Primal> result;
  State state = initialize();
  evaluate(state);
  result.trace.push_back(record(state, elapsed()));
  if (state.degenerate) {
    result.status = RunStatus::degenerate;
    result.state = std::move(state);
    return result;
  }

  State best = state;
  while (state.gap() >= options.epsilon && result.steps < options.max_iter) {
    step(state);
    ++result.steps;
    if (result.steps % stride != 0 && result.steps != options.max_iter) continue;
    evaluate(state);
    result.trace.push_back(record(state, elapsed()));
    if (state.gap() < best.gap()) best = state;
  }
  if (state.evaluated && state.gap() < options.epsilon) {
    result.status = RunStatus::converged;
    result.state = std::move(state);
  } else {
    result.status = RunStatus::budget_exhausted;
    result.state = std::move(best);
  }
  return result;
}

template class EgapSolver<ExplicitBackend>;
template class EgapSolver<KernelBackend>;

}  // namespace egap
