#include "egap/brute_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "egap/errors.hpp"

namespace egap::oracle {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

// Normalizes exp(logits) to total mass `mass`.
std::vector<double> softmax(const std::vector<double>& logits, double mass) {
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) out[j] = mass * std::exp(logits[j] - lse);
  return out;
}

double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double instance_mass(const ExplicitProblem& ep) {
  return 1.0 / static_cast<double>(ep.size());
}

ExplicitDual combine(const ExplicitDual& a, const ExplicitDual& b, double tau) {
  ExplicitDual out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] = (1.0 - tau) * a[i][j] + tau * b[i][j];
  return out;
}

double inner(const ExplicitDual& a, const ExplicitDual& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) total += a[i][j] * b[i][j];
  return total;
}

// Projects every row of `v` onto the simplex of mass 1/n.
ExplicitDual project_rows(const ExplicitDual& v, double mass) {
  ExplicitDual out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = project_simplex(v[i], mass);
  return out;
}

// ||x - P(x + g)||_inf
double kkt(const ExplicitDual& x, const ExplicitDual& g, double mass) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> moved(x[i].size());
    for (std::size_t j = 0; j < x[i].size(); ++j) moved[j] = x[i][j] + g[i][j];
    const auto p = project_simplex(moved, mass);
    for (std::size_t j = 0; j < p.size(); ++j) worst = std::max(worst, std::abs(x[i][j] - p[j]));
  }
  return worst;
}

double distance_sq(const ExplicitDual& a, const ExplicitDual& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) total += (a[i][j] - b[i][j]) * (a[i][j] - b[i][j]);
  return total;
}

// Generic projected gradient ascent with backtracking and momentum restarts.
template <class Value, class Gradient>
DualOptimum projected_ascent(ExplicitDual x, double mass, Value&& value, Gradient&& gradient,
                             std::size_t max_iter, double tol) {
  double step = 1.0;
  ExplicitDual y = x;
  double momentum = 1.0;
  double fx = value(x);
  DualOptimum out;
  for (std::size_t it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    const ExplicitDual gy = gradient(y);
    const double fy = value(y);
    ExplicitDual candidate;
    double fc = 0.0;
    for (int tries = 0; tries < 200; ++tries) {
      ExplicitDual moved = y;
      for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < y[i].size(); ++j) moved[i][j] += step * gy[i][j];
      candidate = project_rows(moved, mass);
      fc = value(candidate);
      ExplicitDual diff = candidate;
      for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < y[i].size(); ++j) diff[i][j] -= y[i][j];
      if (fc >= fy + inner(gy, diff) - distance_sq(candidate, y) / (2.0 * step) - 1e-15 * std::abs(fy))
        break;
      step *= 0.5;
    }
    if (fc < fx && momentum > 1.0) {
      // Restart: drop momentum and retry from x. A plain step is always taken.
      momentum = 1.0;
      y = x;
      continue;
    }
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const double beta = (momentum - 1.0) / next_momentum;
    ExplicitDual next_y = candidate;
    for (std::size_t i = 0; i < y.size(); ++i)
      for (std::size_t j = 0; j < y[i].size(); ++j)
        next_y[i][j] += beta * (candidate[i][j] - x[i][j]);
    // Keep the extrapolated point feasible.
    y = project_rows(next_y, mass);
    x = std::move(candidate);
    fx = fc;
    momentum = next_momentum;
    step *= 1.25;
    if (it % 20 == 0 || it + 1 == max_iter) {
      out.kkt_residual = kkt(x, gradient(x), mass);
      if (out.kkt_residual < tol) break;
    }
  }
  out.kkt_residual = kkt(x, gradient(x), mass);
  out.value = fx;
  out.alpha = std::move(x);
  return out;
}

}  // namespace

std::vector<Labeling> enumerate_labelings(std::size_t length, std::size_t num_states) {
  std::size_t count = 1;
  for (std::size_t t = 0; t < length; ++t) {
    count *= num_states;
    if (count > kMaxLabelings) throw std::length_error("enumerate_labelings: too many labelings");
  }
  std::vector<Labeling> out;
  out.reserve(count);
  Labeling y(length, 0);
  for (std::size_t c = 0; c < count; ++c) {
    out.push_back(y);
    for (std::size_t t = length; t-- > 0;) {
      if (static_cast<std::size_t>(++y[t]) < num_states) break;
      y[t] = 0;
    }
  }
  return out;
}

double brute_log_partition(const FactorTable& tables) {
  const auto ys = enumerate_labelings(tables.length(), tables.num_states());
  std::vector<double> scores;
  scores.reserve(ys.size());
  for (const auto& y : ys) scores.push_back(labeling_score(tables, y));
  return log_sum_exp(scores);
}

MarginalTables brute_clique_marginals(const FactorTable& tables) {
  const auto ys = enumerate_labelings(tables.length(), tables.num_states());
  std::vector<double> scores;
  for (const auto& y : ys) scores.push_back(labeling_score(tables, y));
  const auto p = softmax(scores, 1.0);
  MarginalTables m(tables.length(), tables.num_states(), 0.0);
  for (std::size_t j = 0; j < ys.size(); ++j) {
    const auto& y = ys[j];
    for (std::size_t t = 0; t < y.size(); ++t) {
      m.node(t, static_cast<std::size_t>(y[t])) += p[j];
      if (t + 1 < y.size())
        m.edge(t, static_cast<std::size_t>(y[t]), static_cast<std::size_t>(y[t + 1])) += p[j];
    }
  }
  return m;
}

Labeling brute_map(const FactorTable& tables) {
  const auto ys = enumerate_labelings(tables.length(), tables.num_states());
  std::size_t best = 0;
  double best_score = kNegInf;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    const double v = labeling_score(tables, ys[j]);
    if (v > best_score) {
      best_score = v;
      best = j;
    }
  }
  return ys[best];
}

ExplicitProblem materialize(const Problem& problem) {
  if (problem.kernel().family != KernelSpec::Family::linear) {
    throw std::invalid_argument("materialize: explicit features require the linear kernel");
  }
  ExplicitProblem ep{problem, {}, {}, {}};
  const std::size_t s = problem.num_states();
  const std::size_t p = problem.feature_dim();
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const auto& inst = problem.instance(i);
    auto ys = enumerate_labelings(inst.length(), s);
    std::vector<WeightVector> psis;
    std::vector<double> losses;
    psis.reserve(ys.size());
    for (const auto& y : ys) {
      WeightVector psi = problem.zero_weights();
      double loss = 0.0;
      for (std::size_t t = 0; t < y.size(); ++t) {
        const auto x = inst.feature(t, p);
        const std::size_t tmpl = problem.node_template(t);
        auto truth_row = psi.node_row(tmpl, static_cast<std::size_t>(inst.labels[t]));
        for (std::size_t d = 0; d < p; ++d) truth_row[d] += x[d];
        auto row = psi.node_row(tmpl, static_cast<std::size_t>(y[t]));
        for (std::size_t d = 0; d < p; ++d) row[d] -= x[d];
        loss += inst.loss(t, static_cast<std::size_t>(y[t]), s);
        if (problem.transition_features() && t + 1 < y.size()) {
          const std::size_t e = problem.edge_template(t);
          psi.edge(e, static_cast<std::size_t>(inst.labels[t]),
                   static_cast<std::size_t>(inst.labels[t + 1])) += 1.0;
          psi.edge(e, static_cast<std::size_t>(y[t]), static_cast<std::size_t>(y[t + 1])) -= 1.0;
        }
      }
      psis.push_back(std::move(psi));
      losses.push_back(loss);
    }
    ep.labelings.push_back(std::move(ys));
    ep.psi.push_back(std::move(psis));
    ep.loss.push_back(std::move(losses));
  }
  return ep;
}

ExplicitDual uniform_dual(const ExplicitProblem& ep) {
  ExplicitDual alpha(ep.size());
  const double mass = instance_mass(ep);
  for (std::size_t i = 0; i < ep.size(); ++i) {
    const auto count = static_cast<double>(ep.labelings[i].size());
    alpha[i].assign(ep.labelings[i].size(), mass / count);
  }
  return alpha;
}

ExplicitDual truth_dual(const ExplicitProblem& ep) {
  ExplicitDual alpha(ep.size());
  for (std::size_t i = 0; i < ep.size(); ++i) {
    alpha[i].assign(ep.labelings[i].size(), 0.0);
    const auto& truth = ep.problem.instance(i).labels;
    const auto it = std::find(ep.labelings[i].begin(), ep.labelings[i].end(), truth);
    alpha[i][static_cast<std::size_t>(it - ep.labelings[i].begin())] = instance_mass(ep);
  }
  return alpha;
}

bool on_simplex(const ExplicitProblem& ep, const ExplicitDual& alpha, double tol) {
  if (alpha.size() != ep.size()) return false;
  const double mass = instance_mass(ep);
  for (std::size_t i = 0; i < ep.size(); ++i) {
    if (alpha[i].size() != ep.labelings[i].size()) return false;
    for (double v : alpha[i])
      if (v < -tol) return false;
    if (std::abs(sum_of(alpha[i]) - mass) > tol) return false;
  }
  return true;
}

MarginalSet marginalize(const ExplicitProblem& ep, const ExplicitDual& alpha) {
  MarginalSet m;
  const std::size_t s = ep.problem.num_states();
  for (std::size_t i = 0; i < ep.size(); ++i) {
    const std::size_t len = ep.problem.instance(i).length();
    MarginalTables tables(len, s, 0.0);
    for (std::size_t j = 0; j < ep.labelings[i].size(); ++j) {
      const auto& y = ep.labelings[i][j];
      for (std::size_t t = 0; t < len; ++t) {
        tables.node(t, static_cast<std::size_t>(y[t])) += alpha[i][j];
        if (t + 1 < len)
          tables.edge(t, static_cast<std::size_t>(y[t]), static_cast<std::size_t>(y[t + 1])) +=
              alpha[i][j];
      }
    }
    m.instances.push_back(std::move(tables));
  }
  return m;
}

WeightVector brute_w(const ExplicitProblem& ep, const ExplicitDual& alpha) {
  WeightVector w = ep.problem.zero_weights();
  for (std::size_t i = 0; i < ep.size(); ++i)
    for (std::size_t j = 0; j < ep.psi[i].size(); ++j) w.add_scaled(ep.psi[i][j], alpha[i][j]);
  w.scale(1.0 / ep.problem.lambda());
  return w;
}

double brute_dual(const ExplicitProblem& ep, const ExplicitDual& alpha) {
  const WeightVector w = brute_w(ep, alpha);
  double loss = 0.0;
  for (std::size_t i = 0; i < ep.size(); ++i)
    for (std::size_t j = 0; j < ep.loss[i].size(); ++j) loss += ep.loss[i][j] * alpha[i][j];
  return -0.5 * ep.problem.lambda() * w.norm_sq() + loss;
}

ExplicitDual brute_dual_gradient(const ExplicitProblem& ep, const ExplicitDual& alpha) {
  const WeightVector w = brute_w(ep, alpha);
  ExplicitDual g(ep.size());
  for (std::size_t i = 0; i < ep.size(); ++i) {
    g[i].resize(ep.psi[i].size());
    for (std::size_t j = 0; j < ep.psi[i].size(); ++j) g[i][j] = ep.loss[i][j] - ep.psi[i][j].dot(w);
  }
  return g;
}

double brute_primal(const ExplicitProblem& ep, const WeightVector& w) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < ep.size(); ++i) {
    double best = kNegInf;
    for (std::size_t j = 0; j < ep.psi[i].size(); ++j)
      best = std::max(best, ep.loss[i][j] - ep.psi[i][j].dot(w));
    hinge += best;
  }
  return 0.5 * ep.problem.lambda() * w.norm_sq() + hinge * instance_mass(ep);
}

double brute_smoothed_primal(const ExplicitProblem& ep, const WeightVector& w, double mu) {
  double total = 0.0;
  for (std::size_t i = 0; i < ep.size(); ++i) {
    std::vector<double> logits(ep.psi[i].size());
    for (std::size_t j = 0; j < logits.size(); ++j)
      logits[j] = (ep.loss[i][j] - ep.psi[i][j].dot(w)) / mu;
    total += mu * log_sum_exp(logits);
  }
  return 0.5 * ep.problem.lambda() * w.norm_sq() + total * instance_mass(ep) -
         mu * ep.problem.d_prox();
}

ExplicitDual brute_alpha_mu(const ExplicitProblem& ep, const WeightVector& w, double mu) {
  ExplicitDual alpha(ep.size());
  for (std::size_t i = 0; i < ep.size(); ++i) {
    std::vector<double> logits(ep.psi[i].size());
    for (std::size_t j = 0; j < logits.size(); ++j)
      logits[j] = (ep.loss[i][j] - ep.psi[i][j].dot(w)) / mu;
    alpha[i] = softmax(logits, instance_mass(ep));
  }
  return alpha;
}

ExplicitDual brute_bregman(const ExplicitProblem& ep, const ExplicitDual& alpha,
                           const ExplicitDual& g) {
  ExplicitDual out(ep.size());
  for (std::size_t i = 0; i < ep.size(); ++i) {
    std::vector<double> logits(alpha[i].size());
    for (std::size_t j = 0; j < logits.size(); ++j)
      logits[j] = alpha[i][j] > 0.0 ? std::log(alpha[i][j]) - g[i][j] : kNegInf;
    out[i] = softmax(logits, instance_mass(ep));
  }
  return out;
}

double prox_divergence(const ExplicitProblem& ep, const ExplicitDual& alpha) {
  double total = 0.0;
  for (const auto& row : alpha)
    for (double v : row)
      if (v > 0.0) total += v * std::log(std::max(v, 1e-300));
  return total + std::log(static_cast<double>(ep.size())) + ep.problem.d_prox();
}

std::vector<double> project_simplex(const std::vector<double>& v, double mass) {
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - mass) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = std::max(v[j] - theta, 0.0);
  return out;
}

ConjugateCheck brute_smoothed_conjugate(const ExplicitProblem& ep, const ExplicitDual& u,
                                        double mu, std::size_t max_iter) {
  if (!(mu > 0.0)) throw std::domain_error("brute_smoothed_conjugate: mu must be positive");
  const double mass = instance_mass(ep);
  ConjugateCheck out;
  out.gradient.resize(ep.size());
  double total = 0.0;
  for (std::size_t i = 0; i < ep.size(); ++i) {
    std::vector<double> logits(u[i].size());
    for (std::size_t j = 0; j < logits.size(); ++j) logits[j] = (u[i][j] + ep.loss[i][j]) / mu;
    total += mu * log_sum_exp(logits);
    out.gradient[i] = softmax(logits, mass);
  }
  out.closed_form = total * mass - mu * ep.problem.d_prox();

  // <u, alpha> - g(alpha) - mu d(alpha) with g(alpha) = -<l, alpha>.
  const auto value = [&](const ExplicitDual& a) {
    double v = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a[i].size(); ++j) v += (u[i][j] + ep.loss[i][j]) * a[i][j];
    return v - mu * prox_divergence(ep, a);
  };
  // Damped mirror ascent in log coordinates. Each step halves the distance of
  // log(alpha) to the maximizer, so it converges geometrically from the uniform start.
  ExplicitDual a = uniform_dual(ep);
  double residual = INFINITY;
  for (std::size_t it = 0; it < max_iter && residual > 1e-13; ++it) {
    residual = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::vector<double> logits(a[i].size());
      double lo = INFINITY;
      double hi = -INFINITY;
      for (std::size_t j = 0; j < a[i].size(); ++j) {
        const double g = u[i][j] + ep.loss[i][j] - mu * (std::log(a[i][j]) + 1.0);
        lo = std::min(lo, g);
        hi = std::max(hi, g);
        logits[j] = std::log(a[i][j]) + 0.5 * g / mu;
      }
      // At an interior maximizer the gradient is constant across labelings.
      residual = std::max(residual, hi - lo);
      a[i] = softmax(logits, mass);
    }
  }
  struct {
    double value;
    double kkt_residual;
  } opt{value(a), residual};
  out.numerical = opt.value;
  out.kkt_residual = opt.kkt_residual;
  return out;
}

DualOptimum maximize_dual(const ExplicitProblem& ep, std::size_t max_iter, double tol) {
  const auto value = [&](const ExplicitDual& a) { return brute_dual(ep, a); };
  const auto gradient = [&](const ExplicitDual& a) { return brute_dual_gradient(ep, a); };
  return projected_ascent(uniform_dual(ep), instance_mass(ep), value, gradient, max_iter, tol);
}

std::vector<ReplicaRecord> brute_solver_replica(const ExplicitProblem& ep,
                                                std::size_t iterations) {
  const Problem& problem = ep.problem;
  if (!(problem.lipschitz() > 0.0)) {
    throw std::domain_error("brute_solver_replica: problem has no curvature (L = 0)");
  }
  std::vector<ReplicaRecord> out;
  const auto snapshot = [&](std::size_t k, double mu, const WeightVector& w,
                            const ExplicitDual& alpha) {
    ReplicaRecord r;
    r.k = k;
    r.tau = 2.0 / (static_cast<double>(k) + 3.0);
    r.mu = mu;
    r.w = w;
    r.alpha = alpha;
    r.primal = brute_primal(ep, w);
    r.dual = brute_dual(ep, alpha);
    r.smoothed = brute_smoothed_primal(ep, w, mu);
    out.push_back(std::move(r));
  };

  double mu = problem.lipschitz() / Problem::sigma();
  const ExplicitDual alpha0 = uniform_dual(ep);
  WeightVector w = brute_w(ep, alpha0);
  ExplicitDual g0 = brute_dual_gradient(ep, alpha0);
  for (auto& row : g0)
    for (double& v : row) v *= -1.0 / mu;
  ExplicitDual alpha = brute_bregman(ep, alpha0, g0);
  snapshot(1, mu, w, alpha);

  for (std::size_t k = 1; k <= iterations; ++k) {
    const double tau = 2.0 / (static_cast<double>(k) + 3.0);
    const ExplicitDual alpha_mu = brute_alpha_mu(ep, w, mu);
    const ExplicitDual alpha_hat = combine(alpha, alpha_mu, tau);
    const WeightVector w_hat = brute_w(ep, alpha_hat);
    w.scale(1.0 - tau);
    w.add_scaled(w_hat, tau);
    ExplicitDual g = brute_dual_gradient(ep, alpha_hat);
    const double eta = -tau / ((1.0 - tau) * mu);
    for (auto& row : g)
      for (double& v : row) v *= eta;
    const ExplicitDual alpha_tilde = brute_bregman(ep, alpha_mu, g);
    alpha = combine(alpha, alpha_tilde, tau);
    mu *= 1.0 - tau;
    snapshot(k + 1, mu, w, alpha);
  }
  return out;
}

std::vector<ExpGradRecord> brute_expgrad_replica(const ExplicitProblem& ep, double eta,
                                                 std::size_t iterations) {
  std::vector<ExpGradRecord> out;
  ExplicitDual alpha = uniform_dual(ep);
  for (std::size_t k = 0; k <= iterations; ++k) {
    out.push_back({alpha, brute_dual(ep, alpha)});
    if (k == iterations) break;
    ExplicitDual g = brute_dual_gradient(ep, alpha);
    for (auto& row : g)
      for (double& v : row) v *= -eta;
    alpha = brute_bregman(ep, alpha, g);
  }
  return out;
}

}  // namespace egap::oracle
