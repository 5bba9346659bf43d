#include "egap/m3n_problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "egap/errors.hpp"
#include "egap/parallel.hpp"

namespace egap {

// ---------------------------------------------------------------------------
// WeightVector

WeightVector::WeightVector(std::size_t num_states, std::size_t feature_dim,
                           std::size_t node_templates, std::size_t edge_templates)
    : states_(num_states),
      dim_(feature_dim),
      node_templates_(node_templates),
      edge_templates_(edge_templates),
      values_(node_templates * num_states * feature_dim +
                  edge_templates * num_states * num_states,
              0.0) {}

double WeightVector::norm_sq() const {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return sum;
}

double WeightVector::dot(const WeightVector& other) const {
  if (!same_shape(other)) throw StructuralError("weight vector: shape mismatch in dot");
  double sum = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) sum += values_[k] * other.values_[k];
  return sum;
}

void WeightVector::scale(double factor) {
  for (double& v : values_) v *= factor;
}

void WeightVector::add_scaled(const WeightVector& other, double factor) {
  if (!same_shape(other)) throw StructuralError("weight vector: shape mismatch in add_scaled");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += factor * other.values_[k];
}

bool WeightVector::same_shape(const WeightVector& other) const noexcept {
  return states_ == other.states_ && dim_ == other.dim_ &&
         node_templates_ == other.node_templates_ && edge_templates_ == other.edge_templates_;
}

// ---------------------------------------------------------------------------
// MarginalSet helpers

MarginalSet convex_combination(const MarginalSet& a, const MarginalSet& b, double tau) {
  if (a.size() != b.size()) throw StructuralError("marginal set: instance count mismatch");
  MarginalSet out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_shape(b[i])) throw StructuralError("marginal set: table shape mismatch");
    auto combine = [tau](std::span<double> dst, std::span<const double> src) {
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = (1.0 - tau) * dst[k] + tau * src[k];
    };
    combine(out[i].node_values(), b[i].node_values());
    combine(out[i].edge_values(), b[i].edge_values());
  }
  return out;
}

bool satisfies_marginal_invariants(const MarginalSet& m, double mass, double tol) {
  const double slack = tol * std::max(mass, 1e-300);
  for (const auto& tables : m.instances) {
    const std::size_t s = tables.num_states();
    for (double v : tables.node_values())
      if (!(v >= 0.0)) return false;
    for (double v : tables.edge_values())
      if (!(v >= 0.0)) return false;
    for (std::size_t t = 0; t < tables.length(); ++t) {
      const auto row = tables.node_row(t);
      if (std::abs(std::accumulate(row.begin(), row.end(), 0.0) - mass) > slack) return false;
    }
    for (std::size_t t = 0; t < tables.num_edges(); ++t) {
      double total = 0.0;
      for (std::size_t a = 0; a < s; ++a) {
        double row = 0.0;
        double col = 0.0;
        for (std::size_t b = 0; b < s; ++b) {
          row += tables.edge(t, a, b);
          col += tables.edge(t, b, a);
        }
        total += row;
        if (std::abs(row - tables.node(t, a)) > slack) return false;
        if (std::abs(col - tables.node(t + 1, a)) > slack) return false;
      }
      if (std::abs(total - mass) > slack) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Problem

std::string tying_name(Tying tying) { return tying == Tying::tied ? "tied" : "per-position"; }

Tying parse_tying(const std::string& name) {
  if (name == "tied") return Tying::tied;
  if (name == "per-position" || name == "per_position") return Tying::per_position;
  throw std::invalid_argument("unknown tying '" + name + "'");
}

std::size_t Problem::num_node_templates() const noexcept {
  return options_.tying == Tying::tied ? 1 : max_length_;
}

std::size_t Problem::num_edge_templates() const noexcept {
  if (!options_.transition_features) return 0;
  return options_.tying == Tying::tied ? 1 : (max_length_ > 0 ? max_length_ - 1 : 0);
}

WeightVector Problem::zero_weights() const {
  return WeightVector(num_states(), feature_dim(), num_node_templates(), num_edge_templates());
}

namespace {

// <e_a - e_b, e_c - e_d> for one-hot vectors.
inline double indicator_inner(int a, int b, int c, int d) {
  return static_cast<double>((a == c) - (a == d) - (b == c) + (b == d));
}

}  // namespace

PsiNormBound max_psi_norm_sq(const Problem& problem, std::size_t i) {
  const auto& inst = problem.instance(i);
  const std::size_t len = inst.length();
  const std::size_t s = problem.num_states();
  const std::size_t p = problem.feature_dim();
  const bool edges = problem.transition_features();

  std::vector<double> gram(len * len);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t u = 0; u < len; ++u)
      gram[t * len + u] = problem.kernel()(inst.feature(t, p), inst.feature(u, p));

  // Per-position templates put every clique of an instance in its own block,
  // so the squared norm decomposes over cliques and the maximum is exact.
  if (problem.tying() == Tying::per_position) {
    double total = 0.0;
    for (std::size_t t = 0; t < len; ++t) total += 2.0 * gram[t * len + t];
    if (edges) total += 2.0 * static_cast<double>(len - 1);
    return {total, true};
  }

  const double count = std::pow(static_cast<double>(s), static_cast<double>(len));
  if (count <= static_cast<double>(problem.options().exact_norm_limit)) {
    const auto& truth = inst.labels;
    Labeling y(len, 0);
    double best = 0.0;
    for (;;) {
      double value = 0.0;
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t u = 0; u < len; ++u)
          value += gram[t * len + u] * indicator_inner(truth[t], y[t], truth[u], y[u]);
      if (edges) {
        auto pair = [&](const Labeling& lab, std::size_t t) {
          return lab[t] * static_cast<int>(s) + lab[t + 1];
        };
        for (std::size_t t = 0; t + 1 < len; ++t)
          for (std::size_t u = 0; u + 1 < len; ++u)
            value += indicator_inner(pair(truth, t), pair(y, t), pair(truth, u), pair(y, u));
      }
      best = std::max(best, value);
      std::size_t pos = len;
      while (pos > 0) {
        --pos;
        if (static_cast<std::size_t>(++y[pos]) < s) break;
        y[pos] = 0;
        if (pos == 0) return {best, true};
      }
    }
  }

  // ||sum_c psi_c|| <= sum_c max ||psi_c|| within each shared block.
  double node_sum = 0.0;
  for (std::size_t t = 0; t < len; ++t) node_sum += std::sqrt(2.0 * gram[t * len + t]);
  const double edge_sum = edges ? std::sqrt(2.0) * static_cast<double>(len - 1) : 0.0;
  return {node_sum * node_sum + edge_sum * edge_sum, false};
}

Problem build_problem(Dataset dataset, double lambda, ProblemOptions options) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::domain_error("build_problem: lambda must be a positive finite number");
  dataset.validate();
  options.kernel.validate();

  Problem problem;
  problem.data_ = std::make_shared<const Dataset>(std::move(dataset));
  problem.lambda_ = lambda;
  problem.options_ = options;
  const auto& data = *problem.data_;
  for (const auto& inst : data.instances)
    problem.max_length_ = std::max(problem.max_length_, inst.length());

  double worst = 0.0;
  double log_sum = 0.0;
  problem.log_label_counts_.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto bound = max_psi_norm_sq(problem, i);
    worst = std::max(worst, bound.value);
    problem.a_norm_exact_ = problem.a_norm_exact_ && bound.exact;
    problem.log_label_counts_[i] =
        static_cast<double>(data[i].length()) * std::log(static_cast<double>(data.num_states));
    log_sum += problem.log_label_counts_[i];
  }
  problem.a_norm_ = std::sqrt(worst);
  problem.lipschitz_ = worst / lambda;
  problem.d_prox_ = log_sum / static_cast<double>(data.size());
  return problem;
}

// ---------------------------------------------------------------------------
// Factorized maps

MarginalSet uniform_alpha(const Problem& problem) {
  const double s = static_cast<double>(problem.num_states());
  const double mass = problem.instance_mass();
  MarginalSet out;
  out.instances.reserve(problem.size());
  for (std::size_t i = 0; i < problem.size(); ++i) {
    MarginalTables tables(problem.instance(i).length(), problem.num_states());
    std::fill(tables.node_values().begin(), tables.node_values().end(), mass / s);
    std::fill(tables.edge_values().begin(), tables.edge_values().end(), mass / (s * s));
    out.instances.push_back(std::move(tables));
  }
  return out;
}

namespace {

void check_marginal_shapes(const Problem& problem, const MarginalSet& m) {
  if (m.size() != problem.size())
    throw StructuralError("marginal set has " + std::to_string(m.size()) +
                          " instances, problem has " + std::to_string(problem.size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i].length() != problem.instance(i).length() ||
        m[i].num_states() != problem.num_states())
      throw StructuralError("marginal tables of instance " + std::to_string(i) +
                            " do not match the instance shape");
}

void check_weight_shape(const Problem& problem, const WeightVector& w) {
  if (!w.same_shape(problem.zero_weights()))
    throw StructuralError("weight vector shape does not match the problem");
}

void check_scores(const Problem& problem, const ScoreSet& scores) {
  if (scores.size() != problem.size()) throw StructuralError("score set: instance count mismatch");
}

// Adds F[psi^i; m^i] into `out`.
void accumulate_expectations(const Problem& problem, std::size_t i, const MarginalTables& m,
                             WeightVector& out) {
  const auto& inst = problem.instance(i);
  const std::size_t s = problem.num_states();
  const std::size_t p = problem.feature_dim();
  for (std::size_t t = 0; t < inst.length(); ++t) {
    const auto x = inst.feature(t, p);
    const std::size_t tmpl = problem.node_template(t);
    const auto truth = static_cast<std::size_t>(inst.labels[t]);
    const auto row = m.node_row(t);
    const double mass = std::accumulate(row.begin(), row.end(), 0.0);
    auto target = out.node_row(tmpl, truth);
    for (std::size_t d = 0; d < p; ++d) target[d] += mass * x[d];
    for (std::size_t a = 0; a < s; ++a) {
      auto dst = out.node_row(tmpl, a);
      for (std::size_t d = 0; d < p; ++d) dst[d] -= row[a] * x[d];
    }
  }
  if (!problem.transition_features()) return;
  for (std::size_t t = 0; t + 1 < inst.length(); ++t) {
    const std::size_t tmpl = problem.edge_template(t);
    const auto block = m.edge_block(t);
    const double mass = std::accumulate(block.begin(), block.end(), 0.0);
    out.edge(tmpl, static_cast<std::size_t>(inst.labels[t]),
             static_cast<std::size_t>(inst.labels[t + 1])) += mass;
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t b = 0; b < s; ++b) out.edge(tmpl, a, b) -= m.edge(t, a, b);
  }
}

template <class PerInstance>
double ordered_sum(std::size_t n, PerInstance&& value_of) {
  std::vector<double> parts(n);
  parallel_for(n, [&](std::size_t i) { parts[i] = value_of(i); });
  double total = 0.0;
  for (double v : parts) total += v;
  return total;
}

}  // namespace

WeightVector feature_expectations(const Problem& problem, const MarginalSet& marginals) {
  check_marginal_shapes(problem, marginals);
  const WeightVector zero = problem.zero_weights();
  std::vector<WeightVector> parts(problem.size(), zero);
  parallel_for(problem.size(), [&](std::size_t i) {
    accumulate_expectations(problem, i, marginals[i], parts[i]);
  });
  WeightVector out = zero;
  for (const auto& part : parts) out.add_scaled(part, 1.0);
  return out;
}

WeightVector w_of_alpha(const Problem& problem, const MarginalSet& marginals) {
  WeightVector w = feature_expectations(problem, marginals);
  w.scale(1.0 / problem.lambda());
  return w;
}

ScoreSet psi_scores(const Problem& problem, const WeightVector& w) {
  check_weight_shape(problem, w);
  const std::size_t s = problem.num_states();
  const std::size_t p = problem.feature_dim();
  ScoreSet out(problem.size());
  parallel_for(problem.size(), [&](std::size_t i) {
    const auto& inst = problem.instance(i);
    ChainTables scores(inst.length(), s);
    std::vector<double> act(s);
    for (std::size_t t = 0; t < inst.length(); ++t) {
      const auto x = inst.feature(t, p);
      const std::size_t tmpl = problem.node_template(t);
      for (std::size_t a = 0; a < s; ++a) {
        const auto row = w.node_row(tmpl, a);
        double v = 0.0;
        for (std::size_t d = 0; d < p; ++d) v += row[d] * x[d];
        act[a] = v;
      }
      const double at_truth = act[static_cast<std::size_t>(inst.labels[t])];
      for (std::size_t a = 0; a < s; ++a) scores.node(t, a) = at_truth - act[a];
    }
    if (problem.transition_features()) {
      for (std::size_t t = 0; t + 1 < inst.length(); ++t) {
        const std::size_t tmpl = problem.edge_template(t);
        const double at_truth = w.edge(tmpl, static_cast<std::size_t>(inst.labels[t]),
                                       static_cast<std::size_t>(inst.labels[t + 1]));
        for (std::size_t a = 0; a < s; ++a)
          for (std::size_t b = 0; b < s; ++b) scores.edge(t, a, b) = at_truth - w.edge(tmpl, a, b);
      }
    }
    out[i] = std::move(scores);
  });
  return out;
}

FactorTable loss_augmented_potentials(const Problem& problem, const ChainTables& scores,
                                      std::size_t i, double scale) {
  if (i >= problem.size()) throw StructuralError("instance index out of range");
  const auto& inst = problem.instance(i);
  const std::size_t s = problem.num_states();
  if (scores.length() != inst.length() || scores.num_states() != s)
    throw StructuralError("score tables do not match instance " + std::to_string(i));
  FactorTable h(inst.length(), s);
  for (std::size_t t = 0; t < inst.length(); ++t)
    for (std::size_t a = 0; a < s; ++a)
      h.node(t, a) = scale * (inst.loss(t, a, s) - scores.node(t, a));
  const auto src = scores.edge_values();
  auto dst = h.edge_values();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = -scale * src[k];
  return h;
}

FactorTable loss_augmented_potentials(const Problem& problem, const WeightVector& w,
                                      std::size_t i, double scale) {
  if (i >= problem.size()) throw StructuralError("instance index out of range");
  const auto scores = psi_scores(problem, w);
  return loss_augmented_potentials(problem, scores[i], i, scale);
}

MarginalSet alpha_mu_from_scores(const Problem& problem, const ScoreSet& scores, double mu) {
  if (!(mu > 0.0)) throw std::domain_error("alpha_mu: mu must be positive");
  check_scores(problem, scores);
  const double mass = problem.instance_mass();
  MarginalSet out;
  out.instances.resize(problem.size());
  parallel_for(problem.size(), [&](std::size_t i) {
    auto tables = clique_marginals(loss_augmented_potentials(problem, scores[i], i, 1.0 / mu));
    for (double& v : tables.node_values()) v *= mass;
    for (double& v : tables.edge_values()) v *= mass;
    out[i] = std::move(tables);
  });
  return out;
}

MarginalSet alpha_mu_of_w(const Problem& problem, const WeightVector& w, double mu) {
  if (!(mu > 0.0)) throw std::domain_error("alpha_mu: mu must be positive");
  return alpha_mu_from_scores(problem, psi_scores(problem, w), mu);
}

double grad_D_clique(const Problem& problem, const MarginalSet& marginals, std::size_t i,
                     CliqueRef clique, CliqueValue value) {
  if (i >= problem.size()) throw StructuralError("grad_D_clique: instance index out of range");
  const auto& inst = problem.instance(i);
  const auto s = static_cast<int>(problem.num_states());
  const bool is_node = clique.kind == CliqueRef::Kind::node;
  const std::size_t limit = is_node ? inst.length() : (inst.length() > 0 ? inst.length() - 1 : 0);
  if (clique.position >= limit || value.first < 0 || value.first >= s ||
      (!is_node && (value.second < 0 || value.second >= s)))
    throw StructuralError("grad_D_clique: clique or value out of range");
  const auto scores = psi_scores(problem, w_of_alpha(problem, marginals));
  const auto a = static_cast<std::size_t>(value.first);
  if (is_node)
    return inst.loss(clique.position, a, problem.num_states()) -
           scores[i].node(clique.position, a);
  return -scores[i].edge(clique.position, a, static_cast<std::size_t>(value.second));
}

double grad_D_entry(const Problem& problem, const MarginalSet& marginals, std::size_t i,
                    std::span<const int> labeling) {
  if (i >= problem.size()) throw StructuralError("grad_D_entry: instance index out of range");
  const auto scores = psi_scores(problem, w_of_alpha(problem, marginals));
  const auto h = loss_augmented_potentials(problem, scores[i], i, 1.0);
  return labeling_score(h, labeling);
}

MarginalSet bregman_tilde_from_scores(const Problem& problem, const ScoreSet& scores_k,
                                      const ScoreSet& scores_hat, double mu, double tau) {
  if (!(mu > 0.0)) throw std::domain_error("bregman_tilde: mu must be positive");
  if (!(tau >= 0.0 && tau < 1.0)) throw std::domain_error("bregman_tilde: tau must lie in [0, 1)");
  check_scores(problem, scores_k);
  check_scores(problem, scores_hat);
  // -eta = tau / ((1 - tau) mu) multiplies the gradient terms l - <psi, w(alpha_hat)>.
  const double pull = tau / ((1.0 - tau) * mu);
  const double mass = problem.instance_mass();
  MarginalSet out;
  out.instances.resize(problem.size());
  parallel_for(problem.size(), [&](std::size_t i) {
    FactorTable h = loss_augmented_potentials(problem, scores_k[i], i, 1.0 / mu);
    const FactorTable g = loss_augmented_potentials(problem, scores_hat[i], i, 1.0);
    auto add = [pull](std::span<double> dst, std::span<const double> src) {
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += pull * src[k];
    };
    add(h.node_values(), g.node_values());
    add(h.edge_values(), g.edge_values());
    auto tables = clique_marginals(h);
    for (double& v : tables.node_values()) v *= mass;
    for (double& v : tables.edge_values()) v *= mass;
    out[i] = std::move(tables);
  });
  return out;
}

MarginalSet bregman_tilde(const Problem& problem, const WeightVector& w_k, double mu, double tau,
                          const WeightVector& f_hat) {
  WeightVector w_hat = f_hat;
  w_hat.scale(1.0 / problem.lambda());
  return bregman_tilde_from_scores(problem, psi_scores(problem, w_k), psi_scores(problem, w_hat),
                                   mu, tau);
}

// ---------------------------------------------------------------------------
// Objectives

double expected_loss(const Problem& problem, const MarginalSet& marginals) {
  check_marginal_shapes(problem, marginals);
  const std::size_t s = problem.num_states();
  return ordered_sum(problem.size(), [&](std::size_t i) {
    const auto& inst = problem.instance(i);
    double v = 0.0;
    for (std::size_t t = 0; t < inst.length(); ++t)
      for (std::size_t a = 0; a < s; ++a) v += inst.loss(t, a, s) * marginals[i].node(t, a);
    return v;
  });
}

double primal_from_scores(const Problem& problem, const ScoreSet& scores, double w_norm_sq) {
  check_scores(problem, scores);
  const double hinge = ordered_sum(problem.size(), [&](std::size_t i) {
    const auto h = loss_augmented_potentials(problem, scores[i], i, 1.0);
    return labeling_score(h, map_assignment(h));
  });
  return 0.5 * problem.lambda() * w_norm_sq + hinge / static_cast<double>(problem.size());
}

double primal_objective(const Problem& problem, const WeightVector& w) {
  return primal_from_scores(problem, psi_scores(problem, w), w.norm_sq());
}

double smoothed_from_scores(const Problem& problem, const ScoreSet& scores, double w_norm_sq,
                            double mu) {
  if (!(mu > 0.0)) throw std::domain_error("smoothed_primal: mu must be positive");
  check_scores(problem, scores);
  const double log_sum = ordered_sum(problem.size(), [&](std::size_t i) {
    return log_partition(loss_augmented_potentials(problem, scores[i], i, 1.0 / mu));
  });
  const double n = static_cast<double>(problem.size());
  return 0.5 * problem.lambda() * w_norm_sq + mu * log_sum / n - mu * problem.d_prox();
}

double smoothed_primal(const Problem& problem, const WeightVector& w, double mu) {
  return smoothed_from_scores(problem, psi_scores(problem, w), w.norm_sq(), mu);
}

WeightVector smoothed_primal_gradient(const Problem& problem, const WeightVector& w, double mu) {
  WeightVector grad = w;
  grad.scale(problem.lambda());
  grad.add_scaled(feature_expectations(problem, alpha_mu_of_w(problem, w, mu)), -1.0);
  return grad;
}

double dual_from_norm(const Problem& problem, const MarginalSet& marginals,
                      double w_alpha_norm_sq) {
  return -0.5 * problem.lambda() * w_alpha_norm_sq + expected_loss(problem, marginals);
}

double dual_objective(const Problem& problem, const MarginalSet& marginals) {
  return dual_from_norm(problem, marginals, w_of_alpha(problem, marginals).norm_sq());
}

}  // namespace egap
