#include "egap/kernel_engine.hpp"

#include <numeric>
#include <string>

#include "egap/errors.hpp"
#include "egap/parallel.hpp"

namespace egap {

GramCache::GramCache(const Problem& problem) {
  const auto& data = problem.data();
  const std::size_t p = problem.feature_dim();
  offsets_.reserve(data.size() + 1);
  offsets_.push_back(0);
  std::vector<std::span<const double>> rows;
  for (const auto& inst : data.instances) {
    for (std::size_t t = 0; t < inst.length(); ++t) rows.push_back(inst.feature(t, p));
    offsets_.push_back(rows.size());
  }
  count_ = rows.size();
  values_.assign(count_ * count_, 0.0);
  const KernelSpec& kappa = problem.kernel();
  parallel_for(count_, [&](std::size_t g) {
    for (std::size_t h = 0; h < count_; ++h) values_[g * count_ + h] = kappa(rows[g], rows[h]);
  });
}

std::size_t GramCache::node_index(std::size_t i, std::size_t t) const {
  if (i + 1 >= offsets_.size() || offsets_[i] + t >= offsets_[i + 1])
    throw StructuralError("gram cache: unknown node (" + std::to_string(i) + ", " +
                          std::to_string(t) + ")");
  return offsets_[i] + t;
}

BetaState update_beta(const BetaState& beta, const MarginalSet& alpha_hat, double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) throw std::domain_error("update_beta: tau must lie in [0, 1)");
  return {convex_combination(beta.beta, alpha_hat, tau), beta.gram};
}

KernelEngine::KernelEngine(const Problem& problem)
    : problem_(problem), gram_(std::make_shared<const GramCache>(problem)) {
  node_template_.reserve(gram_->num_nodes());
  for (const auto& inst : problem_.data().instances)
    for (std::size_t t = 0; t < inst.length(); ++t)
      node_template_.push_back(problem_.node_template(t));
}

BetaState KernelEngine::initial_beta() const { return {uniform_alpha(problem_), gram_}; }

KernelEngine::Residuals KernelEngine::residuals(const MarginalSet& m) const {
  if (m.size() != problem_.size()) throw StructuralError("kernel engine: instance count mismatch");
  const std::size_t s = problem_.num_states();
  Residuals r{std::vector<double>(gram_->num_nodes() * s, 0.0),
              std::vector<double>(problem_.num_edge_templates() * s * s, 0.0)};
  for (std::size_t i = 0; i < problem_.size(); ++i) {
    const auto& inst = problem_.instance(i);
    if (m[i].length() != inst.length() || m[i].num_states() != s)
      throw StructuralError("kernel engine: marginal tables do not match instance " +
                            std::to_string(i));
    for (std::size_t t = 0; t < inst.length(); ++t) {
      const auto row = m[i].node_row(t);
      double* dst = r.node.data() + (gram_->instance_offset(i) + t) * s;
      for (std::size_t a = 0; a < s; ++a) dst[a] = -row[a];
      dst[inst.labels[t]] += std::accumulate(row.begin(), row.end(), 0.0);
    }
    if (!problem_.transition_features()) continue;
    for (std::size_t t = 0; t + 1 < inst.length(); ++t) {
      const auto block = m[i].edge_block(t);
      double* dst = r.edge.data() + problem_.edge_template(t) * s * s;
      for (std::size_t k = 0; k < s * s; ++k) dst[k] -= block[k];
      dst[inst.labels[t] * s + inst.labels[t + 1]] +=
          std::accumulate(block.begin(), block.end(), 0.0);
    }
  }
  return r;
}

std::vector<double> KernelEngine::smooth(const std::vector<double>& node_residuals) const {
  const std::size_t s = problem_.num_states();
  const std::size_t count = gram_->num_nodes();
  std::vector<double> out(count * s, 0.0);
  parallel_for(count, [&](std::size_t g) {
    const auto krow = gram_->row(g);
    double* dst = out.data() + g * s;
    for (std::size_t h = 0; h < count; ++h) {
      if (node_template_[h] != node_template_[g]) continue;
      const double k = krow[h];
      const double* src = node_residuals.data() + h * s;
      for (std::size_t a = 0; a < s; ++a) dst[a] += k * src[a];
    }
  });
  return out;
}

ScoreSet KernelEngine::scores(const MarginalSet& marginals) const {
  const std::size_t s = problem_.num_states();
  const double inv_lambda = 1.0 / problem_.lambda();
  const auto r = residuals(marginals);
  const auto smoothed = smooth(r.node);
  ScoreSet out(problem_.size());
  for (std::size_t i = 0; i < problem_.size(); ++i) {
    const auto& inst = problem_.instance(i);
    ChainTables tables(inst.length(), s);
    for (std::size_t t = 0; t < inst.length(); ++t) {
      const double* act = smoothed.data() + (gram_->instance_offset(i) + t) * s;
      const double at_truth = act[inst.labels[t]];
      for (std::size_t a = 0; a < s; ++a) tables.node(t, a) = inv_lambda * (at_truth - act[a]);
    }
    if (problem_.transition_features()) {
      for (std::size_t t = 0; t + 1 < inst.length(); ++t) {
        const double* e = r.edge.data() + problem_.edge_template(t) * s * s;
        const double at_truth = e[inst.labels[t] * s + inst.labels[t + 1]];
        for (std::size_t a = 0; a < s; ++a)
          for (std::size_t b = 0; b < s; ++b)
            tables.edge(t, a, b) = inv_lambda * (at_truth - e[a * s + b]);
      }
    }
    out[i] = std::move(tables);
  }
  return out;
}

double KernelEngine::inner_w_psi(const BetaState& beta, std::size_t i, CliqueRef clique,
                                 CliqueValue value) const {
  if (i >= problem_.size())
    throw StructuralError("inner_w_psi: unknown instance " + std::to_string(i));
  const auto& inst = problem_.instance(i);
  const auto s = static_cast<int>(problem_.num_states());
  const auto a = value.first;
  const auto b = value.second;
  const double inv_lambda = 1.0 / problem_.lambda();
  const auto r = residuals(beta.beta);
  if (clique.kind == CliqueRef::Kind::node) {
    const std::size_t g = gram_->node_index(i, clique.position);
    if (a < 0 || a >= s) throw StructuralError("inner_w_psi: state out of range");
    const auto krow = gram_->row(g);
    double at_truth = 0.0;
    double at_value = 0.0;
    for (std::size_t h = 0; h < gram_->num_nodes(); ++h) {
      if (node_template_[h] != node_template_[g]) continue;
      at_truth += krow[h] * r.node[h * s + inst.labels[clique.position]];
      at_value += krow[h] * r.node[h * s + a];
    }
    return inv_lambda * (at_truth - at_value);
  }
  if (clique.position + 1 >= inst.length() || a < 0 || a >= s || b < 0 || b >= s)
    throw StructuralError("inner_w_psi: edge clique or value out of range");
  if (!problem_.transition_features()) return 0.0;
  const double* e = r.edge.data() + problem_.edge_template(clique.position) * s * s;
  return inv_lambda * (e[inst.labels[clique.position] * s + inst.labels[clique.position + 1]] -
                       e[a * s + b]);
}

double KernelEngine::kernel_norm_sq(const MarginalSet& marginals) const {
  const auto r = residuals(marginals);
  const auto smoothed = smooth(r.node);
  double total = 0.0;
  for (std::size_t k = 0; k < r.node.size(); ++k) total += r.node[k] * smoothed[k];
  for (double v : r.edge) total += v * v;
  return total;
}

FactorTable KernelEngine::decoding_potentials(const MarginalSet& beta,
                                              const ChainInstance& input) const {
  const std::size_t s = problem_.num_states();
  const std::size_t p = problem_.feature_dim();
  if (input.features.size() != input.length() * p)
    throw StructuralError("decoding: feature dimension does not match the model");
  if (input.length() == 0) throw StructuralError("decoding: empty sequence");
  const double inv_lambda = 1.0 / problem_.lambda();
  const auto r = residuals(beta);
  const auto& data = problem_.data();

  FactorTable h(input.length(), s);
  for (std::size_t t = 0; t < input.length(); ++t) {
    const std::size_t tmpl = problem_.node_template(t);
    if (tmpl >= problem_.num_node_templates())
      throw StructuralError("decoding: position " + std::to_string(t) +
                            " has no trained node template");
    const auto x = input.feature(t, p);
    std::size_t g = 0;
    for (const auto& train : data.instances) {
      for (std::size_t u = 0; u < train.length(); ++u, ++g) {
        if (node_template_[g] != tmpl) continue;
        const double k = problem_.kernel()(x, train.feature(u, p));
        for (std::size_t a = 0; a < s; ++a) h.node(t, a) += inv_lambda * k * r.node[g * s + a];
      }
    }
  }
  if (problem_.transition_features()) {
    for (std::size_t t = 0; t + 1 < input.length(); ++t) {
      const std::size_t tmpl = problem_.edge_template(t);
      if (tmpl >= problem_.num_edge_templates())
        throw StructuralError("decoding: edge " + std::to_string(t) +
                              " has no trained transition template");
      const double* e = r.edge.data() + tmpl * s * s;
      for (std::size_t a = 0; a < s; ++a)
        for (std::size_t b = 0; b < s; ++b) h.edge(t, a, b) = inv_lambda * e[a * s + b];
    }
  }
  return h;
}

}  // namespace egap
