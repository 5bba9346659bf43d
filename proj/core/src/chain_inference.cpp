#include "egap/chain_inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "egap/errors.hpp"

namespace egap {

namespace {

double log_sum_exp(std::span<const double> values) {
  const double peak = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

// forward[t][a]: log-sum over prefixes ending in state a at t, node t included.
std::vector<double> forward_messages(const FactorTable& h) {
  const std::size_t n = h.length();
  const std::size_t s = h.num_states();
  std::vector<double> fwd(n * s);
  std::vector<double> scratch(s);
  for (std::size_t a = 0; a < s; ++a) fwd[a] = h.node(0, a);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t b = 0; b < s; ++b) {
      for (std::size_t a = 0; a < s; ++a) scratch[a] = fwd[(t - 1) * s + a] + h.edge(t - 1, a, b);
      fwd[t * s + b] = h.node(t, b) + log_sum_exp(scratch);
    }
  }
  return fwd;
}

// backward[t][a]: log-sum over suffixes after t given state a at t, node t excluded.
std::vector<double> backward_messages(const FactorTable& h) {
  const std::size_t n = h.length();
  const std::size_t s = h.num_states();
  std::vector<double> bwd(n * s, 0.0);
  std::vector<double> scratch(s);
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t a = 0; a < s; ++a) {
      for (std::size_t b = 0; b < s; ++b)
        scratch[b] = h.edge(t, a, b) + h.node(t + 1, b) + bwd[(t + 1) * s + b];
      bwd[t * s + a] = log_sum_exp(scratch);
    }
  }
  return bwd;
}

}  // namespace

ChainTables::ChainTables(std::size_t length, std::size_t num_states, double fill)
    : length_(length),
      states_(num_states),
      node_(length * num_states, fill),
      edge_((length > 0 ? length - 1 : 0) * num_states * num_states, fill) {}

double MarginalTables::mass() const {
  const auto row = node_row(0);
  return std::accumulate(row.begin(), row.end(), 0.0);
}

void validate_factor_table(const FactorTable& tables) {
  if (tables.length() == 0 || tables.num_states() == 0)
    throw StructuralError("factor table: chain must have at least one node and one state");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(tables.node_values().begin(), tables.node_values().end(), finite) ||
      !std::all_of(tables.edge_values().begin(), tables.edge_values().end(), finite))
    throw NumericalError("factor table: non-finite log-potential");
}

double log_partition(const FactorTable& tables) {
  validate_factor_table(tables);
  const auto fwd = forward_messages(tables);
  const std::size_t s = tables.num_states();
  return log_sum_exp(std::span<const double>(fwd).subspan((tables.length() - 1) * s, s));
}

ChainPosterior infer(const FactorTable& tables) {
  validate_factor_table(tables);
  const std::size_t n = tables.length();
  const std::size_t s = tables.num_states();
  const auto fwd = forward_messages(tables);
  const auto bwd = backward_messages(tables);
  const double log_z = log_sum_exp(std::span<const double>(fwd).subspan((n - 1) * s, s));

  ChainPosterior out{log_z, MarginalTables(n, s)};
  auto& m = out.marginals;
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t a = 0; a < s; ++a)
      m.node(t, a) = std::exp(fwd[t * s + a] + bwd[t * s + a] - log_z);
  for (std::size_t t = 0; t + 1 < n; ++t)
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t b = 0; b < s; ++b)
        m.edge(t, a, b) = std::exp(fwd[t * s + a] + tables.edge(t, a, b) + tables.node(t + 1, b) +
                                   bwd[(t + 1) * s + b] - log_z);
  return out;
}

MarginalTables clique_marginals(const FactorTable& tables) { return infer(tables).marginals; }

Labeling map_assignment(const FactorTable& tables) {
  validate_factor_table(tables);
  const std::size_t n = tables.length();
  const std::size_t s = tables.num_states();

  // Suffix values let the forward pass pick the smallest label at every
  // position among those that still admit an optimal completion.
  std::vector<double> suffix(n * s);
  for (std::size_t a = 0; a < s; ++a) suffix[(n - 1) * s + a] = tables.node(n - 1, a);
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t a = 0; a < s; ++a) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < s; ++b)
        best = std::max(best, tables.edge(t, a, b) + suffix[(t + 1) * s + b]);
      suffix[t * s + a] = tables.node(t, a) + best;
    }
  }

  Labeling out(n);
  auto first_argmax = [s](auto&& value_of) {
    std::size_t arg = 0;
    double best = value_of(0);
    for (std::size_t a = 1; a < s; ++a) {
      const double v = value_of(a);
      if (v > best) {
        best = v;
        arg = a;
      }
    }
    return static_cast<int>(arg);
  };
  out[0] = first_argmax([&](std::size_t a) { return suffix[a]; });
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const auto prev = static_cast<std::size_t>(out[t]);
    out[t + 1] = first_argmax(
        [&](std::size_t b) { return tables.edge(t, prev, b) + suffix[(t + 1) * s + b]; });
  }
  return out;
}

double labeling_score(const FactorTable& tables, std::span<const int> labeling) {
  if (labeling.size() != tables.length())
    throw StructuralError("labeling length " + std::to_string(labeling.size()) +
                          " does not match chain length " + std::to_string(tables.length()));
  double score = 0.0;
  for (std::size_t t = 0; t < labeling.size(); ++t) {
    const auto a = static_cast<std::size_t>(labeling[t]);
    if (a >= tables.num_states()) throw StructuralError("labeling: state out of range");
    score += tables.node(t, a);
    if (t + 1 < labeling.size())
      score += tables.edge(t, a, static_cast<std::size_t>(labeling[t + 1]));
  }
  return score;
}

}  // namespace egap
