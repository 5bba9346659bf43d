#pragma once

// Exact log-domain inference on linear chains: the cliques are the nodes
// 0..length-1 and the edges (t, t+1).

#include <cstddef>
#include <span>
#include <vector>

namespace egap {

using Labeling = std::vector<int>;

class ChainTables {
 public:
  ChainTables() = default;
  ChainTables(std::size_t length, std::size_t num_states, double fill = 0.0);

  std::size_t length() const noexcept { return length_; }
  std::size_t num_states() const noexcept { return states_; }
  std::size_t num_edges() const noexcept { return length_ > 0 ? length_ - 1 : 0; }

  double& node(std::size_t t, std::size_t a) { return node_[t * states_ + a]; }
  double node(std::size_t t, std::size_t a) const { return node_[t * states_ + a]; }
  double& edge(std::size_t t, std::size_t a, std::size_t b) {
    return edge_[(t * states_ + a) * states_ + b];
  }
  double edge(std::size_t t, std::size_t a, std::size_t b) const {
    return edge_[(t * states_ + a) * states_ + b];
  }

  std::span<double> node_row(std::size_t t) { return {node_.data() + t * states_, states_}; }
  std::span<const double> node_row(std::size_t t) const {
    return {node_.data() + t * states_, states_};
  }
  std::span<double> edge_block(std::size_t t) {
    return {edge_.data() + t * states_ * states_, states_ * states_};
  }
  std::span<const double> edge_block(std::size_t t) const {
    return {edge_.data() + t * states_ * states_, states_ * states_};
  }

  std::span<double> node_values() noexcept { return node_; }
  std::span<const double> node_values() const noexcept { return node_; }
  std::span<double> edge_values() noexcept { return edge_; }
  std::span<const double> edge_values() const noexcept { return edge_; }

  bool same_shape(const ChainTables& other) const noexcept {
    return length_ == other.length_ && states_ == other.states_;
  }

 private:
  std::size_t length_ = 0;
  std::size_t states_ = 0;
  std::vector<double> node_;
  std::vector<double> edge_;
};

/// Log-potentials h_t(y) and h_{t,t+1}(y, y').
class FactorTable : public ChainTables {
 public:
  using ChainTables::ChainTables;
  FactorTable() = default;
  explicit FactorTable(ChainTables tables) : ChainTables(std::move(tables)) {}
};

/// Nonnegative clique marginals; every table carries the same total mass.
class MarginalTables : public ChainTables {
 public:
  using ChainTables::ChainTables;
  MarginalTables() = default;
  explicit MarginalTables(ChainTables tables) : ChainTables(std::move(tables)) {}

  /// Sum of the first node table.
  double mass() const;
};

/// Throws StructuralError on an empty chain and NumericalError on a
/// non-finite entry.
void validate_factor_table(const FactorTable& tables);

/// log sum_y exp(sum_c h_c(y_c)) by the forward recursion.
double log_partition(const FactorTable& tables);

struct ChainPosterior {
  double log_partition = 0.0;
  MarginalTables marginals;  // total mass 1
};

/// Forward-backward; returns the log partition function together with the
/// normalized clique marginals.
ChainPosterior infer(const FactorTable& tables);

MarginalTables clique_marginals(const FactorTable& tables);

/// argmax_y sum_c h_c(y_c). Among maximizers the lexicographically smallest
/// labeling is returned.
Labeling map_assignment(const FactorTable& tables);

double labeling_score(const FactorTable& tables, std::span<const int> labeling);

}  // namespace egap
