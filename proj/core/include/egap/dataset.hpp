#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "egap/chain_inference.hpp"

namespace egap {

/// One labeled sequence. Features are stored row-major (length x feature_dim)
/// and node losses row-major (length x num_states); edge losses are zero.
struct ChainInstance {
  std::string id;
  Labeling labels;
  std::vector<double> features;
  std::vector<double> losses;

  std::size_t length() const noexcept { return labels.size(); }

  std::span<const double> feature(std::size_t t, std::size_t feature_dim) const {
    return {features.data() + t * feature_dim, feature_dim};
  }
  double loss(std::size_t t, std::size_t label, std::size_t num_states) const {
    return losses[t * num_states + label];
  }
};

struct Dataset {
  std::size_t num_states = 0;
  std::size_t feature_dim = 0;
  std::vector<ChainInstance> instances;

  std::size_t size() const noexcept { return instances.size(); }
  const ChainInstance& operator[](std::size_t i) const { return instances[i]; }

  /// Throws std::domain_error for an empty dataset or s < 2, and
  /// StructuralError for inconsistent shapes, labels out of range, negative
  /// losses, or a nonzero loss at the true label.
  void validate() const;
};

/// Per-node Hamming loss table: 1 for every wrong label, 0 at the truth.
std::vector<double> hamming_losses(std::span<const int> labels, std::size_t num_states);

}  // namespace egap
