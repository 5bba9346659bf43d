#pragma once

#include <cstddef>
#include <cstdint>

#include "egap/dataset.hpp"
#include "egap/m3n_problem.hpp"

namespace egap {

struct GeneratorConfig {
  std::uint64_t seed = 7;
  std::size_t num_sequences = 8;
  /// Sequence lengths (number of nodes) are drawn uniformly from [min, max].
  std::size_t min_length = 3;
  std::size_t max_length = 5;
  std::size_t num_states = 2;
  std::size_t feature_dim = 4;
  /// Probability that a node label is replaced by a different random label.
  double noise = 0.1;

  /// Throws std::domain_error for empty or inconsistent sizes.
  void validate() const;
};

/// Draws a ground-truth weight vector and Gaussian node features, labels
/// each sequence by Viterbi decoding under the truth, then applies label
/// noise. Losses are Hamming.
Dataset generate_dataset(const GeneratorConfig& config);

GeneratorConfig reference_config();
inline constexpr double kReferenceLambda = 0.1;
/// The reference training problem (reference_config(), lambda 0.1, Hamming loss).
Problem reference_problem(ProblemOptions options = {});

}  // namespace egap
