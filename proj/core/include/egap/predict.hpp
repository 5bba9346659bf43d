#pragma once

// Decoding: argmax_y <w, phi(x, y)> by Viterbi, with the loss term excluded.

#include <optional>
#include <vector>

#include "egap/dataset.hpp"
#include "egap/io.hpp"

namespace egap {

/// Node and edge log-potentials <w, phi(x, y_c)>. Throws StructuralError on
/// a shape mismatch or when a position has no template.
FactorTable decoding_potentials(const WeightVector& w, Tying tying, bool transition_features,
                                const ChainInstance& input);

struct PredictionReport {
  std::vector<Labeling> labelings;
  /// Wrong labels per instance.
  std::vector<std::size_t> errors;
  /// Wrong labels over all nodes.
  double mean_hamming = 0.0;
};

/// Compares decoded labelings with the labels stored in `data`.
PredictionReport score_predictions(const Dataset& data, std::vector<Labeling> labelings);

/// Kernel models need their training set; its fingerprint must match the
/// model's. Throws StructuralError otherwise.
PredictionReport predict(const Model& model, const Dataset& data,
                         const std::optional<Dataset>& training = std::nullopt);

}  // namespace egap
