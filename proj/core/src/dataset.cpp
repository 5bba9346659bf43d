#include "egap/dataset.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "egap/errors.hpp"

namespace egap {

void Dataset::validate() const {
  if (instances.empty()) throw std::domain_error("dataset: no instances");
  if (num_states < 2) throw std::domain_error("dataset: need at least two states per node");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    const std::string where = "dataset: instance " + std::to_string(i) + " (" + inst.id + "): ";
    const std::size_t len = inst.length();
    if (len == 0) throw StructuralError(where + "empty sequence");
    if (inst.features.size() != len * feature_dim)
      throw StructuralError(where + "feature block has wrong size");
    if (inst.losses.size() != len * num_states)
      throw StructuralError(where + "loss table has wrong size");
    for (std::size_t t = 0; t < len; ++t) {
      const int y = inst.labels[t];
      if (y < 0 || static_cast<std::size_t>(y) >= num_states)
        throw StructuralError(where + "label out of range at position " + std::to_string(t));
      for (std::size_t a = 0; a < num_states; ++a) {
        const double l = inst.loss(t, a, num_states);
        if (!(l >= 0.0) || !std::isfinite(l))
          throw StructuralError(where + "losses must be finite and nonnegative");
      }
      if (inst.loss(t, static_cast<std::size_t>(y), num_states) != 0.0)
        throw StructuralError(where + "loss at the true label must be zero");
    }
    for (double v : inst.features)
      if (!std::isfinite(v)) throw StructuralError(where + "non-finite feature");
  }
}

std::vector<double> hamming_losses(std::span<const int> labels, std::size_t num_states) {
  std::vector<double> out(labels.size() * num_states, 1.0);
  for (std::size_t t = 0; t < labels.size(); ++t)
    out[t * num_states + static_cast<std::size_t>(labels[t])] = 0.0;
  return out;
}

}  // namespace egap
