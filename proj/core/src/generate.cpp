#include "egap/generate.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace egap {

namespace {

// Hand-rolled draws so the output does not depend on the standard library's
// distribution implementations.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return radius * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::size_t below(std::size_t n) {
    const auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

void GeneratorConfig::validate() const {
  if (num_sequences == 0) throw std::domain_error("generate: need at least one sequence");
  if (min_length == 0 || min_length > max_length) {
    throw std::domain_error("generate: length range must satisfy 1 <= min <= max");
  }
  if (num_states < 2) throw std::domain_error("generate: need at least two states");
  if (feature_dim == 0) throw std::domain_error("generate: feature dimension must be positive");
  if (!(noise >= 0.0 && noise <= 1.0)) throw std::domain_error("generate: noise must lie in [0, 1]");
}

Dataset generate_dataset(const GeneratorConfig& config) {
  config.validate();
  Sampler rng(config.seed);
  const std::size_t s = config.num_states;
  const std::size_t p = config.feature_dim;

  std::vector<double> node_truth(s * p);
  std::vector<double> edge_truth(s * s);
  for (double& v : node_truth) v = rng.normal();
  for (double& v : edge_truth) v = rng.normal();

  Dataset data;
  data.num_states = s;
  data.feature_dim = p;
  for (std::size_t i = 0; i < config.num_sequences; ++i) {
    const std::size_t len =
        config.min_length + rng.below(config.max_length - config.min_length + 1);
    ChainInstance inst;
    inst.id = "seq-" + std::to_string(i);
    inst.features.resize(len * p);
    for (double& v : inst.features) v = rng.normal();

    FactorTable potentials(len, s, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t a = 0; a < s; ++a) {
        double score = 0.0;
        for (std::size_t d = 0; d < p; ++d) score += node_truth[a * p + d] * inst.features[t * p + d];
        potentials.node(t, a) = score;
      }
      if (t + 1 < len) {
        for (std::size_t a = 0; a < s; ++a)
          for (std::size_t b = 0; b < s; ++b) potentials.edge(t, a, b) = edge_truth[a * s + b];
      }
    }
    inst.labels = map_assignment(potentials);
    for (int& y : inst.labels) {
      if (rng.uniform() < config.noise) {
        y = static_cast<int>((static_cast<std::size_t>(y) + 1 + rng.below(s - 1)) % s);
      }
    }
    inst.losses = hamming_losses(inst.labels, s);
    data.instances.push_back(std::move(inst));
  }
  return data;
}

GeneratorConfig reference_config() { return GeneratorConfig{}; }

Problem reference_problem(ProblemOptions options) {
  return build_problem(generate_dataset(reference_config()), kReferenceLambda, options);
}

}  // namespace egap
