#include "egap/predict.hpp"

#include "egap/errors.hpp"
#include "egap/kernel_engine.hpp"
#include "egap/parallel.hpp"

namespace egap {

FactorTable decoding_potentials(const WeightVector& w, Tying tying, bool transition_features,
                                const ChainInstance& input) {
  const std::size_t s = w.num_states();
  const std::size_t p = w.feature_dim();
  const std::size_t len = input.length();
  if (input.features.size() != len * p) {
    throw StructuralError("decode: feature rows do not match the model dimension");
  }
  const auto tmpl = [tying](std::size_t t) { return tying == Tying::tied ? 0 : t; };
  if (len == 0 || tmpl(len - 1) >= w.node_templates()) {
    throw StructuralError("decode: sequence longer than the model's position templates");
  }
  if (transition_features && len > 1 && tmpl(len - 2) >= w.edge_templates()) {
    throw StructuralError("decode: sequence longer than the model's transition templates");
  }
  FactorTable h(len, s, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    const auto x = input.feature(t, p);
    for (std::size_t a = 0; a < s; ++a) {
      const auto row = w.node_row(tmpl(t), a);
      double v = 0.0;
      for (std::size_t d = 0; d < p; ++d) v += row[d] * x[d];
      h.node(t, a) = v;
    }
  }
  if (transition_features) {
    for (std::size_t t = 0; t + 1 < len; ++t)
      for (std::size_t a = 0; a < s; ++a)
        for (std::size_t b = 0; b < s; ++b) h.edge(t, a, b) = w.edge(tmpl(t), a, b);
  }
  return h;
}

PredictionReport score_predictions(const Dataset& data, std::vector<Labeling> labelings) {
  if (labelings.size() != data.size()) throw StructuralError("predict: instance count mismatch");
  PredictionReport report;
  std::size_t wrong = 0;
  std::size_t nodes = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& truth = data[i].labels;
    if (labelings[i].size() != truth.size()) throw StructuralError("predict: length mismatch");
    std::size_t e = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) e += labelings[i][t] != truth[t];
    report.errors.push_back(e);
    wrong += e;
    nodes += truth.size();
  }
  report.mean_hamming = nodes > 0 ? static_cast<double>(wrong) / static_cast<double>(nodes) : 0.0;
  report.labelings = std::move(labelings);
  return report;
}

PredictionReport predict(const Model& model, const Dataset& data,
                         const std::optional<Dataset>& training) {
  if (data.num_states != model.num_states || data.feature_dim != model.feature_dim) {
    throw StructuralError("predict: dataset shape (s = " + std::to_string(data.num_states) +
                          ", p = " + std::to_string(data.feature_dim) +
                          ") does not match the model (s = " + std::to_string(model.num_states) +
                          ", p = " + std::to_string(model.feature_dim) + ")");
  }
  std::vector<Labeling> labelings(data.size());
  if (model.mode == Model::Mode::explicit_features) {
    parallel_for(data.size(), [&](std::size_t i) {
      labelings[i] = map_assignment(
          decoding_potentials(model.weights, model.tying, model.transition_features, data[i]));
    });
    return score_predictions(data, std::move(labelings));
  }

  if (!training) throw StructuralError("predict: kernel models need their training data");
  if (dataset_fingerprint(*training) != model.train_fingerprint) {
    throw StructuralError("predict: training data does not match the model fingerprint");
  }
  const Problem problem = build_problem(*training, model.lambda, model.problem_options());
  if (model.beta.size() != problem.size()) {
    throw StructuralError("predict: beta does not cover the training set");
  }
  const KernelEngine engine(problem);
  parallel_for(data.size(), [&](std::size_t i) {
    labelings[i] = map_assignment(engine.decoding_potentials(model.beta, data[i]));
  });
  return score_predictions(data, std::move(labelings));
}

}  // namespace egap
