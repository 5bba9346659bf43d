#pragma once

// File formats.
//
// Dataset: JSON lines. An optional first line
//   {"format": "egap-chain-data", "version": 1, "num_states": s, "feature_dim": p}
// fixes the shape; without it s is one more than the largest label (or the
// loss-table width) and p is the first feature row's length. Every other
// non-blank line is one sequence:
//   {"id": "...", "labels": [..], "features": [[..], ..], "loss": [[..], ..]}
// where "loss" (length x s) is optional and defaults to Hamming.
//
// Model: one JSON document tagged "egap-model", version 1.
// Trace: CSV with the columns of TraceRecord.
//
// Floating-point values are written with 17 significant digits, which
// round-trips doubles exactly.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "egap/dataset.hpp"
#include "egap/egap_solver.hpp"
#include "egap/m3n_problem.hpp"

namespace egap {

std::string format_double(double value);

/// Throws ParseError (with the offending line) on malformed input and
/// StructuralError when the records do not form a valid dataset.
Dataset read_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::filesystem::path& path, const Dataset& data);

/// FNV-1a over shapes, ids, labels, and the bit patterns of features and losses.
std::string dataset_fingerprint(const Dataset& data);

struct Model {
  enum class Mode { explicit_features, kernel };
  static constexpr int kVersion = 1;

  Mode mode = Mode::explicit_features;
  std::size_t num_states = 0;
  std::size_t feature_dim = 0;
  double lambda = 0.0;
  Tying tying = Tying::tied;
  bool transition_features = true;
  KernelSpec kernel{};
  std::size_t node_templates = 0;
  std::size_t edge_templates = 0;

  WeightVector weights;  // explicit mode
  MarginalSet beta;      // kernel mode
  std::string train_fingerprint;

  ProblemOptions problem_options() const;
};

Model explicit_model(const Problem& problem, const WeightVector& w);
Model kernel_model(const Problem& problem, const BetaState& beta);

void write_model(std::ostream& out, const Model& model);
void save_model(const std::filesystem::path& path, const Model& model);
/// Throws ParseError for malformed documents or unknown versions.
Model read_model(std::istream& in);
Model load_model(const std::filesystem::path& path);

void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace);
void save_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace(std::istream& in);
std::vector<TraceRecord> load_trace(const std::filesystem::path& path);

}  // namespace egap
