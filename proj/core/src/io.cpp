#include "egap/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "egap/errors.hpp"

namespace egap {

using nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "egap-chain-data";
constexpr const char* kModelFormat = "egap-model";
constexpr const char* kTraceHeader =
    "iter,tau,mu,primal,dual,gap,smoothed_primal,bound,egap_ok,elapsed_ms";

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void append_array(std::string& out, std::span<const double> values) {
  out += '[';
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (j > 0) out += ',';
    out += format_double(values[j]);
  }
  out += ']';
}

void append_rows(std::string& out, std::span<const double> values, std::size_t width) {
  out += '[';
  for (std::size_t r = 0; width > 0 && r * width < values.size(); ++r) {
    if (r > 0) out += ',';
    append_array(out, values.subspan(r * width, width));
  }
  out += ']';
}

std::size_t as_size(const json& value, std::size_t line, const char* what) {
  if (!value.is_number_integer() || value.get<long long>() < 0) {
    throw ParseError(line, std::string(what) + " must be a nonnegative integer");
  }
  return value.get<std::size_t>();
}

double as_double(const json& value, std::size_t line, const char* what) {
  if (!value.is_number()) throw ParseError(line, std::string(what) + " must be a number");
  return value.get<double>();
}

std::vector<double> number_rows(const json& rows, std::size_t line, const char* what,
                                std::size_t& width) {
  if (!rows.is_array()) throw ParseError(line, std::string(what) + " must be a list of lists");
  std::vector<double> out;
  for (const auto& row : rows) {
    if (!row.is_array()) throw ParseError(line, std::string(what) + " must be a list of lists");
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw ParseError(line, std::string(what) + " rows have inconsistent lengths");
    }
    for (const auto& v : row) out.push_back(as_double(v, line, what));
  }
  return out;
}

struct Record {
  std::size_t line = 0;
  ChainInstance instance;
  std::size_t feature_width = 0;
  std::size_t loss_width = 0;
  bool has_loss = false;
};

Record parse_record(const json& doc, std::size_t line) {
  if (!doc.is_object()) throw ParseError(line, "record must be a JSON object");
  Record rec;
  rec.line = line;
  if (doc.contains("id")) {
    if (!doc["id"].is_string()) throw ParseError(line, "\"id\" must be a string");
    rec.instance.id = doc["id"].get<std::string>();
  }
  if (!doc.contains("labels") || !doc["labels"].is_array() || doc["labels"].empty()) {
    throw ParseError(line, "\"labels\" must be a non-empty list of integers");
  }
  for (const auto& y : doc["labels"]) {
    rec.instance.labels.push_back(static_cast<int>(as_size(y, line, "label")));
  }
  if (!doc.contains("features")) throw ParseError(line, "missing \"features\"");
  rec.instance.features = number_rows(doc["features"], line, "features", rec.feature_width);
  if (doc["features"].size() != rec.instance.labels.size()) {
    throw ParseError(line, "\"features\" must have one row per label");
  }
  if (doc.contains("loss") && !doc["loss"].is_null()) {
    rec.has_loss = true;
    rec.instance.losses = number_rows(doc["loss"], line, "loss", rec.loss_width);
    if (doc["loss"].size() != rec.instance.labels.size()) {
      throw ParseError(line, "\"loss\" must have one row per label");
    }
  }
  return rec;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Dataset read_dataset(std::istream& in) {
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  Dataset data;
  std::vector<Record> records;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (records.empty() && !have_header && doc.is_object() && doc.contains("format")) {
      if (doc["format"] != kDatasetFormat) throw ParseError(line, "unknown dataset format");
      if (!doc.contains("version") || doc["version"] != 1) {
        throw ParseError(line, "unsupported dataset version");
      }
      if (!doc.contains("num_states") || !doc.contains("feature_dim")) {
        throw ParseError(line, "header needs \"num_states\" and \"feature_dim\"");
      }
      data.num_states = as_size(doc["num_states"], line, "num_states");
      data.feature_dim = as_size(doc["feature_dim"], line, "feature_dim");
      have_header = true;
      continue;
    }
    records.push_back(parse_record(doc, line));
  }
  if (records.empty()) throw ParseError(line, "dataset contains no sequences");

  if (!have_header) {
    data.feature_dim = records.front().feature_width;
    std::size_t states = 2;
    for (const auto& rec : records) {
      for (int y : rec.instance.labels) states = std::max(states, static_cast<std::size_t>(y) + 1);
      if (rec.has_loss) states = std::max(states, rec.loss_width);
    }
    data.num_states = states;
  }
  for (auto& rec : records) {
    if (rec.feature_width != data.feature_dim) {
      throw ParseError(rec.line, "feature rows have length " + std::to_string(rec.feature_width) +
                                     ", expected " + std::to_string(data.feature_dim));
    }
    for (int y : rec.instance.labels) {
      if (static_cast<std::size_t>(y) >= data.num_states) {
        throw ParseError(rec.line, "label " + std::to_string(y) + " out of range");
      }
    }
    if (rec.has_loss && rec.loss_width != data.num_states) {
      throw ParseError(rec.line, "loss rows must have one entry per state");
    }
    if (!rec.has_loss) rec.instance.losses = hamming_losses(rec.instance.labels, data.num_states);
    if (rec.instance.id.empty()) rec.instance.id = "seq-" + std::to_string(data.instances.size());
    data.instances.push_back(std::move(rec.instance));
  }
  try {
    data.validate();
  } catch (const StructuralError& e) {
    throw ParseError(0, e.what());
  }
  return data;
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "{\"format\":\"" << kDatasetFormat << "\",\"version\":1,\"num_states\":"
      << data.num_states << ",\"feature_dim\":" << data.feature_dim << "}\n";
  for (const auto& inst : data.instances) {
    std::string line = "{\"id\":" + json(inst.id).dump() + ",\"labels\":[";
    for (std::size_t t = 0; t < inst.labels.size(); ++t) {
      if (t > 0) line += ',';
      line += std::to_string(inst.labels[t]);
    }
    line += "],\"features\":";
    append_rows(line, inst.features, data.feature_dim);
    line += ",\"loss\":";
    append_rows(line, inst.losses, data.num_states);
    line += "}\n";
    out << line;
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  auto out = open_output(path);
  write_dataset(out, data);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string dataset_fingerprint(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t j = 0; j < n; ++j) {
      h ^= p[j];
      h *= 0x100000001b3ULL;
    }
  };
  const auto mix_u64 = [&](std::uint64_t v) { mix(&v, sizeof v); };
  mix_u64(data.num_states);
  mix_u64(data.feature_dim);
  mix_u64(data.instances.size());
  for (const auto& inst : data.instances) {
    mix_u64(inst.id.size());
    mix(inst.id.data(), inst.id.size());
    mix_u64(inst.labels.size());
    for (int y : inst.labels) mix_u64(static_cast<std::uint64_t>(y));
    for (double v : inst.features) mix(&v, sizeof v);
    for (double v : inst.losses) mix(&v, sizeof v);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

ProblemOptions Model::problem_options() const {
  ProblemOptions options;
  options.tying = tying;
  options.transition_features = transition_features;
  options.kernel = kernel;
  return options;
}

namespace {

Model model_header(const Problem& problem) {
  Model m;
  m.num_states = problem.num_states();
  m.feature_dim = problem.feature_dim();
  m.lambda = problem.lambda();
  m.tying = problem.tying();
  m.transition_features = problem.transition_features();
  m.kernel = problem.kernel();
  m.node_templates = problem.num_node_templates();
  m.edge_templates = problem.num_edge_templates();
  return m;
}

}  // namespace

Model explicit_model(const Problem& problem, const WeightVector& w) {
  Model m = model_header(problem);
  m.mode = Model::Mode::explicit_features;
  m.weights = w;
  return m;
}

Model kernel_model(const Problem& problem, const BetaState& beta) {
  Model m = model_header(problem);
  m.mode = Model::Mode::kernel;
  m.beta = beta.beta;
  m.train_fingerprint = dataset_fingerprint(problem.data());
  return m;
}

void write_model(std::ostream& out, const Model& model) {
  const bool kernel = model.mode == Model::Mode::kernel;
  std::string doc = "{\n";
  doc += "  \"format\": \"" + std::string(kModelFormat) + "\",\n";
  doc += "  \"version\": " + std::to_string(Model::kVersion) + ",\n";
  doc += std::string("  \"mode\": \"") + (kernel ? "kernel" : "explicit") + "\",\n";
  doc += "  \"num_states\": " + std::to_string(model.num_states) + ",\n";
  doc += "  \"feature_dim\": " + std::to_string(model.feature_dim) + ",\n";
  doc += "  \"lambda\": " + format_double(model.lambda) + ",\n";
  doc += "  \"tying\": \"" + tying_name(model.tying) + "\",\n";
  doc += std::string("  \"transition_features\": ") +
         (model.transition_features ? "true" : "false") + ",\n";
  doc += "  \"kernel\": {\"family\": \"" + model.kernel.name() +
         "\", \"gamma\": " + format_double(model.kernel.gamma) + "},\n";
  doc += "  \"node_templates\": " + std::to_string(model.node_templates) + ",\n";
  doc += "  \"edge_templates\": " + std::to_string(model.edge_templates) + ",\n";
  if (!kernel) {
    doc += "  \"weights\": ";
    append_array(doc, model.weights.values());
    doc += "\n}\n";
  } else {
    doc += "  \"train_fingerprint\": \"" + model.train_fingerprint + "\",\n";
    doc += "  \"beta\": [";
    for (std::size_t i = 0; i < model.beta.size(); ++i) {
      const auto& m = model.beta[i];
      doc += i > 0 ? ",\n    " : "\n    ";
      doc += "{\"length\": " + std::to_string(m.length()) + ", \"node\": ";
      append_array(doc, m.node_values());
      doc += ", \"edge\": ";
      append_array(doc, m.edge_values());
      doc += "}";
    }
    doc += "\n  ]\n}\n";
  }
  out << doc;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  auto out = open_output(path);
  write_model(out, model);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Model read_model(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("model: invalid JSON: ") + e.what());
  }
  const auto require = [&](const char* key) -> const json& {
    if (!doc.is_object() || !doc.contains(key)) {
      throw ParseError(0, std::string("model: missing \"") + key + "\"");
    }
    return doc[key];
  };
  if (require("format") != kModelFormat) throw ParseError(0, "model: not an egap model file");
  if (require("version") != Model::kVersion) throw ParseError(0, "model: unsupported version");

  Model m;
  const std::string mode = require("mode").get<std::string>();
  if (mode == "explicit") {
    m.mode = Model::Mode::explicit_features;
  } else if (mode == "kernel") {
    m.mode = Model::Mode::kernel;
  } else {
    throw ParseError(0, "model: unknown mode '" + mode + "'");
  }
  try {
    m.num_states = as_size(require("num_states"), 0, "num_states");
    m.feature_dim = as_size(require("feature_dim"), 0, "feature_dim");
    m.lambda = as_double(require("lambda"), 0, "lambda");
    m.tying = parse_tying(require("tying").get<std::string>());
    m.transition_features = require("transition_features").get<bool>();
    const json& kernel = require("kernel");
    m.kernel.family = parse_kernel_family(kernel.at("family").get<std::string>());
    m.kernel.gamma = as_double(kernel.at("gamma"), 0, "gamma");
    m.node_templates = as_size(require("node_templates"), 0, "node_templates");
    m.edge_templates = as_size(require("edge_templates"), 0, "edge_templates");
    if (m.num_states < 2 || m.feature_dim == 0) throw ParseError(0, "model: invalid shape");

    if (m.mode == Model::Mode::explicit_features) {
      m.weights = WeightVector(m.num_states, m.feature_dim, m.node_templates, m.edge_templates);
      const json& weights = require("weights");
      if (!weights.is_array() || weights.size() != m.weights.size()) {
        throw ParseError(0, "model: weight vector has the wrong length");
      }
      auto values = m.weights.values();
      for (std::size_t j = 0; j < values.size(); ++j) values[j] = as_double(weights[j], 0, "weight");
    } else {
      m.train_fingerprint = require("train_fingerprint").get<std::string>();
      for (const auto& entry : require("beta")) {
        const std::size_t len = as_size(entry.at("length"), 0, "length");
        MarginalTables tables(len, m.num_states, 0.0);
        const json& node = entry.at("node");
        const json& edge = entry.at("edge");
        auto node_values = tables.node_values();
        auto edge_values = tables.edge_values();
        if (node.size() != node_values.size() || edge.size() != edge_values.size()) {
          throw ParseError(0, "model: beta table has the wrong size");
        }
        for (std::size_t j = 0; j < node_values.size(); ++j) node_values[j] = as_double(node[j], 0, "beta");
        for (std::size_t j = 0; j < edge_values.size(); ++j) edge_values[j] = as_double(edge[j], 0, "beta");
        m.beta.instances.push_back(std::move(tables));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    if (dynamic_cast<const ParseError*>(&e) != nullptr) throw;
    throw ParseError(0, std::string("model: ") + e.what());
  }
  return m;
}

Model load_model(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_model(in);
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.k << ',' << format_double(r.tau) << ',' << format_double(r.mu) << ','
        << format_double(r.primal) << ',' << format_double(r.dual) << ',' << format_double(r.gap)
        << ',' << format_double(r.smoothed_primal) << ',' << format_double(r.bound) << ','
        << (r.egap_ok ? "true" : "false") << ',' << format_double(r.elapsed_ms) << '\n';
  }
}

void save_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& trace) {
  auto out = open_output(path);
  write_trace(out, trace);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<TraceRecord> read_trace(std::istream& in) {
  std::string text;
  std::size_t line = 1;
  if (!std::getline(in, text) || text != kTraceHeader) throw ParseError(1, "trace: bad header");
  std::vector<TraceRecord> out;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(text);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw ParseError(line, "trace: expected 10 columns");
    const auto num = [&](std::size_t c) {
      char* end = nullptr;
      const double v = std::strtod(cells[c].c_str(), &end);
      if (end == cells[c].c_str() || *end != '\0') throw ParseError(line, "trace: bad number");
      return v;
    };
    TraceRecord r;
    r.k = static_cast<std::size_t>(num(0));
    r.tau = num(1);
    r.mu = num(2);
    r.primal = num(3);
    r.dual = num(4);
    r.gap = num(5);
    r.smoothed_primal = num(6);
    r.bound = num(7);
    if (cells[8] != "true" && cells[8] != "false") throw ParseError(line, "trace: bad flag");
    r.egap_ok = cells[8] == "true";
    r.elapsed_ms = num(9);
    out.push_back(r);
  }
  return out;
}

std::vector<TraceRecord> load_trace(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_trace(in);
}

}  // namespace egap
