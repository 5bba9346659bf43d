#include "egap/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "egap/egap_solver.hpp"
#include "egap/errors.hpp"
#include "egap/expgrad.hpp"
#include "egap/generate.hpp"
#include "egap/io.hpp"
#include "egap/predict.hpp"

namespace egap::cli {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct TrainArgs {
  std::string data;
  double lambda = 0.1;
  double epsilon = 1e-3;
  std::size_t max_iter = 10000;
  std::string solver = "egap";
  std::string mode = "explicit";
  std::string kernel = "linear";
  double gamma = 1.0;
  std::uint64_t seed = 7;
  std::size_t eval_stride = 1;
  std::string trace_out;
  std::string model_out;
  std::string tying = "tied";
  bool no_transitions = false;
  double step_size = 0.0;
  std::size_t expgrad_max_iter = 1000000;
};

struct PredictArgs {
  std::string model;
  std::string data;
  std::string train_data;
  std::string out;
};

void add_problem_options(CLI::App& cmd, TrainArgs& a) {
  cmd.add_option("--data", a.data, "Dataset file (JSON lines); generated from --seed when omitted");
  cmd.add_option("--lambda", a.lambda, "Regularization strength")->check(CLI::PositiveNumber);
  cmd.add_option("--epsilon", a.epsilon, "Target duality gap")->check(CLI::PositiveNumber);
  cmd.add_option("--max-iter", a.max_iter, "Iteration limit")->check(CLI::PositiveNumber);
  cmd.add_option("--mode", a.mode, "Weight representation")
      ->check(CLI::IsMember({"explicit", "kernel"}));
  cmd.add_option("--kernel", a.kernel, "Node kernel (kernel mode)")
      ->check(CLI::IsMember({"linear", "gaussian"}));
  cmd.add_option("--gamma", a.gamma, "Gaussian kernel width")->check(CLI::PositiveNumber);
  cmd.add_option("--seed", a.seed, "Seed for the generated dataset when --data is omitted");
  cmd.add_option("--eval-stride", a.eval_stride, "Evaluate objectives every N steps")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--tying", a.tying, "Template tying of clique blocks")
      ->check(CLI::IsMember({"tied", "per-position"}));
  cmd.add_flag("--no-transitions", a.no_transitions, "Drop transition indicator features");
  cmd.add_option("--step-size", a.step_size, "ExpGrad step size (default 1/L)")
      ->check(CLI::NonNegativeNumber);
}

Dataset load_training_data(const TrainArgs& a) {
  if (!a.data.empty()) return load_dataset(a.data);
  GeneratorConfig config = reference_config();
  config.seed = a.seed;
  return generate_dataset(config);
}

Problem make_problem(const TrainArgs& a) {
  ProblemOptions options;
  options.tying = parse_tying(a.tying);
  options.transition_features = !a.no_transitions;
  options.kernel.family = parse_kernel_family(a.kernel);
  options.kernel.gamma = a.gamma;
  if (a.mode == "explicit" && options.kernel.family != KernelSpec::Family::linear) {
    throw std::invalid_argument("--mode explicit supports only --kernel linear");
  }
  return build_problem(load_training_data(a), a.lambda, options);
}

struct Outcome {
  RunStatus status = RunStatus::budget_exhausted;
  std::size_t iterations = 0;  // index k of the returned iterate
  double primal = 0.0;
  double dual = 0.0;
  std::vector<TraceRecord> trace;
  std::optional<Model> model;

  double gap() const { return primal - dual; }
};

Model model_of(const Problem& p, const WeightVector& w) { return explicit_model(p, w); }
Model model_of(const Problem& p, const BetaState& beta) { return kernel_model(p, beta); }

template <class Backend>
Outcome run_egap(const Problem& problem, const TrainArgs& a) {
  const EgapSolver<Backend> solver(problem);
  RunOptions options;
  options.epsilon = a.epsilon;
  options.max_iter = a.max_iter;
  options.eval_stride = a.eval_stride;
  auto result = solver.run(options);
  Outcome o;
  o.status = result.status;
  o.iterations = result.state.k;
  o.primal = result.state.primal;
  o.dual = result.state.dual;
  o.trace = std::move(result.trace);
  o.model = model_of(problem, result.state.w);
  return o;
}

template <class Backend>
Outcome run_expgrad(const Problem& problem, const TrainArgs& a, std::size_t max_iter) {
  const Backend backend(problem);
  ExpGradOptions options;
  options.step_size = a.step_size;
  options.epsilon = a.epsilon;
  options.max_iter = max_iter;
  auto result = expgrad_run(backend, options);
  Outcome o;
  o.status = result.status;
  o.iterations = result.trace.back().k;
  o.primal = result.primal;
  o.dual = result.dual;
  o.trace = std::move(result.trace);
  o.model = model_of(problem, result.w);
  return o;
}

Outcome dispatch(const Problem& problem, const TrainArgs& a, const std::string& solver,
                 std::size_t expgrad_max_iter) {
  const bool kernel = a.mode == "kernel";
  if (solver == "egap") {
    return kernel ? run_egap<KernelBackend>(problem, a) : run_egap<ExplicitBackend>(problem, a);
  }
  return kernel ? run_expgrad<KernelBackend>(problem, a, expgrad_max_iter)
                : run_expgrad<ExplicitBackend>(problem, a, expgrad_max_iter);
}

const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::degenerate: return "degenerate";
    case RunStatus::budget_exhausted: break;
  }
  return "budget_exhausted";
}

int train(const TrainArgs& a, std::ostream& out) {
  const Problem problem = make_problem(a);
  const Outcome o = dispatch(problem, a, a.solver, a.max_iter);
  if (!a.trace_out.empty()) save_trace(a.trace_out, o.trace);
  if (!a.model_out.empty()) save_model(a.model_out, *o.model);

  out << "solver " << a.solver << (a.solver == "expgrad" ? " (plain fixed step)" : "") << '\n'
      << "mode " << a.mode << '\n'
      << "status " << status_name(o.status) << '\n'
      << "iterations " << o.iterations << '\n'
      << "primal " << num(o.primal) << '\n'
      << "dual " << num(o.dual) << '\n'
      << "gap " << num(o.gap()) << '\n';
  return o.status == RunStatus::budget_exhausted ? kBudgetExhausted : kSuccess;
}

struct TraceChecks {
  bool egap_ok = true;
  bool within_bound = true;
  bool nonnegative = true;
};

TraceChecks check_trace(const std::vector<TraceRecord>& trace) {
  TraceChecks c;
  for (const auto& r : trace) {
    c.egap_ok = c.egap_ok && r.egap_ok;
    c.within_bound = c.within_bound && r.gap <= r.bound + 1e-9 * (1.0 + r.bound);
    c.nonnegative = c.nonnegative && r.gap >= -1e-9;
  }
  return c;
}

const TraceRecord* find_row(const std::vector<TraceRecord>& trace, std::size_t k) {
  for (const auto& r : trace)
    if (r.k == k) return &r;
  return nullptr;
}

int report(const TrainArgs& a, std::ostream& out) {
  const Problem problem = make_problem(a);
  const double budget = iteration_budget(problem, a.epsilon);
  const Outcome egap_run = dispatch(problem, a, "egap", a.max_iter);
  const Outcome eg_run = dispatch(problem, a, "expgrad", a.expgrad_max_iter);
  const TraceChecks checks = check_trace(egap_run.trace);
  const auto yes = [](bool b) { return b ? "yes" : "no"; };

  out << "sequences " << problem.size() << '\n'
      << "states " << problem.num_states() << '\n'
      << "feature_dim " << problem.feature_dim() << '\n'
      << "lambda " << num(problem.lambda()) << '\n'
      << "epsilon " << num(a.epsilon) << '\n'
      << "max_psi_norm " << num(problem.a_norm()) << (problem.a_norm_exact() ? "" : " (upper bound)")
      << '\n'
      << "lipschitz_L " << num(problem.lipschitz()) << '\n'
      << "d_prox " << num(problem.d_prox()) << '\n'
      << "iteration_budget " << num(budget) << '\n'
      << "egap_status " << status_name(egap_run.status) << '\n'
      << "egap_iterations " << egap_run.iterations << '\n'
      << "egap_gap " << num(egap_run.gap()) << '\n'
      << "egap_within_budget " << yes(static_cast<double>(egap_run.iterations) <= budget) << '\n'
      << "excessive_gap_all_rows " << yes(checks.egap_ok) << '\n'
      << "gap_within_bound_all_rows " << yes(checks.within_bound) << '\n'
      << "gap_nonnegative_all_rows " << yes(checks.nonnegative) << '\n';
  const TraceRecord* g10 = find_row(egap_run.trace, 10);
  const TraceRecord* g100 = find_row(egap_run.trace, 100);
  if (g10 != nullptr && g100 != nullptr && g10->gap > 0.0) {
    out << "gap_ratio_100_over_10 " << num(g100->gap / g10->gap) << " (limit "
        << num(3.0 * 11.0 * 12.0 / (101.0 * 102.0)) << ")\n";
  }
  out << "expgrad_step_size " << num(eg_run.trace.front().tau) << " (plain fixed step)\n"
      << "expgrad_status " << status_name(eg_run.status) << '\n'
      << "expgrad_iterations " << eg_run.iterations << '\n'
      << "expgrad_gap " << num(eg_run.gap()) << '\n'
      << "egap_fewer_iterations " << yes(egap_run.iterations < eg_run.iterations) << '\n';
  return egap_run.status == RunStatus::budget_exhausted ? kBudgetExhausted : kSuccess;
}

int predict_cmd(const PredictArgs& a, std::ostream& out) {
  const Model model = load_model(a.model);
  const Dataset data = load_dataset(a.data);
  std::optional<Dataset> training;
  if (model.mode == Model::Mode::kernel) {
    training = a.train_data.empty() ? data : load_dataset(a.train_data);
  }
  const PredictionReport r = predict(model, data, training);
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out, std::ios::trunc);
    if (!file) throw IoError("cannot open '" + a.out + "' for writing");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::string labels;
    for (std::size_t t = 0; t < r.labelings[i].size(); ++t) {
      if (t > 0) labels += ',';
      labels += std::to_string(r.labelings[i][t]);
    }
    out << data[i].id << '\t' << labels << '\t' << r.errors[i] << '\n';
    if (file) {
      file << "{\"id\":\"" << data[i].id << "\",\"labels\":[" << labels
           << "],\"errors\":" << r.errors[i] << "}\n";
    }
  }
  out << "mean_hamming " << num(r.mean_hamming) << '\n';
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Max-margin Markov network training on linear chains", "egap"};
  app.require_subcommand(1);

  GeneratorConfig gen;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
  generate->add_option("--seed", gen.seed, "Random seed");
  generate->add_option("--n", gen.num_sequences, "Number of sequences")->check(CLI::PositiveNumber);
  generate->add_option("--min-length", gen.min_length, "Shortest sequence (nodes)");
  generate->add_option("--max-length", gen.max_length, "Longest sequence (nodes)");
  generate->add_option("--states", gen.num_states, "Number of labels s");
  generate->add_option("--dim", gen.feature_dim, "Node feature dimension");
  generate->add_option("--noise", gen.noise, "Label flip probability");
  generate->add_option("--out", gen_out, "Output path (stdout when omitted)");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write its trace");
  add_problem_options(*train_cmd, train_args);
  train_cmd->add_option("--solver", train_args.solver, "Solver")
      ->check(CLI::IsMember({"egap", "expgrad"}));
  train_cmd->add_option("--trace-out", train_args.trace_out, "Trace CSV path");
  train_cmd->add_option("--model-out", train_args.model_out, "Model file path");

  TrainArgs report_args;
  auto* report_cmd =
      app.add_subcommand("report", "Run both solvers and check the convergence guarantees");
  add_problem_options(*report_cmd, report_args);
  report_cmd->add_option("--expgrad-max-iter", report_args.expgrad_max_iter,
                         "Iteration limit for the ExpGrad baseline")
      ->check(CLI::PositiveNumber);

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Decode a dataset with a trained model");
  predict->add_option("--model", predict_args.model, "Model file")->required();
  predict->add_option("--data", predict_args.data, "Dataset to decode")->required();
  predict->add_option("--train-data", predict_args.train_data,
                      "Training dataset of a kernel model (defaults to --data)");
  predict->add_option("--out", predict_args.out, "Write labelings as JSON lines");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kInputError;
  }

  try {
    if (generate->parsed()) {
      const Dataset data = generate_dataset(gen);
      if (gen_out.empty()) {
        write_dataset(out, data);
      } else {
        save_dataset(gen_out, data);
      }
      return kSuccess;
    }
    if (train_cmd->parsed()) return train(train_args, out);
    if (report_cmd->parsed()) return report(report_args, out);
    return predict_cmd(predict_args, out);
  } catch (const NumericalError& e) {
    err << "error: numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::invalid_argument& e) {  // includes ParseError and StructuralError
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::length_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace egap::cli
