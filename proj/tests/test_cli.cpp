#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "egap/cli.hpp"
#include "egap/io.hpp"

namespace egap {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("egap-cli-" + std::string(info->name()) + "-" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override {
    fs::remove_all(dir_);
    ::unsetenv("EGAP_WORKERS");
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::vector<std::string>& args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  static std::string slurp(const std::string& file) {
    std::ifstream in(file);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  // Trace rows without the wall-clock column.
  static std::vector<std::string> timeless(const std::vector<TraceRecord>& trace) {
    std::vector<std::string> rows;
    for (auto r : trace) {
      r.elapsed_ms = 0.0;
      std::ostringstream s;
      write_trace(s, {r});
      rows.push_back(s.str());
    }
    return rows;
  }

  std::size_t reported(const std::string& key) const {
    std::istringstream in(out_.str());
    std::string k;
    std::string v;
    while (in >> k) {
      std::getline(in, v);
      if (k == key) return std::stoul(v);
    }
    return 0;
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, GenerateIsDeterministic) {
  ASSERT_EQ(run({"generate", "--seed", "11", "--n", "5", "--out", path("a.jsonl")}), 0);
  ASSERT_EQ(run({"generate", "--seed", "11", "--n", "5", "--out", path("b.jsonl")}), 0);
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  EXPECT_EQ(run({"generate", "--n", "0"}), cli::kInputError);
}

TEST_F(CliTest, TrainWritesTraceAndModel) {
  ASSERT_EQ(run({"generate", "--out", path("ref.jsonl")}), 0);
  ASSERT_EQ(run({"train", "--data", path("ref.jsonl"), "--lambda", "0.1", "--epsilon", "1e-3",
                 "--trace-out", path("t.csv"), "--model-out", path("m.json")}),
            cli::kSuccess)
      << err_.str();
  const auto trace = load_trace(path("t.csv"));
  ASSERT_FALSE(trace.empty());
  EXPECT_LT(trace.back().gap, 1e-3);
  for (const auto& r : trace) {
    EXPECT_GE(r.gap, -1e-9);
    EXPECT_LE(r.gap, r.bound);
    EXPECT_TRUE(r.egap_ok);
  }
  const std::size_t egap_iterations = reported("iterations");

  ASSERT_EQ(run({"predict", "--model", path("m.json"), "--data", path("ref.jsonl")}), 0);
  EXPECT_NE(out_.str().find("mean_hamming"), std::string::npos);

  ASSERT_EQ(run({"train", "--data", path("ref.jsonl"), "--solver", "expgrad", "--max-iter",
                 "1000000", "--trace-out", path("e.csv")}),
            cli::kSuccess);
  EXPECT_GT(reported("iterations"), egap_iterations);
  EXPECT_EQ(load_trace(path("e.csv")).size(), reported("iterations"));
}

TEST_F(CliTest, TracesAreIdenticalAcrossRerunsAndWorkerCounts) {
  const std::vector<std::string> base = {"train", "--seed", "7", "--epsilon", "1e-3"};
  auto with = [&](const std::string& trace) {
    auto args = base;
    args.insert(args.end(), {"--trace-out", path(trace)});
    return args;
  };
  ASSERT_EQ(run(with("a.csv")), 0);
  ASSERT_EQ(run(with("b.csv")), 0);
  ::setenv("EGAP_WORKERS", "3", 1);
  ASSERT_EQ(run(with("c.csv")), 0);
  const auto a = timeless(load_trace(path("a.csv")));
  EXPECT_EQ(a, timeless(load_trace(path("b.csv"))));
  EXPECT_EQ(a, timeless(load_trace(path("c.csv"))));
}

TEST_F(CliTest, KernelModeModelsPredict) {
  ASSERT_EQ(run({"generate", "--out", path("ref.jsonl")}), 0);
  ASSERT_EQ(run({"train", "--data", path("ref.jsonl"), "--mode", "kernel", "--model-out",
                 path("k.json")}),
            0);
  ASSERT_EQ(run({"train", "--data", path("ref.jsonl"), "--model-out", path("e.json")}), 0);
  ASSERT_EQ(run({"predict", "--model", path("k.json"), "--data", path("ref.jsonl")}), 0);
  const std::string kernel_out = out_.str();
  ASSERT_EQ(run({"predict", "--model", path("e.json"), "--data", path("ref.jsonl")}), 0);
  EXPECT_EQ(kernel_out, out_.str());

  ASSERT_EQ(run({"generate", "--seed", "99", "--out", path("other.jsonl")}), 0);
  EXPECT_EQ(run({"predict", "--model", path("k.json"), "--data", path("other.jsonl")}),
            cli::kInputError);
  EXPECT_EQ(run({"predict", "--model", path("k.json"), "--data", path("other.jsonl"),
                 "--train-data", path("ref.jsonl")}),
            0);
  EXPECT_EQ(run({"train", "--data", path("ref.jsonl"), "--mode", "kernel", "--kernel",
                 "gaussian", "--gamma", "0.5"}),
            0);
  EXPECT_EQ(run({"train", "--data", path("ref.jsonl"), "--kernel", "gaussian"}),
            cli::kInputError);
}

TEST_F(CliTest, ExitCodes) {
  {
    std::ofstream bad(path("bad.jsonl"));
    bad << "{\"labels\":[0,1],\"features\":[[1],[2]]}\n{\"labels\":[0],\"features\":[[1]\n";
  }
  EXPECT_EQ(run({"train", "--data", path("bad.jsonl")}), cli::kInputError);
  EXPECT_NE(err_.str().find("line 2"), std::string::npos) << err_.str();
  EXPECT_EQ(run({"train", "--data", path("missing.jsonl")}), cli::kInputError);
  EXPECT_EQ(run({"train", "--lambda", "0"}), cli::kInputError);
  EXPECT_EQ(run({"train", "--epsilon", "-1"}), cli::kInputError);
  EXPECT_EQ(run({"train", "--solver", "sgd"}), cli::kInputError);
  EXPECT_EQ(run({"bogus"}), cli::kInputError);
  EXPECT_EQ(run({"train", "--epsilon", "1e-9", "--max-iter", "5"}), cli::kBudgetExhausted);
  EXPECT_EQ(run({"--help"}), 0);

  {
    std::ofstream huge(path("huge.jsonl"));
    huge << "{\"labels\":[0,1],\"features\":[[1e300],[-1e300]]}\n";
  }
  EXPECT_EQ(run({"train", "--data", path("huge.jsonl")}), cli::kNumericalFailure) << err_.str();

  ASSERT_EQ(run({"generate", "--out", path("ref.jsonl")}), 0);
  ASSERT_EQ(run({"train", "--data", path("ref.jsonl"), "--model-out", path("m.json")}), 0);
  ASSERT_EQ(run({"generate", "--dim", "3", "--out", path("narrow.jsonl")}), 0);
  EXPECT_EQ(run({"predict", "--model", path("m.json"), "--data", path("narrow.jsonl")}),
            cli::kInputError);
}

TEST_F(CliTest, ReportListsBothIterationCounts) {
  ASSERT_EQ(run({"report", "--seed", "7"}), 0) << err_.str();
  const std::size_t egap = reported("egap_iterations");
  const std::size_t expgrad = reported("expgrad_iterations");
  EXPECT_GT(egap, 0u);
  EXPECT_GT(expgrad, egap);
  EXPECT_NE(out_.str().find("excessive_gap_all_rows yes"), std::string::npos);
}

}  // namespace
}  // namespace egap
