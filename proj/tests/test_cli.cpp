#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string output;  // stdout and stderr together
};

Outcome run(const std::string& args) {
  const std::string command = std::string(CASEBENCH_CLI) + " " + args + " 2>&1";
  Outcome outcome;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return outcome;
  char buffer[4096];
  std::size_t n = 0;
  while ((n = fread(buffer, 1, sizeof buffer, pipe)) > 0) outcome.output.append(buffer, n);
  const int status = pclose(pipe);
  outcome.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return outcome;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("casebench_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpExitsZeroForEverySubcommand) {
  EXPECT_EQ(run("--help").code, 0);
  for (const char* sub : {"preprocess", "dtm", "train", "predict", "tune", "synth", "experiment", "compare", "report"}) {
    const Outcome o = run(std::string(sub) + " --help");
    EXPECT_EQ(o.code, 0) << sub;
    EXPECT_NE(o.output.find("Usage"), std::string::npos) << sub;
  }
}

TEST_F(Cli, UsageAndDataErrorsHaveDistinctCodes) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("dtm --weighting binary").code, 1);
  const Outcome missing = run("predict --model " + path("absent.model") + " --dtm " + path("absent.dtm"));
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.output.find("absent.model"), std::string::npos) << missing.output;
  write("broken.jsonl", "{\"id\": \"a\", \"text\": \"x\", \"label\": 1}\nnot json\n");
  const Outcome broken = run("dtm --corpus " + path("broken.jsonl") + " --out " + path("x.dtm"));
  EXPECT_EQ(broken.code, 2);
  EXPECT_NE(broken.output.find("broken.jsonl"), std::string::npos) << broken.output;
}

TEST_F(Cli, SynthDtmTrainPredictPipeline) {
  ASSERT_EQ(run("synth --n-docs 120 --vocab-size 80 --separation 0.8 --seed 3 --out " + path("c.jsonl")).code, 0);
  const Outcome dtm = run("dtm --corpus " + path("c.jsonl") + " --weighting binary --vocab-out " + path("v.txt") +
                          " --labels-out " + path("y.txt") + " --out " + path("x.dtm"));
  ASSERT_EQ(dtm.code, 0) << dtm.output;
  ASSERT_EQ(run("dtm --corpus " + path("c.jsonl") + " --weighting binary --vocab-in " + path("v.txt") +
                " --vocab-out " + path("v2.txt") + " --out " + path("x2.dtm"))
                .code,
            0);
  EXPECT_EQ(slurp(path("v.txt")), slurp(path("v2.txt")));
  EXPECT_EQ(slurp(path("x.dtm")), slurp(path("x2.dtm")));

  const Outcome train = run("train --kind rf --param n_trees=20 --param screen_trees=20 --param n_top=20 --dtm " +
                            path("x.dtm") + " --labels " + path("y.txt") + " --seed 1 --out " + path("rf.model"));
  ASSERT_EQ(train.code, 0) << train.output;
  const Outcome predict =
      run("predict --model " + path("rf.model") + " --dtm " + path("x.dtm") + " --threshold 0.47 --out " +
          path("p.csv"));
  ASSERT_EQ(predict.code, 0) << predict.output;
  const std::string csv = slurp(path("p.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "row,label,score");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 121);

  EXPECT_EQ(run("train --kind mnb --param gamma=1 --dtm " + path("x.dtm") + " --labels " + path("y.txt") +
                " --out " + path("m.model"))
                .code,
            1);
}

TEST_F(Cli, ExperimentWritesReproducibleReports) {
  write("exp.cfg",
        "synth.n_docs = 150\n"
        "synth.vocab_size = 80\n"
        "synth.separation = 0.6\n"
        "synth.length_log_mean = 4\n"
        "seeds = 1, 2, 3\n"
        "model = mnb\n"
        "model = svm C=1\n"
        "model = nbsvm\n");
  for (const char* out : {"run1", "run2"}) {
    const Outcome o = run("experiment --config " + path("exp.cfg") + " --out " + path(out));
    ASSERT_EQ(o.code, 0) << o.output;
    EXPECT_NE(o.output.find("Acc p (adj)"), std::string::npos);
  }
  for (const char* name : {"results.csv", "summary.csv", "comparison.csv", "table2.txt", "table3.txt"}) {
    ASSERT_TRUE(fs::exists(dir_ / "run1" / name)) << name;
    EXPECT_EQ(slurp(dir_ / "run1" / name), slurp(dir_ / "run2" / name)) << name;
  }
  EXPECT_TRUE(fs::exists(dir_ / "run1" / "timing.csv"));

  const Outcome compare = run("compare --results " + path("run1/results.csv") + " --metric diff_pos");
  ASSERT_EQ(compare.code, 0) << compare.output;
  EXPECT_EQ(compare.output.substr(0, 6), "metric");
  ASSERT_EQ(run("report --results " + path("run1/results.csv") + " --out " + path("again")).code, 0);
  EXPECT_EQ(slurp(dir_ / "again" / "table2.txt"), slurp(dir_ / "run1" / "table2.txt"));
  EXPECT_EQ(slurp(dir_ / "again" / "summary.csv"), slurp(dir_ / "run1" / "summary.csv"));
}

TEST_F(Cli, BadConfigNamesTheFile) {
  write("bad.cfg", "corpus = a\ncorpus = b\n");
  const Outcome o = run("experiment --config " + path("bad.cfg"));
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.output.find("bad.cfg"), std::string::npos) << o.output;
}

TEST_F(Cli, PreprocessWritesTokens) {
  write("c.jsonl", "{\"id\": \"a\", \"text\": \"The patients were running tests.\", \"label\": 1}\n");
  const Outcome o = run("preprocess --corpus " + path("c.jsonl"));
  ASSERT_EQ(o.code, 0) << o.output;
  EXPECT_EQ(o.output.substr(0, 2), "a\t");
}
