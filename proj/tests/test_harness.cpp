#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "casebench/errors.hpp"
#include "casebench/harness.hpp"
#include "casebench/synth.hpp"
#include "oracles.hpp"

using namespace casebench;

namespace {

Corpus keyword_corpus(std::size_t n) {
  Corpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 3 == 0);
    corpus.push_back({"d" + std::to_string(i), label ? "seizure seizure report" : "routine checkup visit", label});
  }
  return corpus;
}

SynthSpec small_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.n_docs = 150;
  spec.vocab_size = 100;
  spec.n_uninformative = 10;
  spec.separation = 0.5;
  spec.length_log_mean = std::log(50.0);
  spec.length_log_sd = 0.3;
  spec.seed = seed;
  return spec;
}

CellResult cell(std::uint64_t seed, std::int64_t correct_pos, std::int64_t false_pos) {
  CellResult c;
  c.seed = seed;
  c.ok = true;
  c.confusion = {correct_pos, false_pos, 50 - false_pos, 50 - correct_pos};
  c.metrics = metrics(c.confusion);
  return c;
}

ModelResult model_result(const std::string& name, const std::vector<std::int64_t>& tp,
                         const std::vector<std::int64_t>& fp) {
  ModelResult m;
  m.name = name;
  m.kind = "svm";
  m.ok = true;
  for (std::size_t s = 0; s < tp.size(); ++s) m.cells.push_back(cell(s + 1, tp[s], fp[s]));
  m.means = mean_metrics(m.cells);
  return m;
}

std::vector<double> per_split(const ModelResult& m, bool accuracy) {
  std::vector<double> v;
  for (const auto& c : m.cells) v.push_back(accuracy ? *c.metrics.acc : static_cast<double>(c.metrics.diff_pos));
  return v;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

}  // namespace

TEST(Split, SizesFollowFractions) {
  const std::vector<int> labels(100, 0);
  const Split s = split_indices(labels, 1, {});
  EXPECT_EQ(s.train.size(), 57U);
  EXPECT_EQ(s.val.size(), 13U);
  EXPECT_EQ(s.test.size(), 30U);
}

TEST(Split, DeterministicDisjointAndExhaustive) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.index(200);
    std::vector<int> labels(n);
    for (auto& y : labels) y = rng.bernoulli(0.5);
    const std::uint64_t seed = rng.next();
    const Split a = split_indices(labels, seed, {}), b = split_indices(labels, seed, {});
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    EXPECT_EQ(a.test, b.test);
    std::set<Index> all;
    for (const auto* part : {&a.train, &a.val, &a.test}) {
      EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
      all.insert(part->begin(), part->end());
    }
    EXPECT_EQ(all.size(), n) << trial;
    EXPECT_EQ(a.train.size() + a.val.size() + a.test.size(), n) << trial;
  }
}

TEST(Split, SeedsChangeMembershipAndStratifyKeepsRatio) {
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i < 80;
  EXPECT_NE(split_indices(labels, 1, {}).train, split_indices(labels, 2, {}).train);
  const Split s = split_indices(labels, 3, {}, true);
  std::size_t positives = 0;
  for (Index i : s.train) positives += labels[static_cast<std::size_t>(i)];
  EXPECT_EQ(positives, 46U);
  EXPECT_EQ(s.train.size(), 114U);
}

TEST(Split, RejectsTinyCorporaAndBadPlans) {
  EXPECT_THROW(split_indices({0, 1}, 1, {}), DataError);
  SplitPlan plan;
  plan.fractions = {0.5, 0.3, 0.3};
  EXPECT_THROW(validate_plan(plan), std::invalid_argument);
  plan = {};
  plan.seeds = {1, 1};
  EXPECT_THROW(validate_plan(plan), std::invalid_argument);
}

TEST(Experiment, MemorizableCorpusScoresPerfectly) {
  const ExperimentData data = prepare_data(keyword_corpus(60));
  SplitPlan plan;
  plan.seeds = {4};
  const auto result = run_experiment(data, {{"MNB", {"mnb", {}, 0}}}, plan);
  ASSERT_TRUE(result.models[0].ok) << result.models[0].error;
  EXPECT_EQ(result.models[0].cells[0].metrics.acc, 100.0);
  EXPECT_EQ(result.models[0].means.acc, 100.0);
}

TEST(Experiment, ConstantPositiveModel) {
  const ExperimentData data = prepare_data(keyword_corpus(60));
  SplitPlan plan;
  plan.seeds = {1, 2, 3};
  // Posterior probabilities are never below zero, so every call is positive.
  const auto result = run_experiment(data, {{"always", {"mnb", {{"threshold", 0.0}}, 0}}}, plan);
  const auto& m = result.models[0];
  ASSERT_TRUE(m.ok) << m.error;
  EXPECT_EQ(m.means.sens, 100.0);
  EXPECT_EQ(m.means.spec, 0.0);
  EXPECT_EQ(m.means.n_pos, 18.0);
  for (const auto& c : m.cells) EXPECT_EQ(c.metrics.n_pos, c.confusion.total());
}

TEST(Experiment, MeansOfIdenticalCellsEqualTheCell) {
  std::vector<CellResult> cells(10, cell(1, 40, 7));
  const MetricMeans means = mean_metrics(cells);
  EXPECT_DOUBLE_EQ(*means.acc, *cells[0].metrics.acc);
  EXPECT_DOUBLE_EQ(*means.f1, *cells[0].metrics.f1);
  EXPECT_EQ(means.fp, 7.0);
  EXPECT_EQ(means.diff_pos, static_cast<double>(cells[0].metrics.diff_pos));
}

TEST(Experiment, ReproducibleAcrossRunsAndThreads) {
  const ExperimentData data = prepare_data(synth_corpus(small_spec(3)));
  const std::vector<ModelSpec> models{{"MNB", {"mnb", {}, 1}},
                                      {"RF", {"rf", {{"n_trees", 10}, {"screen_trees", 10}, {"n_top", 30}}, 1}},
                                      {"bad", {"svm", {{"C", -1}}, 1}}};
  SplitPlan plan;
  plan.seeds = {1, 2, 3};
  const auto a = run_experiment(data, models, plan);
  RunOptions threaded;
  threaded.n_threads = 3;
  const auto b = run_experiment(data, models, plan, threaded);
  std::ostringstream ca, cb;
  write_results_csv(ca, a);
  write_results_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_TRUE(a.models[0].ok);
  EXPECT_TRUE(a.models[1].ok);
  EXPECT_FALSE(a.models[2].ok);
  EXPECT_FALSE(a.models[2].error.empty());
  for (const auto& m : a.models) {
    EXPECT_EQ(m.cells.size(), 3U);
    for (const auto& c : m.cells) {
      if (c.ok) {
        EXPECT_EQ(c.metrics.n_pos - (c.confusion.tp + c.confusion.fn), c.confusion.fp - c.confusion.fn);
      }
    }
  }
}

TEST(Experiment, RejectsDuplicateNames) {
  const ExperimentData data = prepare_data(keyword_corpus(30));
  const std::vector<ModelSpec> models{{"A", {"mnb", {}, 0}}, {"A", {"svm", {}, 0}}};
  EXPECT_THROW(run_experiment(data, models, {}), std::invalid_argument);
}

TEST(Compare, ChainedOracleOnThreeModels) {
  ExperimentResult result;
  for (std::uint64_t s = 1; s <= 10; ++s) result.seeds.push_back(s);
  result.models.push_back(model_result("A", {40, 41, 39, 42, 40, 43, 38, 41, 40, 42}, {5, 6, 4, 5, 7, 5, 6, 4, 5, 6}));
  result.models.push_back(model_result("B", {38, 40, 39, 39, 37, 41, 38, 40, 36, 40}, {6, 6, 5, 7, 7, 6, 5, 6, 8, 6}));
  result.models.push_back(model_result("C", {30, 45, 33, 44, 31, 46, 32, 43, 35, 41}, {9, 2, 8, 3, 9, 1, 7, 3, 6, 4}));

  const ComparisonTable acc = compare_models(result, CompareMetric::accuracy);
  EXPECT_EQ(acc.referent, "A");
  const auto ref = per_split(result.models[0], true);
  std::vector<double> raw;
  for (std::size_t k = 1; k < 3; ++k) {
    const auto other = per_split(result.models[k], true);
    std::vector<double> d(ref.size());
    for (std::size_t s = 0; s < d.size(); ++s) d[s] = ref[s] - other[s];
    raw.push_back(oracle::wilcoxon_enumeration_p(d));
  }
  const auto adjusted = oracle::by_adjust(raw);
  ASSERT_EQ(acc.rows.size(), 3U);
  EXPECT_TRUE(acc.rows[0].referent);
  EXPECT_FALSE(acc.rows[0].paired.has_value());
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_NEAR(acc.rows[k].paired->p_value, raw[k - 1], 1e-12);
    EXPECT_NEAR(*acc.rows[k].adjusted_p, adjusted[k - 1], 1e-12);
  }

  const ComparisonTable diff = compare_models(result, CompareMetric::diff_pos);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : diff.rows) best = std::min(best, std::abs(row.mean));
  for (const auto& row : diff.rows) {
    if (row.referent) {
      EXPECT_EQ(std::abs(row.mean), best);
    }
    ASSERT_TRUE(row.one_sample.has_value());
  }
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(diff.rows[k].one_sample->p_value, oracle::wilcoxon_enumeration_p(per_split(result.models[k], false)),
                1e-12);
  }
}

TEST(Compare, IdenticalModelsGiveUnitP) {
  ExperimentResult result;
  result.seeds = {1, 2, 3};
  result.models.push_back(model_result("A", {40, 41, 39}, {5, 6, 4}));
  result.models.push_back(model_result("B", {40, 41, 39}, {5, 6, 4}));
  const auto table = compare_models(result, CompareMetric::accuracy);
  EXPECT_EQ(table.referent, "A");
  EXPECT_EQ(*table.rows[1].adjusted_p, 1.0);
  EXPECT_TRUE(table.rows[1].paired->degenerate);
}

TEST(Compare, ReferentIsWeaklyBest) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    ExperimentResult result;
    result.seeds = {1, 2, 3, 4};
    for (int k = 0; k < 4; ++k) {
      std::vector<std::int64_t> tp, fp;
      for (int s = 0; s < 4; ++s) {
        tp.push_back(static_cast<std::int64_t>(rng.index(51)));
        fp.push_back(static_cast<std::int64_t>(rng.index(51)));
      }
      result.models.push_back(model_result("M" + std::to_string(k), tp, fp));
    }
    const auto acc = compare_models(result, CompareMetric::accuracy);
    for (const auto& row : acc.rows) {
      for (const auto& other : acc.rows) {
        if (row.referent) {
          EXPECT_GE(row.mean, other.mean);
        }
      }
    }
  }
}

TEST(Compare, RequiresTwoSplitsAndModels) {
  ExperimentResult one_split;
  one_split.seeds = {1};
  one_split.models = {model_result("A", {40}, {5}), model_result("B", {41}, {5})};
  EXPECT_THROW(compare_models(one_split, CompareMetric::accuracy), std::invalid_argument);
  ExperimentResult one_model;
  one_model.seeds = {1, 2};
  one_model.models = {model_result("A", {40, 41}, {5, 6})};
  EXPECT_THROW(compare_models(one_model, CompareMetric::accuracy), std::invalid_argument);
}

TEST(Report, ColumnOrders) {
  ExperimentResult result;
  result.seeds = {1, 2};
  result.models = {model_result("A", {40, 41}, {5, 6}), model_result("B", {30, 31}, {5, 6})};
  const auto acc = compare_models(result, CompareMetric::accuracy);
  const auto diff = compare_models(result, CompareMetric::diff_pos);
  std::ostringstream t2, t3, csv, summary, comparison;
  write_performance_table(t2, result, &acc);
  write_prevalence_table(t3, result, &diff);
  write_results_csv(csv, result);
  write_summary_csv(summary, result);
  write_comparison_csv(comparison, {acc, diff});

  std::istringstream header(first_line(t2.str()));
  std::vector<std::string> words{std::istream_iterator<std::string>(header), {}};
  EXPECT_EQ(words, (std::vector<std::string>{"Model", "Sens", "Spec", "PPV", "NPV", "F1", "Acc", "Acc", "p", "(adj)"}));
  std::istringstream header3(first_line(t3.str()));
  std::vector<std::string> words3{std::istream_iterator<std::string>(header3), {}};
  EXPECT_EQ(words3, (std::vector<std::string>{"Model", "FP", "FN", "n", "pos", "Diff", "pos", "p", "Pair.", "p",
                                              "(adjusted)"}));
  EXPECT_NE(t2.str().find('*'), std::string::npos);
  EXPECT_EQ(first_line(csv.str()),
            "model,kind,split,seed,status,tp,fp,tn,fn,sens,spec,ppv,npv,f1,acc,n_pos,diff_pos,error");
  EXPECT_EQ(first_line(comparison.str()),
            "metric,model,mean,referent,statistic,p_raw,p_adjusted,one_sample_statistic,one_sample_p,alpha");

  std::istringstream back(csv.str());
  const ExperimentResult reread = read_results_csv(back);
  std::ostringstream again;
  write_results_csv(again, reread);
  EXPECT_EQ(again.str(), csv.str());
}

TEST(Report, EmptyResultIsHeaderOnly) {
  const ExperimentResult empty;
  std::ostringstream t2, t3, csv, summary;
  write_performance_table(t2, empty, nullptr);
  write_prevalence_table(t3, empty, nullptr);
  write_results_csv(csv, empty);
  write_summary_csv(summary, empty);
  for (const auto* s : {&t2, &t3, &csv, &summary}) {
    const std::string text = s->str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1) << text;
  }
}

TEST(Report, WritesAllFiles) {
  ExperimentResult result;
  result.seeds = {1, 2};
  result.models = {model_result("A", {40, 41}, {5, 6}), model_result("B", {30, 31}, {5, 6})};
  const auto dir = std::filesystem::temp_directory_path() / "casebench_report_test";
  std::filesystem::remove_all(dir);
  write_report(dir.string(), result);
  for (const char* name : {"results.csv", "summary.csv", "comparison.csv", "timing.csv", "table2.txt", "table3.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  std::filesystem::remove_all(dir);
}

TEST(Config, ParsesModelsAndSynth) {
  std::istringstream in(
      "# demo\n"
      "synth.n_docs = 300\n"
      "synth.target_accuracy = 0.85\n"
      "seeds = 3, 4\n"
      "threads = 2\n"
      "model = mnb alpha=0.5\n"
      "model = rf name=Forest n_trees=50\n");
  const ExperimentConfig config = parse_config(in);
  ASSERT_TRUE(config.synth.has_value());
  EXPECT_EQ(config.synth->n_docs, 300);
  EXPECT_EQ(config.target_accuracy, 0.85);
  EXPECT_EQ(config.plan.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(config.n_threads, 2);
  ASSERT_EQ(config.models.size(), 2U);
  EXPECT_EQ(config.models[0].config.params.at("alpha"), 0.5);
  EXPECT_EQ(config.models[1].name, "Forest");
  EXPECT_EQ(config.models[1].config.params.at("n_trees"), 50);
}

TEST(Config, DefaultsToEveryModel) {
  std::istringstream in("corpus = docs.jsonl\n");
  const ExperimentConfig config = parse_config(in);
  EXPECT_EQ(config.models.size(), 8U);
  EXPECT_EQ(config.plan.seeds.size(), 10U);
}

TEST(Config, RejectsInvalidFiles) {
  for (const char* text : {"corpus = a\ncorpus = b\n", "corpus = a\nsynth.n_docs = 10\n", "seeds = 1\n",
                           "corpus = a\nseeds = 1, 2\ntune = true\ntuning_seed = 2\n", "corpus = a\nbogus = 1\n",
                           "corpus = a\nmodel = knn\n", "corpus = a\nno equals sign\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_config(in), DataError) << text;
  }
}

TEST(Synth, ZeroSeparationCoincides) {
  SynthSpec spec;
  spec.separation = 0;
  const auto d = synth_distributions(spec);
  EXPECT_EQ(d.positive, d.negative);
  EXPECT_NEAR(bayes_optimal_accuracy(spec), std::max(spec.prevalence, 1 - spec.prevalence), 1e-9);
}

TEST(Synth, DeterministicWithTargetPrevalence) {
  SynthSpec spec;
  spec.length_log_mean = std::log(30.0);
  const Corpus a = synth_corpus(spec), b = synth_corpus(spec);
  ASSERT_EQ(a.size(), 2000U);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].text, b[i].text);
    EXPECT_EQ(a[i].label, b[i].label);
    positives += *a[i].label;
  }
  EXPECT_NEAR(static_cast<double>(positives) / 2000.0, 0.489, 0.03);
}

TEST(Synth, SeparationControlsAccuracy) {
  SynthSpec spec;
  double previous = 0;
  for (double s : {0.0, 0.1, 0.2, 0.4}) {
    spec.separation = s;
    const double acc = bayes_optimal_accuracy(spec);
    EXPECT_GE(acc, previous);
    previous = acc;
  }
  const double s = separation_for_accuracy(spec, 0.9);
  spec.separation = s;
  EXPECT_NEAR(bayes_optimal_accuracy(spec), 0.9, 1e-6);
}

TEST(Synth, LengthModelMatchesQuartiles) {
  const auto [mu, sigma] = lognormal_from_quartiles(813, 2737);
  EXPECT_NEAR(std::exp(mu), std::sqrt(813.0 * 2737.0), 1e-9);
  EXPECT_NEAR(std::exp(mu + 0.6744897501960817 * sigma), 2737.0, 1e-6);
}

TEST(Synth, WordFrequenciesConverge) {
  SynthSpec spec;
  spec.n_docs = 10000;
  spec.separation = 0.3;
  spec.length_log_mean = std::log(200.0);
  const Corpus corpus = synth_corpus(spec);
  std::unordered_map<std::string, Index> index;
  for (Index j = 0; j < spec.vocab_size; ++j) index[synth_word(j)] = j;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(spec.vocab_size);
  for (const auto& doc : corpus) {
    for (const auto& w : split_words(doc.text)) counts[index.at(w)] += 1;
  }
  const Eigen::VectorXd expected = expected_word_distribution(spec);
  const double tv = 0.5 * (counts / counts.sum() - expected).cwiseAbs().sum();
  EXPECT_LT(tv, 0.01);
}
