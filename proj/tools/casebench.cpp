#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "casebench/classifier.hpp"
#include "casebench/corpus_io.hpp"
#include "casebench/errors.hpp"
#include "casebench/harness.hpp"
#include "casebench/synth.hpp"
#include "casebench/textprep.hpp"
#include "casebench/tuning.hpp"

using namespace casebench;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string default_output_dir() {
  if (const char* env = std::getenv("CASEBENCH_OUTPUT_DIR"); env && *env) return env;
  return "results";
}

// Prefixes data errors with the file they came from.
template <typename F>
auto with_path(const std::string& path, F&& load) {
  try {
    return load();
  } catch (const DataError& e) {
    const std::string what = e.what();
    if (what.find(path) != std::string::npos) throw;
    throw DataError(path + ": " + what);
  }
}

std::ofstream open_output(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  return out;
}

StopwordSet stopwords_from(const std::string& path) {
  return path.empty() ? default_stopwords() : with_path(path, [&] { return load_stopwords(path); });
}

ParamMap parse_params(const std::vector<std::string>& items) {
  ParamMap params;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects name=value, got '" + item + "'");
    try {
      std::size_t used = 0;
      const std::string value = item.substr(eq + 1);
      params[item.substr(0, eq)] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw UsageError("--param value is not a number in '" + item + "'");
    }
  }
  return params;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<int> needed_orders(const std::vector<ModelSpec>& models) {
  std::set<int> orders;
  for (const auto& m : models) orders.insert(make_classifier(m.config)->ngrams());
  return {orders.begin(), orders.end()};
}

struct PreprocessArgs {
  std::string corpus, stopwords, out;
  bool stats = false;
};

void run_preprocess(const PreprocessArgs& a) {
  const Corpus corpus = with_path(a.corpus, [&] { return load_corpus(a.corpus); });
  const StopwordSet stopwords = stopwords_from(a.stopwords);
  std::ofstream file;
  if (!a.out.empty()) file = open_output(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  for (const auto& doc : corpus) {
    out << doc.id << '\t';
    const TokenList tokens = preprocess(doc.text, stopwords);
    for (std::size_t i = 0; i < tokens.size(); ++i) out << (i ? " " : "") << tokens[i];
    out << '\n';
  }
  if (a.stats) {
    const CorpusStats stats = word_count_stats(corpus);
    auto row = [](const char* name, const FiveNumberSummary& s) {
      std::cerr << name << ": min " << s.min << ", q1 " << s.q1 << ", median " << s.median << ", q3 " << s.q3
                << ", max " << s.max << '\n';
    };
    row("total words", stats.total);
    row("unique words", stats.unique);
  }
}

struct DtmArgs {
  std::string corpus, stopwords, out, vocab_in, vocab_out, labels_out, weighting = "count";
  int ngrams = 1;
  std::size_t min_df = 1;
};

void run_dtm(const DtmArgs& a) {
  const Corpus corpus = with_path(a.corpus, [&] { return load_corpus(a.corpus); });
  const StopwordSet stopwords = stopwords_from(a.stopwords);
  const Weighting weighting = [&] {
    try {
      return parse_weighting(a.weighting);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  const auto tokens = tokenize_corpus(corpus, stopwords);
  const Vocabulary vocab = a.vocab_in.empty() ? build_vocabulary(tokens, a.ngrams, a.min_df)
                                              : with_path(a.vocab_in, [&] { return load_vocabulary(a.vocab_in); });
  if (!a.vocab_in.empty() && vocab.n_max > a.ngrams) {
    throw UsageError("--vocab-in holds bigrams but --ngrams is " + std::to_string(a.ngrams));
  }
  DocTermMatrix m = build_matrix(tokens, vocab);
  if (weighting == Weighting::binary) m = binarize(m);
  if (weighting == Weighting::tfidf) m = tfidf(m);
  {
    auto out = open_output(a.out);
    write_dtm(out, m);
  }
  if (!a.vocab_out.empty()) {
    auto out = open_output(a.vocab_out);
    write_vocabulary(out, vocab);
  }
  if (!a.labels_out.empty()) {
    const auto labels = corpus_labels(corpus);
    auto out = open_output(a.labels_out);
    write_labels(out, labels);
  }
  std::cerr << "dtm: " << m.n_docs() << " documents, " << m.n_features() << " features, " << m.nnz()
            << " nonzeros\n";
}

struct TrainArgs {
  std::string kind, dtm, labels, val_dtm, val_labels, out;
  std::vector<std::string> params;
  std::uint64_t seed = 0;
};

DocTermMatrix load_model_input(const std::string& path) {
  DocTermMatrix m = with_path(path, [&] { return load_dtm(path); });
  if (m.weighting == Weighting::tfidf) {
    throw DataError(path + ": models take count or binary matrices and apply their own weighting");
  }
  return m;
}

void run_train(const TrainArgs& a) {
  ModelConfig config{a.kind, parse_params(a.params), a.seed};
  std::unique_ptr<Classifier> model;
  try {
    model = make_classifier(config);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.val_dtm.empty() != a.val_labels.empty()) throw UsageError("--val-dtm and --val-labels go together");
  const DocTermMatrix x = load_model_input(a.dtm);
  const auto y = with_path(a.labels, [&] { return load_labels(a.labels, x.n_docs()); });
  SpMat x_val(0, x.n_features());
  std::vector<int> y_val;
  if (!a.val_dtm.empty()) {
    x_val = load_model_input(a.val_dtm).values;
    y_val = with_path(a.val_labels, [&] { return load_labels(a.val_labels, x_val.rows()); });
  }
  model->fit(x.values, y, x_val, y_val);
  save_classifier(a.out, *model);
  std::cerr << "train: " << display_name(a.kind) << " on " << x.n_docs() << " documents -> " << a.out << '\n';
}

struct PredictArgs {
  std::string model, dtm, out;
  std::optional<double> threshold;
};

void run_predict(const PredictArgs& a) {
  const auto model = with_path(a.model, [&] { return load_classifier(a.model); });
  const DocTermMatrix x = load_model_input(a.dtm);
  if (x.n_features() != model->n_features()) {
    throw DataError(a.dtm + ": " + std::to_string(x.n_features()) + " features, model expects " +
                    std::to_string(model->n_features()));
  }
  const double threshold = a.threshold.value_or(model->default_threshold());
  const Eigen::VectorXd scores = model->score(x.values);
  std::ofstream file;
  if (!a.out.empty()) file = open_output(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << "row,label,score\n";
  for (Index i = 0; i < scores.size(); ++i) {
    out << i << ',' << (scores[i] >= threshold ? 1 : 0) << ',' << format_value(scores[i]) << '\n';
  }
}

struct TuneArgs {
  std::string config, out;
  std::vector<std::string> kinds;
  std::optional<std::uint64_t> seed;
  int n_iter = 0;
};

void run_tune(const TuneArgs& a) {
  const ExperimentConfig config = with_path(a.config, [&] { return load_config(a.config); });
  std::vector<ModelSpec> models;
  if (a.kinds.empty()) {
    models = config.models;
  } else {
    for (const auto& kind : a.kinds) {
      const auto it = std::find_if(config.models.begin(), config.models.end(),
                                   [&](const ModelSpec& m) { return m.config.kind == kind || m.name == kind; });
      if (it != config.models.end()) {
        models.push_back(*it);
      } else {
        models.push_back({display_name(kind), {kind, {}, 0}});
        try {
          make_classifier(models.back().config);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }
    }
  }
  TuneOptions options;
  options.seed = a.seed.value_or(config.tuning_seed);
  options.n_iter = a.n_iter;
  options.fractions = config.plan.fractions;
  options.log = &std::cerr;
  const auto& seeds = config.plan.seeds;
  if (std::find(seeds.begin(), seeds.end(), options.seed) != seeds.end()) {
    throw UsageError("tuning seed " + std::to_string(options.seed) + " is one of the experiment split seeds");
  }
  const Corpus corpus = config_corpus(config);
  const ExperimentData data = prepare_data(corpus, needed_orders(models));
  const std::string dir = a.out.empty() ? config.output_dir.value_or(default_output_dir()) : a.out;
  std::filesystem::create_directories(dir);
  for (const auto& m : models) {
    const TuneOutcome outcome = tune_model(data, m.config, options);
    {
      auto log = open_output((std::filesystem::path(dir) / ("tuning_" + m.config.kind + ".csv")).string());
      write_tuning_log(log, outcome.space, outcome.search);
    }
    std::cout << "model = " << m.config.kind << " name=" << m.name;
    for (const auto& [k, v] : outcome.search.best) std::cout << ' ' << k << '=' << format_value(v);
    std::cout << '\n';
  }
}

struct SynthArgs {
  SynthSpec spec;
  std::optional<double> target_accuracy;
  std::string out;
};

void run_synth(SynthArgs a) {
  if (a.target_accuracy) a.spec.separation = separation_for_accuracy(a.spec, *a.target_accuracy);
  const Corpus corpus = synth_corpus(a.spec);
  save_corpus(a.out, corpus);
  std::cerr << "synth: " << corpus.size() << " documents, separation " << a.spec.separation
            << ", naive-Bayes-optimal accuracy " << bayes_optimal_accuracy(a.spec) << '\n';
}

struct ExperimentArgs {
  std::string config, out;
  std::optional<int> threads;
};

void run_experiment_command(const ExperimentArgs& a) {
  const ExperimentConfig config = with_path(a.config, [&] { return load_config(a.config); });
  std::vector<ModelSpec> models = config.models;
  const Corpus corpus = config_corpus(config);
  const ExperimentData data = prepare_data(corpus, needed_orders(models));
  std::cerr << "experiment: " << data.n_docs() << " documents, " << models.size() << " models, "
            << config.plan.seeds.size() << " splits\n";
  if (config.tune) {
    TuneOptions options;
    options.seed = config.tuning_seed;
    options.fractions = config.plan.fractions;
    options.log = &std::cerr;
    for (auto& m : models) m.config = tune_model(data, m.config, options).config;
  }
  RunOptions run;
  run.n_threads = a.threads.value_or(config.n_threads);
  run.log = &std::cerr;
  const ExperimentResult result = run_experiment(data, models, config.plan, run);
  const std::string dir = a.out.empty() ? config.output_dir.value_or(default_output_dir()) : a.out;
  write_report(dir, result);
  std::ifstream table2(std::filesystem::path(dir) / "table2.txt"), table3(std::filesystem::path(dir) / "table3.txt");
  std::cout << table2.rdbuf() << '\n' << table3.rdbuf();
  std::cerr << "experiment: wrote " << dir << '\n';
}

struct ResultsArgs {
  std::string results, out, metric = "accuracy";
};

ExperimentResult load_results(const std::string& path) {
  return with_path(path, [&] {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path);
    return read_results_csv(in);
  });
}

void run_compare(const ResultsArgs& a) {
  if (a.metric != "accuracy" && a.metric != "diff_pos") throw UsageError("--metric must be accuracy or diff_pos");
  const ExperimentResult result = load_results(a.results);
  ComparisonTable table;
  try {
    table = compare_models(result, a.metric == "accuracy" ? CompareMetric::accuracy : CompareMetric::diff_pos);
  } catch (const std::invalid_argument& e) {
    throw DataError(a.results + ": " + e.what());
  }
  std::ofstream file;
  if (!a.out.empty()) file = open_output(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  write_comparison_csv(out, {table});
}

void run_report(const ResultsArgs& a) {
  const ExperimentResult result = load_results(a.results);
  const std::string dir = a.out.empty() ? default_output_dir() : a.out;
  write_report(dir, result, false);
  std::ifstream table2(std::filesystem::path(dir) / "table2.txt"), table3(std::filesystem::path(dir) / "table3.txt");
  std::cout << table2.rdbuf() << '\n' << table3.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text classification benchmark for case-definition surveillance"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  PreprocessArgs pre;
  auto* preprocess = app.add_subcommand("preprocess", "Tokenize a corpus: lowercase, stopwords removed, stemmed");
  preprocess->add_option("--corpus", pre.corpus, "Input corpus (JSON Lines)")->required();
  preprocess->add_option("--stopwords", pre.stopwords, "Stopword list, one per line (default: built-in list)");
  preprocess->add_option("--out", pre.out, "Output file of 'id<TAB>tokens' lines (default: standard output)");
  preprocess->add_flag("--stats", pre.stats, "Print word-count summaries of the raw text to standard error");

  DtmArgs dtm_args;
  auto* dtm = app.add_subcommand("dtm", "Build a document-term matrix in triplet format");
  dtm->add_option("--corpus", dtm_args.corpus, "Input corpus (JSON Lines)")->required();
  dtm->add_option("--ngrams", dtm_args.ngrams, "Largest n-gram order")->check(CLI::Range(1, 2))->capture_default_str();
  dtm->add_option("--weighting", dtm_args.weighting, "count, binary or tfidf")->capture_default_str();
  dtm->add_option("--min-df", dtm_args.min_df, "Minimum document frequency")->capture_default_str();
  dtm->add_option("--stopwords", dtm_args.stopwords, "Stopword list, one per line (default: built-in list)");
  dtm->add_option("--vocab-in", dtm_args.vocab_in, "Reuse this vocabulary instead of building one");
  dtm->add_option("--vocab-out", dtm_args.vocab_out, "Write the vocabulary ('index term df' lines)");
  dtm->add_option("--labels-out", dtm_args.labels_out, "Write the labels ('row label' lines)");
  dtm->add_option("--out", dtm_args.out, "Output DTM file")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Fit one model and save it");
  train->add_option("--kind", train_args.kind, "Model kind: lda_svm, lsa_svm, mnb, svm, nbsvm, rf, nn_sum, nn_avg")
      ->required();
  train->add_option("--dtm", train_args.dtm, "Training DTM (count or binary)")->required();
  train->add_option("--labels", train_args.labels, "Training labels")->required();
  train->add_option("--val-dtm", train_args.val_dtm, "Validation DTM, used for early stopping");
  train->add_option("--val-labels", train_args.val_labels, "Validation labels");
  train->add_option("--param", train_args.params, "Hyperparameter override name=value (repeatable)");
  train->add_option("--seed", train_args.seed, "Random seed")->capture_default_str();
  train->add_option("--out", train_args.out, "Output model file")->required();

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Score documents with a saved model");
  predict->add_option("--model", predict_args.model, "Model file")->required();
  predict->add_option("--dtm", predict_args.dtm, "DTM built with the training vocabulary")->required();
  predict->add_option("--threshold", predict_args.threshold,
                      "Positive when score >= threshold (default: the model's own, 0.47 for rf)");
  predict->add_option("--out", predict_args.out, "Output CSV 'row,label,score' (default: standard output)");

  TuneArgs tune_args;
  auto* tune = app.add_subcommand("tune", "Tune hyperparameters on the dedicated tuning split");
  tune->add_option("--config", tune_args.config, "Experiment config naming the corpus")->required();
  tune->add_option("--kind", tune_args.kinds, "Model kind or name to tune (repeatable; default: the config's models)");
  tune->add_option("--seed", tune_args.seed, "Tuning split seed (default: the config's tuning_seed)");
  tune->add_option("--n-iter", tune_args.n_iter, "Guided optimizer iterations after 5 random ones (default: each model's own budget)")
      ->check(CLI::NonNegativeNumber);
  tune->add_option("--out", tune_args.out, "Directory for tuning logs (default: $CASEBENCH_OUTPUT_DIR or results)");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  synth->add_option("--n-docs", synth_args.spec.n_docs, "Number of documents")->capture_default_str();
  synth->add_option("--prevalence", synth_args.spec.prevalence, "Share of positive documents")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth->add_option("--vocab-size", synth_args.spec.vocab_size, "Vocabulary size")->capture_default_str();
  synth->add_option("--separation", synth_args.spec.separation, "Class separation (0: indistinguishable)")
      ->capture_default_str();
  synth->add_option("--target-accuracy", synth_args.target_accuracy,
                    "Choose the separation giving this naive-Bayes-optimal accuracy")
      ->excludes("--separation");
  synth->add_option("--label-noise", synth_args.spec.label_noise, "Chance a document's words follow the other class")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.spec.seed, "Random seed")->capture_default_str();
  synth->add_option("--out", synth_args.out, "Output corpus (JSON Lines)")->required();

  ExperimentArgs experiment_args;
  auto* experiment = app.add_subcommand("experiment", "Run every model over the seeded splits");
  experiment->add_option("--config", experiment_args.config, "Experiment config file")->required();
  experiment->add_option("--out", experiment_args.out,
                         "Output directory (default: config output_dir, then $CASEBENCH_OUTPUT_DIR, then results)");
  experiment->add_option("--threads", experiment_args.threads, "Concurrent cells (0: all cores)")
      ->check(CLI::NonNegativeNumber);

  ResultsArgs compare_args;
  auto* compare = app.add_subcommand("compare", "Referent comparison from a results.csv");
  compare->add_option("--results", compare_args.results, "results.csv from an experiment")->required();
  compare->add_option("--metric", compare_args.metric, "accuracy or diff_pos")->capture_default_str();
  compare->add_option("--out", compare_args.out, "Output CSV (default: standard output)");

  ResultsArgs report_args;
  auto* report = app.add_subcommand("report", "Render tables and CSV summaries from a results.csv");
  report->add_option("--results", report_args.results, "results.csv from an experiment")->required();
  report->add_option("--out", report_args.out, "Output directory (default: $CASEBENCH_OUTPUT_DIR or results)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*preprocess) run_preprocess(pre);
    if (*dtm) run_dtm(dtm_args);
    if (*train) run_train(train_args);
    if (*predict) run_predict(predict_args);
    if (*tune) run_tune(tune_args);
    if (*synth) run_synth(synth_args);
    if (*experiment) run_experiment_command(experiment_args);
    if (*compare) run_compare(compare_args);
    if (*report) run_report(report_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return 0;
}
