#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "casebench/classifier.hpp"
#include "casebench/stats.hpp"
#include "casebench/synth.hpp"
#include "casebench/textprep.hpp"
#include "casebench/tuning.hpp"

namespace casebench {

struct SplitFractions {
  double train = 0.57;
  double val = 0.13;
  double test = 0.30;
};

struct SplitPlan {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  SplitFractions fractions;
  bool stratify = false;
};

/// Throws std::invalid_argument unless the fractions are positive and sum to
/// 1 and the seeds are nonempty and distinct.
void validate_plan(const SplitPlan& plan);

struct Split {
  std::vector<Index> train, val, test;  // each sorted
};

/// Seeded shuffle; train and validation sizes are the rounded fractions and
/// the remainder goes to test. Stratified splits apply the same rule per class.
/// Throws DataError for fewer than 3 documents.
Split split_indices(const std::vector<int>& labels, std::uint64_t seed, const SplitFractions& fractions,
                    bool stratify = false);

/// Labels plus count matrices for each n-gram order over a corpus-wide vocabulary.
struct ExperimentData {
  std::vector<int> labels;
  std::map<int, SpMat> counts;  // n-gram order -> document-term counts

  Index n_docs() const { return static_cast<Index>(labels.size()); }
  const SpMat& matrix(int order) const;
};

ExperimentData prepare_data(const Corpus& corpus, const std::vector<int>& orders = {1, 2},
                            const StopwordSet& stopwords = default_stopwords());

struct ModelSpec {
  std::string name;  // column label, unique within an experiment
  ModelConfig config;
};

/// Every known kind with its defaults, named by display_name.
std::vector<ModelSpec> default_models(std::uint64_t seed = 0);

struct CellResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Confusion confusion;
  MetricRow metrics;
  double seconds = 0;
};

struct MetricMeans {
  std::optional<double> sens, spec, ppv, npv, f1, acc;  // over splits where defined
  double fp = 0, fn = 0, n_pos = 0, diff_pos = 0;
};

struct ModelResult {
  std::string name;
  std::string kind;
  bool ok = false;
  std::string error;  // first failure; the column is then unusable
  std::vector<CellResult> cells;  // plan seed order
  MetricMeans means;
};

struct ExperimentResult {
  std::vector<std::uint64_t> seeds;
  std::vector<ModelResult> models;
};

struct RunOptions {
  int n_threads = 1;  // concurrent (model, split) cells; 0: hardware concurrency
  std::ostream* log = nullptr;
};

/// Fits each model on every split's training rows and scores its test rows.
/// Model seeds are derived from the configured seed and the split seed, so
/// results do not depend on the thread count.
ExperimentResult run_experiment(const ExperimentData& data, const std::vector<ModelSpec>& models,
                                const SplitPlan& plan, const RunOptions& options = {});

/// Ordered reduction of finished cells into per-model means.
MetricMeans mean_metrics(const std::vector<CellResult>& cells);

enum class CompareMetric { accuracy, diff_pos };

struct ComparisonRow {
  std::string name;
  double mean = 0;
  bool referent = false;
  std::optional<WilcoxonResult> paired;  // absent for the referent
  std::optional<double> adjusted_p;
  std::optional<WilcoxonResult> one_sample;  // diff_pos against 0
};

struct ComparisonTable {
  CompareMetric metric = CompareMetric::accuracy;
  std::string referent;
  double alpha = 0.05;
  std::vector<ComparisonRow> rows;  // successful models in result order
};

/// Referent is the best mean (highest accuracy, or smallest |diff_pos|), ties
/// to the earlier model. Paired signed-rank tests against it are adjusted
/// together by Benjamini-Yekutieli. Failed models are left out. Throws
/// std::invalid_argument with fewer than 2 splits or 2 successful models.
ComparisonTable compare_models(const ExperimentResult& result, CompareMetric metric);

std::string to_string(CompareMetric metric);

/// Aligned text: Model, Sens, Spec, PPV, NPV, F1, Acc, Acc p (adj).
void write_performance_table(std::ostream& out, const ExperimentResult& result, const ComparisonTable* accuracy);
/// Aligned text: Model, FP, FN, n pos, Diff pos, p (one-sample), Pair. p (adjusted).
void write_prevalence_table(std::ostream& out, const ExperimentResult& result, const ComparisonTable* diff_pos);

void write_results_csv(std::ostream& out, const ExperimentResult& result);
void write_summary_csv(std::ostream& out, const ExperimentResult& result);
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonTable>& tables);
/// Wall-clock seconds per cell; kept apart so the other outputs are reproducible.
void write_timing_csv(std::ostream& out, const ExperimentResult& result);

/// Reads results.csv back into per-split cells (means recomputed).
ExperimentResult read_results_csv(std::istream& in);

/// Writes results.csv, summary.csv, comparison.csv, table2.txt, table3.txt and
/// optionally timing.csv into `dir`, creating it. Comparisons are skipped when
/// fewer than 2 splits or models succeeded.
void write_report(const std::string& dir, const ExperimentResult& result, bool timing = true);

/// Key-value experiment description. Lines are `key = value`; `#` starts a
/// comment. Keys: corpus, seeds, fractions, stratify, output_dir, threads,
/// model_seed, tune, tuning_seed, synth.<field> (n_docs, prevalence,
/// vocab_size, zipf_exponent, n_uninformative, separation, target_accuracy,
/// label_noise, length_log_mean, length_log_sd, seed), and repeated
/// `model = <kind> [name=<label>] [<param>=<value> ...]`. With no model lines
/// every kind runs with its defaults.
struct ExperimentConfig {
  std::optional<std::string> corpus_path;
  std::optional<SynthSpec> synth;
  std::optional<double> target_accuracy;  // overrides synth separation
  std::vector<ModelSpec> models;
  SplitPlan plan;
  std::optional<std::string> output_dir;
  int n_threads = 1;
  bool tune = false;
  std::uint64_t tuning_seed = 0;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Synthesizes or loads the configured corpus.
Corpus config_corpus(const ExperimentConfig& config);

struct TuneOptions {
  std::uint64_t seed = 0;     // tuning split and optimizer seed
  int n_iter = 0;             // guided optimizer iterations; 0 keeps each model's own budget
  SplitFractions fractions;
  std::ostream* log = nullptr;
};

struct TuneOutcome {
  ModelConfig config;  // defaults overridden by the tuned values
  SearchSpace space;
  TuneResult search;
  std::optional<EliminationResult> elimination;  // rf only
  std::optional<ThresholdChoice> threshold;      // rf only
};

/// Search space used for a kind.
SearchSpace tuning_space(const std::string& kind);

/// Tunes one model on the tuning split: grid search for the topic and
/// latent-semantic pipelines, Gaussian-process optimization for the rest, and
/// for the forest a threshold sweep followed by nonrecursive feature
/// elimination. Validation error is 1 - accuracy.
TuneOutcome tune_model(const ExperimentData& data, const ModelConfig& config, const TuneOptions& options = {});

}  // namespace casebench
