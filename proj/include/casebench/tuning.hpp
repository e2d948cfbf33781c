#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "casebench/classifier.hpp"
#include "casebench/forest.hpp"

namespace casebench {

/// One hyperparameter: a finite set of values or a closed interval.
struct Domain {
  std::string name;
  std::vector<double> values;  // nonempty for a finite set
  double lo = 0;
  double hi = 0;
  bool log_scale = false;  // intervals only: normalize in log space

  bool is_finite() const { return !values.empty(); }

  static Domain set(std::string name, std::vector<double> values);
  static Domain interval(std::string name, double lo, double hi, bool log_scale = false);
};

/// Parameters in declaration order; grid order varies the last one fastest.
using SearchSpace = std::vector<Domain>;

/// Throws std::invalid_argument for empty or malformed domains or duplicate names.
void validate_space(const SearchSpace& space);

struct Evaluation {
  ParamMap point;
  double error = 0;
  bool failed = false;
};

struct TuneResult {
  ParamMap best;
  double best_error = 0;
  std::vector<Evaluation> log;  // evaluation order
};

/// Validation error of a parameter assignment. Throwing, or returning a
/// non-finite value, marks the point as failed.
using Objective = std::function<double(const ParamMap&)>;

/// Full Cartesian product in lexicographic order; failed points score +inf
/// and ties keep the earliest point.
TuneResult grid_search(const Objective& objective, const SearchSpace& space);

struct BayesOptions {
  int n_iter = 30;  // model-guided evaluations after the random ones
  int n_init = 5;   // uniform random evaluations
  std::uint64_t seed = 0;
  int n_candidates = 512;  // random acquisition probes per iteration
  int n_starts = 8;        // best probes refined by local search
};

/// Gaussian-process minimization: Matern 5/2 kernel on inputs scaled to the
/// unit cube, nugget 1e-6, length-scale and signal variance fitted by maximum
/// likelihood every iteration, expected improvement maximized by seeded
/// multi-start pattern search. Finite sets are snapped to the nearest member.
/// A failed evaluation is recorded as the worst error observed so far plus 1.
TuneResult bayes_opt(const Objective& objective, const SearchSpace& space, const BayesOptions& options = {});

/// CSV "iteration,<parameter names>,error,failed".
void write_tuning_log(std::ostream& out, const SearchSpace& space, const TuneResult& result);

struct ThresholdChoice {
  double cutoff = 0.5;
  double accuracy = 0;  // fraction correct at the cutoff
};

/// Accuracy of score >= c for c = 0.01, 0.02, ..., 0.99; the best cutoff
/// wins, ties going to the one nearest 0.5 and then to the smaller.
ThresholdChoice threshold_sweep(std::span<const double> scores, std::span<const int> labels);

enum class EliminationMode { recursive, nonrecursive };

struct EliminationOptions {
  Index start = 250;  // size of the initial importance trim
  Index min_size = 10;
  Index max_size = 200;
  Index step = 10;
};

struct EliminationStep {
  Index size = 0;
  double accuracy = 0;          // validation accuracy
  std::vector<Index> features;  // column ids of the input matrix
};

struct EliminationResult {
  Index n_top = 0;
  std::vector<Index> features;  // retained at n_top, in ranking order
  std::vector<Index> initial;   // the initial top-`start` ranking
  std::vector<EliminationStep> steps;  // ascending size
};

/// Fits a forest on the given columns; its threshold is used for validation.
using ForestTrainer = std::function<RandomForestModel(const SpMat& x, std::span<const int> y)>;

/// Trims to the `start` most important features of an initial fit, then
/// scores candidate sizes min_size..max_size. Nonrecursive mode truncates the
/// initial ranking; recursive mode steps down from the trimmed set, refitting
/// and re-ranking at each size. Returns the most accurate size, ties going to
/// the smaller. Throws std::invalid_argument with fewer than min_size features.
EliminationResult feature_eliminate(const ForestTrainer& trainer, const SpMat& x, std::span<const int> y,
                                    const SpMat& x_val, std::span<const int> y_val, EliminationMode mode,
                                    const EliminationOptions& options = {});

}  // namespace casebench
