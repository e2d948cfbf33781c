#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "casebench/harness.hpp"
#include "casebench/tuning.hpp"
#include "oracles.hpp"

using namespace casebench;

namespace {

/// Stump forest: one tree per column, voting positive where the value exceeds 0.5.
/// Importance decreases with column position, so rankings keep column order.
RandomForestModel stump_forest(const SpMat& x, std::span<const int>) {
  RandomForestModel model;
  model.n_features = x.cols();
  model.threshold = kDefaultForestThreshold;
  model.importance.resize(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    DecisionTree tree;
    tree.nodes = {{j, 0.5, 1, 2, 0.5}, {-1, 0, -1, -1, 0.0}, {-1, 0, -1, -1, 1.0}};
    model.trees.push_back(tree);
    model.importance[j] = static_cast<double>(x.cols() - j);
  }
  model.importance /= model.importance.sum();
  return model;
}

}  // namespace

TEST(Grid, OneDimensionalMinimum) {
  const SearchSpace space{Domain::set("x", {1, 2, 3})};
  const auto result = grid_search([](const ParamMap& p) { return std::abs(p.at("x") - 2); }, space);
  EXPECT_EQ(result.best.at("x"), 2);
  EXPECT_EQ(result.best_error, 0);
  EXPECT_EQ(result.log.size(), 3U);
}

TEST(Grid, TiesKeepFirstPointAndOrderIsLexicographic) {
  const SearchSpace space{Domain::set("a", {1, 2}), Domain::set("b", {10, 20, 30})};
  const auto result = grid_search([](const ParamMap&) { return 0.5; }, space);
  EXPECT_EQ(result.best.at("a"), 1);
  EXPECT_EQ(result.best.at("b"), 10);
  ASSERT_EQ(result.log.size(), 6U);
  EXPECT_EQ(result.log[1].point.at("b"), 20);
  EXPECT_EQ(result.log[3].point.at("a"), 2);
}

TEST(Grid, CountIsProductOfDomainSizes) {
  const auto lda = tuning_space("lda_svm");
  const auto result = grid_search([](const ParamMap& p) { return p.at("C"); }, lda);
  EXPECT_EQ(result.log.size(), 35U);
  const SearchSpace space{Domain::set("a", {1, 2, 3}), Domain::set("b", {1, 2}), Domain::set("c", {1, 2, 3, 4})};
  EXPECT_EQ(grid_search([](const ParamMap&) { return 1.0; }, space).log.size(), 24U);
}

TEST(Grid, FailuresScoreInfinity) {
  const SearchSpace space{Domain::set("x", {1, 2, 3})};
  const auto result = grid_search(
      [](const ParamMap& p) {
        if (p.at("x") == 1) throw std::runtime_error("boom");
        return p.at("x");
      },
      space);
  EXPECT_TRUE(result.log[0].failed);
  EXPECT_TRUE(std::isinf(result.log[0].error));
  EXPECT_EQ(result.best.at("x"), 2);
}

TEST(Grid, RejectsMalformedSpaces) {
  EXPECT_THROW(validate_space({Domain::set("x", {})}), std::invalid_argument);
  EXPECT_THROW(validate_space({Domain::interval("x", 1, 0)}), std::invalid_argument);
  EXPECT_THROW(validate_space({Domain::set("x", {1}), Domain::set("x", {2})}), std::invalid_argument);
  EXPECT_THROW(validate_space({Domain::interval("x", 0, 1, true)}), std::invalid_argument);
}

TEST(Bayes, FindsQuadraticMinimum) {
  const SearchSpace space{Domain::interval("x", 0, 1)};
  int close = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BayesOptions options;
    options.n_iter = 30;
    options.seed = seed;
    const auto result = bayes_opt([](const ParamMap& p) { return std::pow(p.at("x") - 0.3, 2); }, space, options);
    EXPECT_EQ(result.log.size(), 35U);
    close += std::abs(result.best.at("x") - 0.3) < 0.05;
  }
  EXPECT_GE(close, 9);
}

TEST(Bayes, ZeroIterationsReturnsBestInitialPoint) {
  const SearchSpace space{Domain::interval("x", -2, 2), Domain::set("k", {1, 2, 3})};
  BayesOptions options;
  options.n_iter = 0;
  options.seed = 4;
  const auto result = bayes_opt([](const ParamMap& p) { return std::abs(p.at("x")) + p.at("k"); }, space, options);
  ASSERT_EQ(result.log.size(), 5U);
  double best = result.log[0].error;
  for (const auto& e : result.log) best = std::min(best, e.error);
  EXPECT_EQ(result.best_error, best);
  for (const auto& e : result.log) {
    const double k = e.point.at("k");
    EXPECT_TRUE(k == 1 || k == 2 || k == 3);
  }
}

TEST(Bayes, BestErrorNonincreasingInBudgetAndDeterministic) {
  const SearchSpace space{Domain::interval("a", 1e-3, 10, true), Domain::interval("b", 0, 1)};
  auto f = [](const ParamMap& p) { return std::pow(std::log10(p.at("a")), 2) + std::pow(p.at("b") - 0.7, 2); };
  double previous = std::numeric_limits<double>::infinity();
  for (int n_iter : {0, 3, 6, 12}) {
    BayesOptions options;
    options.n_iter = n_iter;
    options.seed = 8;
    const auto a = bayes_opt(f, space, options), b = bayes_opt(f, space, options);
    EXPECT_LE(a.best_error, previous);
    previous = a.best_error;
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].point, b.log[i].point);
  }
}

TEST(Bayes, FailedPointsScoreWorstPlusOne) {
  const SearchSpace space{Domain::interval("x", 0, 1)};
  BayesOptions options;
  options.n_iter = 6;
  options.seed = 2;
  const auto result = bayes_opt(
      [](const ParamMap& p) {
        if (p.at("x") > 0.6) throw std::runtime_error("diverged");
        return p.at("x");
      },
      space, options);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& e : result.log) {
    if (e.failed) {
      EXPECT_EQ(e.error, (std::isinf(worst) ? 0.0 : worst) + 1.0);
    } else {
      worst = std::max(worst, e.error);
    }
  }
  EXPECT_LE(result.best.at("x"), 0.6);
  std::ostringstream csv;
  write_tuning_log(csv, space, result);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "iteration,x,error,failed");
}

TEST(Threshold, PerfectScoresPreferHalf) {
  const std::vector<double> scores{0, 1, 1, 0};
  const std::vector<int> labels{0, 1, 1, 0};
  const auto choice = threshold_sweep(scores, labels);
  EXPECT_EQ(choice.cutoff, 0.5);
  EXPECT_EQ(choice.accuracy, 1.0);
  const std::vector<double> two{0.2, 0.8};
  const std::vector<int> two_labels{0, 1};
  EXPECT_EQ(threshold_sweep(two, two_labels).cutoff, 0.5);
}

TEST(Threshold, MatchesEnumerationOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 10;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.bernoulli(0.4);
      scores[i] = std::clamp(0.15 + 0.3 * labels[i] + 0.35 * rng.uniform(), 0.0, 1.0);
    }
    const auto expected = oracle::threshold_enumeration(scores, labels);
    const auto got = threshold_sweep(scores, labels);
    EXPECT_NEAR(got.cutoff, expected.cutoff, 1e-12) << trial;
    EXPECT_EQ(got.accuracy, expected.accuracy) << trial;
  }
}

TEST(Elimination, MonotoneAccuracyPicksLargestSize) {
  // Row r holds ones in columns r..249: with the first s columns its score is
  // (s - r) / s, so the rows called positive grow with s.
  const Index n = 250;
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index j = r; j < n; ++j) dense(r, j) = 1;
  const SpMat x = oracle::to_sparse(dense);
  const std::vector<int> y(static_cast<std::size_t>(n), 1);
  for (auto mode : {EliminationMode::nonrecursive, EliminationMode::recursive}) {
    const auto result = feature_eliminate(stump_forest, x, y, x, y, mode);
    EXPECT_EQ(result.n_top, 200);
    EXPECT_EQ(result.initial.size(), 250U);
    ASSERT_EQ(result.steps.size(), 20U);
    for (std::size_t k = 1; k < result.steps.size(); ++k) {
      EXPECT_GT(result.steps[k].accuracy, result.steps[k - 1].accuracy);
    }
    const std::set<Index> initial(result.initial.begin(), result.initial.end());
    for (Index f : result.features) EXPECT_TRUE(initial.count(f));
  }
}

TEST(Elimination, NonrecursiveKeepsInformativeFeatures) {
  Rng rng(41);
  auto make = [&](Index rows, std::vector<int>& y) {
    Eigen::MatrixXd dense(rows, 20);
    y.assign(static_cast<std::size_t>(rows), 0);
    for (Index i = 0; i < rows; ++i) {
      double signal = 0;
      for (Index j = 0; j < 20; ++j) {
        dense(i, j) = rng.uniform();
        if (j < 5) signal += dense(i, j);
      }
      y[static_cast<std::size_t>(i)] = signal > 2.5;
    }
    return oracle::to_sparse(dense);
  };
  std::vector<int> y, y_val;
  const SpMat x = make(300, y), x_val = make(150, y_val);
  const ForestTrainer trainer = [](const SpMat& xs, std::span<const int> ys) {
    ForestOptions options;
    options.n_trees = 60;
    options.seed = 3;
    options.n_threads = 1;
    return rf_fit(xs, ys, options);
  };
  EliminationOptions options;
  options.start = 20;
  options.max_size = 20;
  const auto result = feature_eliminate(trainer, x, y, x_val, y_val, EliminationMode::nonrecursive, options);
  ASSERT_EQ(result.steps.size(), 2U);
  const auto& ten = result.steps[0];
  EXPECT_EQ(ten.size, 10);
  for (Index f = 0; f < 5; ++f) EXPECT_NE(std::find(ten.features.begin(), ten.features.end(), f), ten.features.end()) << f;

  double best = -1;
  Index best_size = 0;
  for (const auto& step : result.steps) {
    const auto model = trainer(select_columns(x, step.features), y);
    const auto predicted = rf_predict(model, select_columns(x_val, step.features));
    const double acc = oracle::accuracy(y_val, predicted);
    EXPECT_EQ(step.accuracy, acc) << step.size;
    if (acc > best) {
      best = acc;
      best_size = step.size;
    }
  }
  EXPECT_EQ(result.n_top, best_size);
}

TEST(Elimination, RejectsTooFewFeatures) {
  const SpMat x = oracle::to_sparse(Eigen::MatrixXd::Ones(4, 5));
  const std::vector<int> y{0, 1, 0, 1};
  EXPECT_THROW(feature_eliminate(stump_forest, x, y, x, y, EliminationMode::nonrecursive), std::invalid_argument);
}
