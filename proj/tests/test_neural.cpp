#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "casebench/neural.hpp"
#include "oracles.hpp"

using namespace casebench;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Fixture {
  std::vector<FeatureSet> docs{{0, 2}, {1, 3, 4}, {2}, {0, 1, 2, 3, 4}, {4}, {}};
  std::vector<int> labels{1, 0, 1, 0, 1, 0};
};

EmbeddingNet random_net(Pooling pooling, std::uint64_t seed) {
  EmbeddingNet net = init_net(pooling, 5, 3, 0.0, 0.5, seed);
  net.output_weights = oracle::random_dense(3, 1, seed + 1).col(0);
  net.output_bias = 0.3;
  return net;
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

void check_gradient(Pooling pooling, const Eigen::MatrixXd* mask) {
  const Fixture f;
  EmbeddingNet net = random_net(pooling, 11);
  std::vector<std::size_t> rows(f.docs.size());
  std::iota(rows.begin(), rows.end(), 0);
  NetGradient grad;
  nn_loss_and_gradient(net, f.docs, f.labels, rows, mask, &grad);
  auto loss = [&](const EmbeddingNet& n) { return nn_loss_and_gradient(n, f.docs, f.labels, rows, mask, nullptr); };
  const double h = 1e-5;
  for (Index r = 0; r < net.embedding.rows(); ++r) {
    for (Index c = 0; c < net.embedding.cols(); ++c) {
      EmbeddingNet up = net, down = net;
      up.embedding(r, c) += h;
      down.embedding(r, c) -= h;
      EXPECT_LE(relative_error(grad.embedding(r, c), (loss(up) - loss(down)) / (2 * h)), 1e-4) << r << "," << c;
    }
  }
  for (Index k = 0; k < net.output_weights.size(); ++k) {
    EmbeddingNet up = net, down = net;
    up.output_weights[k] += h;
    down.output_weights[k] -= h;
    EXPECT_LE(relative_error(grad.output_weights[k], (loss(up) - loss(down)) / (2 * h)), 1e-4) << k;
  }
  EmbeddingNet up = net, down = net;
  up.output_bias += h;
  down.output_bias -= h;
  EXPECT_LE(relative_error(grad.output_bias, (loss(up) - loss(down)) / (2 * h)), 1e-4);
}

std::vector<FeatureSet> random_docs(std::size_t n, Index vocab, std::uint64_t seed, std::vector<int>& labels) {
  Rng rng(seed);
  std::vector<FeatureSet> docs(n);
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.bernoulli(0.5);
    for (Index j = 0; j < vocab; ++j) {
      const double p = (j % 2 == labels[i]) ? 0.4 : 0.1;
      if (rng.bernoulli(p)) docs[i].push_back(j);
    }
  }
  return docs;
}

}  // namespace

TEST(Neural, ZeroEmbeddingGivesBiasProbability) {
  EmbeddingNet net = random_net(Pooling::sum, 2);
  net.embedding.setZero();
  const Fixture f;
  for (const auto& doc : f.docs) EXPECT_DOUBLE_EQ(nn_forward(net, doc), sigmoid(0.3));
}

TEST(Neural, SingleTokenPoolingsAgree) {
  const EmbeddingNet sum = random_net(Pooling::sum, 4);
  EmbeddingNet avg = sum;
  avg.pooling = Pooling::avg;
  const FeatureSet doc{3};
  EXPECT_EQ(nn_forward(sum, doc), nn_forward(avg, doc));
}

TEST(Neural, AveragePoolOfSharedEmbedding) {
  EmbeddingNet net = random_net(Pooling::avg, 5);
  const Eigen::Vector3d v(0.25, -0.5, 0.125);
  for (Index j = 0; j < 5; ++j) net.embedding.col(j) = v;
  const FeatureSet doc{0, 1, 2, 4};
  EXPECT_EQ(nn_pool(net, doc), Eigen::VectorXd(v));
  EXPECT_EQ(nn_pool(net, FeatureSet{}), Eigen::VectorXd::Zero(3));
}

TEST(Neural, OutputIsProbability) {
  const EmbeddingNet net = random_net(Pooling::sum, 6);
  const Fixture f;
  const Eigen::VectorXd score = nn_score(net, f.docs);
  EXPECT_GT(score.minCoeff(), 0.0);
  EXPECT_LT(score.maxCoeff(), 1.0);
}

TEST(Neural, RejectsOutOfRangeFeature) {
  const EmbeddingNet net = random_net(Pooling::avg, 1);
  EXPECT_THROW(nn_forward(net, FeatureSet{5}), std::out_of_range);
}

TEST(Neural, InitializationFollowsPrevalence) {
  const EmbeddingNet net = init_net(Pooling::avg, 10, 4, 0.5, 0.2, 3);
  EXPECT_NEAR(net.output_bias, std::log(0.2 / 0.8), 1e-15);
  EXPECT_EQ(net.output_weights, Eigen::VectorXd::Zero(4));
  EXPECT_LE(net.embedding.cwiseAbs().maxCoeff(), 0.5);
}

TEST(Neural, FeatureSetsFromMatrix) {
  Eigen::MatrixXd dense(2, 4);
  dense << 0, 3, 0, 1, 2, 0, 0, 0;
  const auto sets = feature_sets(oracle::to_sparse(dense));
  EXPECT_EQ(sets[0], (FeatureSet{1, 3}));
  EXPECT_EQ(sets[1], (FeatureSet{0}));
}

TEST(NeuralGradient, SumPoolingMatchesFiniteDifferences) { check_gradient(Pooling::sum, nullptr); }

TEST(NeuralGradient, AveragePoolingMatchesFiniteDifferences) { check_gradient(Pooling::avg, nullptr); }

TEST(NeuralGradient, DropoutMaskMatchesFiniteDifferences) {
  Eigen::MatrixXd mask(3, 6);
  mask << 2, 0, 2, 2, 0, 2, 0, 2, 2, 0, 2, 2, 2, 2, 0, 2, 2, 0;
  check_gradient(Pooling::sum, &mask);
  check_gradient(Pooling::avg, &mask);
}

TEST(Adam, ThreeStepsOnSquare) {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double theta = 1.0, m = 0, v = 0;
  Eigen::VectorXd params(1);
  params << 1.0;
  AdamState state(1);
  for (int t = 1; t <= 3; ++t) {
    const double g = 2 * theta;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double m_hat = m / (1 - std::pow(b1, t)), v_hat = v / (1 - std::pow(b2, t));
    theta -= lr * m_hat / (std::sqrt(v_hat) + eps);
    Eigen::VectorXd grad(1);
    grad << 2 * params[0];
    adam_step(params, grad, state, lr);
    EXPECT_NEAR(params[0], theta, 1e-12) << t;
  }
  EXPECT_EQ(state.step, 3);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Eigen::VectorXd params = Eigen::VectorXd::LinSpaced(4, -1, 1);
  const Eigen::VectorXd before = params;
  AdamState state(4);
  for (int t = 0; t < 5; ++t) adam_step(params, Eigen::VectorXd::Zero(4), state, 0.01);
  EXPECT_EQ(params, before);
}

TEST(Adam, ConstantGradientStepsApproachLearningRate) {
  Eigen::VectorXd params = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd grad(2);
  grad << 3.0, -0.02;
  AdamState state(2);
  Eigen::VectorXd previous = params;
  for (int t = 0; t < 200; ++t) {
    previous = params;
    adam_step(params, grad, state, 0.01);
  }
  const Eigen::VectorXd step = params - previous;
  EXPECT_NEAR(step[0], -0.01, 1e-7);
  EXPECT_NEAR(step[1], 0.01, 1e-5);
}

TEST(NeuralTraining, ZeroLearningRateKeepsParameters) {
  std::vector<int> train_labels, val_labels;
  const auto train = random_docs(40, 12, 1, train_labels);
  const auto val = random_docs(15, 12, 2, val_labels);
  const EmbeddingNet net = init_net(Pooling::avg, 12, 4, 0.5, 0.5, 7);
  TrainPlan plan;
  plan.learning_rate = 0;
  plan.batch_size = 8;
  plan.patience = 2;
  plan.max_epochs = 5;
  const auto result = nn_train(net, plan, train, train_labels, val, val_labels);
  EXPECT_EQ(result.net.embedding, net.embedding);
  EXPECT_EQ(result.net.output_weights, net.output_weights);
  EXPECT_EQ(result.net.output_bias, net.output_bias);
}

TEST(NeuralTraining, ReproducibleAndEarlyStopped) {
  std::vector<int> train_labels, val_labels;
  const auto train = random_docs(80, 16, 3, train_labels);
  const auto val = random_docs(30, 16, 4, val_labels);
  for (Pooling pooling : {Pooling::sum, Pooling::avg}) {
    const EmbeddingNet net = init_net(pooling, 16, 6, 0.0, 0.5, 9);
    TrainPlan plan;
    plan.learning_rate = 0.05;
    plan.batch_size = 16;
    plan.patience = 3;
    plan.max_epochs = 60;
    plan.seed = 5;
    const auto a = nn_train(net, plan, train, train_labels, val, val_labels);
    const auto b = nn_train(net, plan, train, train_labels, val, val_labels);
    EXPECT_EQ(a.net.embedding, b.net.embedding);
    EXPECT_EQ(a.net.output_weights, b.net.output_weights);
    EXPECT_EQ(a.net.output_bias, b.net.output_bias);

    ASSERT_FALSE(a.history.empty());
    EXPECT_EQ(a.history.front().epoch, 0);
    const double best = a.history[static_cast<std::size_t>(a.best_epoch)].val_loss;
    for (const auto& record : a.history) {
      if (record.epoch >= a.best_epoch) {
        EXPECT_LE(best, record.val_loss);
      }
    }
    EXPECT_EQ(nn_loss(a.net, val, val_labels), best);
    EXPECT_LT(best, a.history.front().val_loss);
    const int last = a.history.back().epoch;
    EXPECT_TRUE(last == plan.max_epochs || last - a.best_epoch == plan.patience);

    std::ostringstream csv;
    write_loss_history_csv(csv, a.history);
    EXPECT_EQ(csv.str().substr(0, 26), "epoch,train_loss,val_loss\n");
  }
}

TEST(NeuralTraining, DropoutRunsAreSeeded) {
  std::vector<int> train_labels, val_labels;
  const auto train = random_docs(40, 10, 5, train_labels);
  const auto val = random_docs(20, 10, 6, val_labels);
  const EmbeddingNet net = init_net(Pooling::sum, 10, 4, 0.5, 0.5, 1);
  TrainPlan plan;
  plan.learning_rate = 0.01;
  plan.batch_size = 8;
  plan.patience = 2;
  plan.max_epochs = 6;
  plan.seed = 3;
  const auto a = nn_train(net, plan, train, train_labels, val, val_labels);
  const auto b = nn_train(net, plan, train, train_labels, val, val_labels);
  EXPECT_EQ(a.net.embedding, b.net.embedding);
}
