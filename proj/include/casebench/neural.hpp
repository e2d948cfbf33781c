#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "casebench/linalg.hpp"

namespace casebench {

enum class Pooling { sum, avg };

/// A document is the sorted set of its distinct unigram feature indices.
using FeatureSet = std::vector<Index>;

std::vector<FeatureSet> feature_sets(const SpMat& x);

/// Embedding lookup, sum or mean pooling, dropout on the pooled vector while
/// training, then a single sigmoid unit.
struct EmbeddingNet {
  Pooling pooling = Pooling::avg;
  Eigen::MatrixXd embedding;       // embedding_size x n_features; column j embeds feature j
  Eigen::VectorXd output_weights;  // embedding_size
  double output_bias = 0;
  double dropout = 0;

  Index n_features() const { return embedding.cols(); }
  Index embedding_size() const { return embedding.rows(); }
};

/// Embeddings uniform in +-1/sqrt(e), zero output weights, bias at the
/// log-odds of the training prevalence.
EmbeddingNet init_net(Pooling pooling, Index n_features, Index embedding_size, double dropout, double prevalence,
                      std::uint64_t seed);

/// Pooled document vector; the empty document pools to zero.
Eigen::VectorXd nn_pool(const EmbeddingNet& net, std::span<const Index> doc);
/// Positive-class probability with dropout disabled.
double nn_forward(const EmbeddingNet& net, std::span<const Index> doc);
Eigen::VectorXd nn_score(const EmbeddingNet& net, const std::vector<FeatureSet>& docs);

struct NetGradient {
  Eigen::MatrixXd embedding;
  Eigen::VectorXd output_weights;
  double output_bias = 0;
};

/// Mean binary cross-entropy over `rows` and its gradient. `mask`, when
/// given, holds pre-scaled dropout multipliers, column b for rows[b].
double nn_loss_and_gradient(const EmbeddingNet& net, const std::vector<FeatureSet>& docs, std::span<const int> labels,
                            std::span<const std::size_t> rows, const Eigen::MatrixXd* mask, NetGradient* grad);
double nn_loss(const EmbeddingNet& net, const std::vector<FeatureSet>& docs, std::span<const int> labels);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(Index size = 0) : m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads, AdamState& state,
               double learning_rate);

struct TrainPlan {
  double learning_rate = 0.001;
  int batch_size = 32;
  int patience = 10;
  int max_epochs = 600;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;  // 0 is the untrained network
  double train_loss = 0;  // epoch 0: full pass; later: mean minibatch loss under dropout
  double val_loss = 0;
};

struct TrainResult {
  EmbeddingNet net;  // parameters from the best validation epoch
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Minibatch Adam on binary cross-entropy, stopping once the validation loss
/// has not improved for `patience` consecutive epochs. Throws NumericalError
/// on a non-finite loss.
TrainResult nn_train(EmbeddingNet net, const TrainPlan& plan, const std::vector<FeatureSet>& train_docs,
                     std::span<const int> train_labels, const std::vector<FeatureSet>& val_docs,
                     std::span<const int> val_labels);

/// CSV "epoch,train_loss,val_loss".
void write_loss_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace casebench
