#include "casebench/neural.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "casebench/errors.hpp"
#include "casebench/model_checks.hpp"
#include "casebench/rng.hpp"

namespace casebench {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_doc(const EmbeddingNet& net, std::span<const Index> doc) {
  for (Index f : doc) {
    if (f < 0 || f >= net.n_features()) {
      throw std::out_of_range("feature index " + std::to_string(f) + " outside vocabulary of " +
                              std::to_string(net.n_features()));
    }
  }
}

}  // namespace

std::vector<FeatureSet> feature_sets(const SpMat& x) {
  std::vector<FeatureSet> docs(static_cast<std::size_t>(x.rows()));
  for (Index r = 0; r < x.outerSize(); ++r)
    for (SpMat::InnerIterator it(x, r); it; ++it) docs[static_cast<std::size_t>(r)].push_back(it.col());
  return docs;
}

EmbeddingNet init_net(Pooling pooling, Index n_features, Index embedding_size, double dropout, double prevalence,
                      std::uint64_t seed) {
  if (embedding_size < 1) throw std::invalid_argument("init_net: embedding size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("init_net: dropout must lie in [0, 1)");
  if (!(prevalence > 0.0 && prevalence < 1.0)) throw std::invalid_argument("init_net: prevalence must lie in (0, 1)");
  EmbeddingNet net;
  net.pooling = pooling;
  net.dropout = dropout;
  net.embedding.resize(embedding_size, n_features);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(embedding_size));
  for (Index j = 0; j < n_features; ++j)
    for (Index k = 0; k < embedding_size; ++k) net.embedding(k, j) = rng.uniform(-scale, scale);
  net.output_weights = Eigen::VectorXd::Zero(embedding_size);
  net.output_bias = std::log(prevalence / (1.0 - prevalence));
  return net;
}

Eigen::VectorXd nn_pool(const EmbeddingNet& net, std::span<const Index> doc) {
  check_doc(net, doc);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(net.embedding_size());
  for (Index f : doc) h += net.embedding.col(f);
  if (net.pooling == Pooling::avg && !doc.empty()) h /= static_cast<double>(doc.size());
  return h;
}

double nn_forward(const EmbeddingNet& net, std::span<const Index> doc) {
  return sigmoid(net.output_weights.dot(nn_pool(net, doc)) + net.output_bias);
}

Eigen::VectorXd nn_score(const EmbeddingNet& net, const std::vector<FeatureSet>& docs) {
  Eigen::VectorXd out(static_cast<Index>(docs.size()));
  for (std::size_t i = 0; i < docs.size(); ++i) out[static_cast<Index>(i)] = nn_forward(net, docs[i]);
  return out;
}

namespace {

// Pools documents either over their features or, when shorter, over the
// features they lack, subtracting from the embedding column sum.
class Pooler {
 public:
  Pooler(const EmbeddingNet& net, const std::vector<FeatureSet>& docs) : docs_(docs), plans_(docs.size()) {
    const Index n = net.n_features();
    std::vector<char> present(static_cast<std::size_t>(n));
    for (std::size_t d = 0; d < docs.size(); ++d) {
      check_doc(net, docs[d]);
      auto& plan = plans_[d];
      plan.size = static_cast<double>(docs[d].size());
      if (2 * static_cast<Index>(docs[d].size()) <= n) continue;
      std::fill(present.begin(), present.end(), 0);
      for (Index f : docs[d]) present[static_cast<std::size_t>(f)] = 1;
      plan.complement = true;
      any_complement_ = true;
      for (Index f = 0; f < n; ++f)
        if (!present[static_cast<std::size_t>(f)]) plan.absent.push_back(f);
    }
  }

  // Call after every parameter change.
  void refresh(const EmbeddingNet& net) {
    if (any_complement_) column_sum_ = net.embedding.rowwise().sum();
  }

  void pool(const EmbeddingNet& net, std::size_t d, Eigen::VectorXd& h) const {
    const auto& plan = plans_[d];
    if (plan.complement) {
      h = column_sum_;
      for (Index f : plan.absent) h -= net.embedding.col(f);
    } else {
      h.setZero(net.embedding_size());
      for (Index f : docs_[d]) h += net.embedding.col(f);
    }
    if (net.pooling == Pooling::avg && plan.size > 0) h /= plan.size;
  }

  // grad += dh x_d^T, with complement documents deferred into `dense`.
  void scatter(const EmbeddingNet& net, std::size_t d, Eigen::VectorXd& dh, Eigen::MatrixXd& grad,
               Eigen::VectorXd& dense) const {
    const auto& plan = plans_[d];
    if (net.pooling == Pooling::avg && plan.size > 0) dh /= plan.size;
    if (plan.complement) {
      dense += dh;
      for (Index f : plan.absent) grad.col(f) -= dh;
    } else {
      for (Index f : docs_[d]) grad.col(f) += dh;
    }
  }

 private:
  struct Plan {
    bool complement = false;
    double size = 0;
    std::vector<Index> absent;
  };
  const std::vector<FeatureSet>& docs_;
  std::vector<Plan> plans_;
  Eigen::VectorXd column_sum_;
  bool any_complement_ = false;
};

double loss_and_gradient(const EmbeddingNet& net, const Pooler& pooler, std::span<const int> labels,
                         std::span<const std::size_t> rows, const Eigen::MatrixXd* mask, NetGradient* grad) {
  const Index e = net.embedding_size();
  Eigen::VectorXd dense;
  if (grad) {
    grad->embedding.setZero(e, net.n_features());
    grad->output_weights.setZero(e);
    grad->output_bias = 0;
    dense.setZero(e);
  }
  if (rows.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  double loss = 0;
  Eigen::VectorXd h(e), dh(e);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const double y = labels[rows[b]];
    pooler.pool(net, rows[b], h);
    if (mask) h.array() *= mask->col(static_cast<Index>(b)).array();
    const double z = net.output_weights.dot(h) + net.output_bias;
    loss += softplus(z) - y * z;
    if (!grad) continue;
    const double dz = (sigmoid(z) - y) * inv_n;
    grad->output_weights += dz * h;
    grad->output_bias += dz;
    dh = dz * net.output_weights;
    if (mask) dh.array() *= mask->col(static_cast<Index>(b)).array();
    pooler.scatter(net, rows[b], dh, grad->embedding, dense);
  }
  if (grad && !dense.isZero(0.0)) grad->embedding.colwise() += dense;
  return loss * inv_n;
}

double full_loss(const EmbeddingNet& net, const Pooler& pooler, std::span<const int> labels) {
  std::vector<std::size_t> rows(labels.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return loss_and_gradient(net, pooler, labels, rows, nullptr, nullptr);
}

}  // namespace

double nn_loss_and_gradient(const EmbeddingNet& net, const std::vector<FeatureSet>& docs, std::span<const int> labels,
                            std::span<const std::size_t> rows, const Eigen::MatrixXd* mask, NetGradient* grad) {
  if (mask && (mask->rows() != net.embedding_size() || mask->cols() != static_cast<Index>(rows.size()))) {
    throw std::invalid_argument("nn_loss_and_gradient: mask shape mismatch");
  }
  Pooler pooler(net, docs);
  pooler.refresh(net);
  return loss_and_gradient(net, pooler, labels, rows, mask, grad);
}

double nn_loss(const EmbeddingNet& net, const std::vector<FeatureSet>& docs, std::span<const int> labels) {
  Pooler pooler(net, docs);
  pooler.refresh(net);
  return full_loss(net, pooler, labels);
}

void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads, AdamState& state,
               double learning_rate) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.epsilon);
}

TrainResult nn_train(EmbeddingNet net, const TrainPlan& plan, const std::vector<FeatureSet>& train_docs,
                     std::span<const int> train_labels, const std::vector<FeatureSet>& val_docs,
                     std::span<const int> val_labels) {
  if (train_docs.empty() || val_docs.empty()) throw std::invalid_argument("nn_train: empty training or validation set");
  check_binary_labels(train_labels, train_docs.size(), "nn_train");
  if (val_labels.size() != val_docs.size()) throw std::invalid_argument("nn_train: validation label count mismatch");
  if (plan.patience < 1) throw std::invalid_argument("nn_train: patience must be at least 1");
  if (!(plan.learning_rate >= 0)) throw std::invalid_argument("nn_train: learning rate must be non-negative");
  if (plan.batch_size < 1) throw std::invalid_argument("nn_train: batch size must be positive");

  auto check_finite = [](double loss, int epoch, const char* which) {
    if (!std::isfinite(loss)) {
      throw NumericalError(std::string("nn_train: non-finite ") + which + " loss at epoch " + std::to_string(epoch));
    }
  };

  Pooler train_pool(net, train_docs), val_pool(net, val_docs);
  train_pool.refresh(net);
  val_pool.refresh(net);

  TrainResult result;
  result.history.push_back({0, full_loss(net, train_pool, train_labels), full_loss(net, val_pool, val_labels)});
  check_finite(result.history.back().train_loss, 0, "training");
  check_finite(result.history.back().val_loss, 0, "validation");
  result.net = net;
  double best = result.history.back().val_loss;

  AdamState adam_e(net.embedding.size()), adam_u(net.output_weights.size()), adam_b(1);
  Rng rng(derive_seed(plan.seed, 1));
  std::vector<std::size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double keep = 1.0 - net.dropout;
  Eigen::MatrixXd mask;
  NetGradient grad;
  Eigen::VectorXd bias(1), bias_grad(1);
  int since_best = 0;

  for (int epoch = 1; epoch <= plan.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(plan.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(plan.batch_size));
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const Eigen::MatrixXd* mask_ptr = nullptr;
      if (net.dropout > 0) {
        mask.resize(net.embedding_size(), static_cast<Index>(batch.size()));
        for (Index b = 0; b < mask.cols(); ++b)
          for (Index k = 0; k < mask.rows(); ++k) mask(k, b) = rng.uniform() < keep ? 1.0 / keep : 0.0;
        mask_ptr = &mask;
      }
      const double batch_loss = loss_and_gradient(net, train_pool, train_labels, batch, mask_ptr, &grad);
      check_finite(batch_loss, epoch, "minibatch");
      loss_sum += batch_loss * static_cast<double>(batch.size());
      adam_step(Eigen::Map<Eigen::VectorXd>(net.embedding.data(), net.embedding.size()),
                Eigen::Map<const Eigen::VectorXd>(grad.embedding.data(), grad.embedding.size()), adam_e,
                plan.learning_rate);
      adam_step(net.output_weights, grad.output_weights, adam_u, plan.learning_rate);
      bias[0] = net.output_bias;
      bias_grad[0] = grad.output_bias;
      adam_step(bias, bias_grad, adam_b, plan.learning_rate);
      net.output_bias = bias[0];
      train_pool.refresh(net);
    }
    val_pool.refresh(net);
    const EpochRecord record{epoch, loss_sum / static_cast<double>(order.size()), full_loss(net, val_pool, val_labels)};
    check_finite(record.val_loss, epoch, "validation");
    result.history.push_back(record);
    if (record.val_loss < best) {
      best = record.val_loss;
      result.net = net;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= plan.patience) {
      break;
    }
  }
  return result;
}

void write_loss_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_loss\n";
  for (const auto& r : history) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss);
    out << buf;
  }
}

}  // namespace casebench
