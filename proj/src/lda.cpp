#include "casebench/lda.hpp"

#include <cmath>
#include <stdexcept>

#include "casebench/rng.hpp"

namespace casebench {

namespace {

constexpr std::uint64_t kTransformStream = 0x7f4a7c15ULL;

// Expands a count row into its token list.
void row_tokens(const SpMat& counts, Index row, std::vector<std::int32_t>& out) {
  out.clear();
  for (SpMat::InnerIterator it(counts, row); it; ++it) {
    const double v = it.value();
    if (v < 0 || v != std::floor(v)) throw std::invalid_argument("lda: counts must be non-negative integers");
    for (long k = 0; k < static_cast<long>(v); ++k) out.push_back(static_cast<std::int32_t>(it.col()));
  }
}

// Unnormalized full-conditional topic weights for one token.
void topic_weights(const double* __restrict doc, const double* __restrict word, const double* __restrict inv_totals,
                   double alpha, double eta, double* __restrict out, std::size_t n_topics) {
  for (std::size_t k = 0; k < n_topics; ++k) out[k] = (doc[k] + alpha) * (word[k] + eta) * inv_totals[k];
}

void fold_in_weights(const double* __restrict doc, const double* __restrict phi, double alpha, double* __restrict out,
                     std::size_t n_topics) {
  for (std::size_t k = 0; k < n_topics; ++k) out[k] = (doc[k] + alpha) * phi[k];
}

// Draws k with probability weight[k] / sum(weight).
std::size_t draw(const std::vector<double>& weight, double u) {
  const std::size_t n = weight.size();
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += weight[k];
    s1 += weight[k + 1];
    s2 += weight[k + 2];
    s3 += weight[k + 3];
  }
  for (; k < n; ++k) s0 += weight[k];
  double target = u * ((s0 + s1) + (s2 + s3));
  k = 0;
  while (k + 1 < n && target >= weight[k]) target -= weight[k++];
  return k;
}

}  // namespace

Eigen::MatrixXd LdaModel::topic_word_distribution() const {
  Eigen::MatrixXd phi(n_topics, n_features);
  const double v_eta = static_cast<double>(n_features) * eta;
  for (int k = 0; k < n_topics; ++k) {
    const double denom = static_cast<double>(topic_totals[static_cast<std::size_t>(k)]) + v_eta;
    for (Index w = 0; w < n_features; ++w) {
      phi(k, w) = (topic_word[static_cast<std::size_t>(k * n_features + w)] + eta) / denom;
    }
  }
  return phi;
}

LdaModel lda_fit(const SpMat& counts, const LdaOptions& options) {
  if (options.n_topics < 1) throw std::invalid_argument("lda_fit: n_topics must be at least 1");
  if (options.n_iters < 0 || options.transform_iters < 1) throw std::invalid_argument("lda_fit: invalid iteration counts");
  const int n_topics = options.n_topics;
  const auto K = static_cast<std::size_t>(n_topics);
  const Index V = counts.cols();

  LdaModel model;
  model.n_topics = n_topics;
  model.alpha = options.doc_topic_prior > 0 ? options.doc_topic_prior : 1.0 / n_topics;
  model.eta = options.topic_word_prior > 0 ? options.topic_word_prior : 1.0 / n_topics;
  model.n_iters = options.n_iters;
  model.transform_iters = options.transform_iters;
  model.seed = options.seed;
  model.n_features = V;
  model.topic_word.assign(K * static_cast<std::size_t>(V), 0);
  model.topic_totals.assign(K, 0);

  Rng rng(options.seed);
  std::vector<std::vector<std::int32_t>> words(static_cast<std::size_t>(counts.rows()));
  std::vector<std::vector<std::int32_t>> topics(words.size());
  std::vector<std::int32_t> doc_topic(words.size() * K, 0);
  for (Index d = 0; d < counts.rows(); ++d) {
    auto& w = words[static_cast<std::size_t>(d)];
    row_tokens(counts, d, w);
    auto& z = topics[static_cast<std::size_t>(d)];
    z.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      const auto k = static_cast<std::int32_t>(rng.index(K));
      z[i] = k;
      ++doc_topic[static_cast<std::size_t>(d) * K + static_cast<std::size_t>(k)];
      ++model.topic_word[static_cast<std::size_t>(k) * static_cast<std::size_t>(V) + static_cast<std::size_t>(w[i])];
      ++model.topic_totals[static_cast<std::size_t>(k)];
    }
  }

  // Word-major floating copies of the counts keep the per-token loop
  // contiguous and vectorizable; integers stay exact in doubles.
  const double v_eta = static_cast<double>(V) * model.eta;
  std::vector<double> word_topic(static_cast<std::size_t>(V) * K);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t w = 0; w < static_cast<std::size_t>(V); ++w)
      word_topic[w * K + k] = model.topic_word[k * static_cast<std::size_t>(V) + w];
  std::vector<double> doc_weight(doc_topic.size());
  for (std::size_t i = 0; i < doc_topic.size(); ++i) doc_weight[i] = doc_topic[i];
  std::vector<double> totals(K), inv_totals(K), weight(K);
  for (std::size_t k = 0; k < K; ++k) {
    totals[k] = static_cast<double>(model.topic_totals[k]);
    inv_totals[k] = 1.0 / (totals[k] + v_eta);
  }

  const double alpha = model.alpha, eta = model.eta;
  for (int sweep = 0; sweep < options.n_iters; ++sweep) {
    for (std::size_t d = 0; d < words.size(); ++d) {
      double* nd = doc_weight.data() + d * K;
      const auto& w = words[d];
      auto& z = topics[d];
      for (std::size_t i = 0; i < w.size(); ++i) {
        double* nw = word_topic.data() + static_cast<std::size_t>(w[i]) * K;
        const auto old = static_cast<std::size_t>(z[i]);
        nd[old] -= 1;
        nw[old] -= 1;
        totals[old] -= 1;
        inv_totals[old] = 1.0 / (totals[old] + v_eta);
        topic_weights(nd, nw, inv_totals.data(), alpha, eta, weight.data(), K);
        const std::size_t k = draw(weight, rng.uniform());
        z[i] = static_cast<std::int32_t>(k);
        nd[k] += 1;
        nw[k] += 1;
        totals[k] += 1;
        inv_totals[k] = 1.0 / (totals[k] + v_eta);
      }
    }
  }

  std::fill(model.topic_word.begin(), model.topic_word.end(), 0);
  std::fill(model.topic_totals.begin(), model.topic_totals.end(), 0);
  for (std::size_t d = 0; d < words.size(); ++d) {
    for (std::size_t i = 0; i < words[d].size(); ++i) {
      const auto k = static_cast<std::size_t>(topics[d][i]);
      ++model.topic_word[k * static_cast<std::size_t>(V) + static_cast<std::size_t>(words[d][i])];
      ++model.topic_totals[k];
    }
  }
  return model;
}

Eigen::MatrixXd lda_transform(const LdaModel& model, const SpMat& counts) {
  if (counts.cols() != model.n_features) throw std::invalid_argument("lda_transform: feature count mismatch");
  const auto K = static_cast<std::size_t>(model.n_topics);
  const Eigen::MatrixXd phi = model.topic_word_distribution();  // column w holds word w's topic weights
  Eigen::MatrixXd theta(counts.rows(), model.n_topics);
  std::vector<std::int32_t> w, z;
  std::vector<double> nd(K);
  std::vector<double> weight(K), average(K);
  const int burn_in = model.transform_iters / 2;
  const double alpha = model.alpha;
  const double kalpha = static_cast<double>(K) * alpha;

  for (Index d = 0; d < counts.rows(); ++d) {
    row_tokens(counts, d, w);
    if (w.empty()) {
      theta.row(d).setConstant(1.0 / static_cast<double>(K));
      continue;
    }
    Rng rng(derive_seed(model.seed ^ kTransformStream, static_cast<std::uint64_t>(d)));
    std::fill(nd.begin(), nd.end(), 0.0);
    z.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      z[i] = static_cast<std::int32_t>(rng.index(K));
      nd[static_cast<std::size_t>(z[i])] += 1;
    }
    std::fill(average.begin(), average.end(), 0.0);
    const double n_tokens = static_cast<double>(w.size());
    for (int sweep = 0; sweep < model.transform_iters; ++sweep) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double* pw = phi.col(w[i]).data();
        nd[static_cast<std::size_t>(z[i])] -= 1;
        fold_in_weights(nd.data(), pw, alpha, weight.data(), K);
        const std::size_t k = draw(weight, rng.uniform());
        z[i] = static_cast<std::int32_t>(k);
        nd[k] += 1;
      }
      if (sweep >= burn_in) {
        for (std::size_t k = 0; k < K; ++k) average[k] += (nd[k] + alpha) / (n_tokens + kalpha);
      }
    }
    double total = 0;
    for (std::size_t k = 0; k < K; ++k) total += average[k];
    for (std::size_t k = 0; k < K; ++k) theta(d, static_cast<Index>(k)) = average[k] / total;
  }
  return theta;
}

}  // namespace casebench
