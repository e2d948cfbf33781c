#pragma once

#include <cstdint>
#include <vector>

#include "casebench/linalg.hpp"

namespace casebench {

struct LdaOptions {
  int n_topics = 30;
  double doc_topic_prior = 0;   // 0: 1 / n_topics
  double topic_word_prior = 0;  // 0: 1 / n_topics
  int n_iters = 40;             // training Gibbs sweeps
  int transform_iters = 10;     // fold-in sweeps per document; the second half is averaged
  std::uint64_t seed = 0;
};

struct LdaModel {
  int n_topics = 0;
  double alpha = 0;  // document-topic prior
  double eta = 0;    // topic-word prior
  int n_iters = 0;
  int transform_iters = 0;
  std::uint64_t seed = 0;
  Index n_features = 0;
  std::vector<std::int32_t> topic_word;    // n_topics x n_features, row-major
  std::vector<std::int64_t> topic_totals;  // tokens assigned per topic

  /// (n_kw + eta) / (n_k + V eta) as an n_topics x n_features matrix.
  Eigen::MatrixXd topic_word_distribution() const;
};

/// Collapsed Gibbs sampling over the tokens implied by an integer count matrix.
LdaModel lda_fit(const SpMat& counts, const LdaOptions& options = {});

/// Per-document topic proportions with the topic-word counts held fixed.
/// Rows sum to 1; documents without tokens get the uniform distribution.
Eigen::MatrixXd lda_transform(const LdaModel& model, const SpMat& counts);

}  // namespace casebench
