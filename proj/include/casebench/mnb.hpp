#pragma once

#include <span>

#include "casebench/linalg.hpp"

namespace casebench {

inline constexpr double kDefaultMnbAlpha = 0.032683;

/// Multinomial naive Bayes over term counts.
struct MnbModel {
  double alpha = kDefaultMnbAlpha;
  Eigen::Vector2d log_prior = Eigen::Vector2d::Zero();  // [negative, positive]
  Eigen::MatrixXd log_likelihood;                       // 2 x n_features

  Index n_features() const { return log_likelihood.cols(); }
};

/// theta_{c,w} = (alpha + count_{c,w}) / (alpha * V + total_c).
MnbModel mnb_fit(const SpMat& x, std::span<const int> y, double alpha = kDefaultMnbAlpha);

/// Unnormalized class log-posteriors, n_docs x 2.
Eigen::MatrixXd mnb_joint_log_likelihood(const MnbModel& model, const SpMat& x);

/// Posterior probability of the positive class.
Eigen::VectorXd mnb_score(const MnbModel& model, const SpMat& x);

}  // namespace casebench
