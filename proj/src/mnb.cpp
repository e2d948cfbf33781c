#include "casebench/mnb.hpp"

#include <cmath>
#include <stdexcept>

#include "casebench/model_checks.hpp"

namespace casebench {

MnbModel mnb_fit(const SpMat& x, std::span<const int> y, double alpha) {
  if (!(alpha > 0)) throw std::invalid_argument("mnb_fit: alpha must be positive");
  const auto counts = check_binary_labels(y, static_cast<std::size_t>(x.rows()), "mnb_fit");

  Eigen::MatrixXd feature_counts = Eigen::MatrixXd::Zero(2, x.cols());
  for (Index r = 0; r < x.outerSize(); ++r) {
    const int c = y[static_cast<std::size_t>(r)];
    for (SpMat::InnerIterator it(x, r); it; ++it) feature_counts(c, it.col()) += it.value();
  }

  MnbModel model;
  model.alpha = alpha;
  const double n = static_cast<double>(y.size());
  model.log_prior << std::log(static_cast<double>(counts[0]) / n), std::log(static_cast<double>(counts[1]) / n);
  model.log_likelihood.resize(2, x.cols());
  const double v = static_cast<double>(x.cols());
  for (int c = 0; c < 2; ++c) {
    const double denom = alpha * v + feature_counts.row(c).sum();
    for (Index j = 0; j < x.cols(); ++j) model.log_likelihood(c, j) = std::log((alpha + feature_counts(c, j)) / denom);
  }
  return model;
}

Eigen::MatrixXd mnb_joint_log_likelihood(const MnbModel& model, const SpMat& x) {
  if (x.cols() != model.n_features()) throw std::invalid_argument("mnb_score: feature count mismatch");
  Eigen::MatrixXd jll(x.rows(), 2);
  for (Index r = 0; r < x.outerSize(); ++r) {
    double s0 = model.log_prior[0], s1 = model.log_prior[1];
    for (SpMat::InnerIterator it(x, r); it; ++it) {
      s0 += it.value() * model.log_likelihood(0, it.col());
      s1 += it.value() * model.log_likelihood(1, it.col());
    }
    jll(r, 0) = s0;
    jll(r, 1) = s1;
  }
  return jll;
}

Eigen::VectorXd mnb_score(const MnbModel& model, const SpMat& x) {
  const Eigen::MatrixXd jll = mnb_joint_log_likelihood(model, x);
  Eigen::VectorXd p(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    // sigmoid of the log-odds, written to stay finite for large gaps
    const double d = jll(r, 1) - jll(r, 0);
    p[r] = d >= 0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
  }
  return p;
}

}  // namespace casebench
