#include "casebench/nbsvm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace casebench {

void require_binary(const SpMat& x, const char* who) {
  const double* v = x.valuePtr();
  for (Index k = 0; k < x.nonZeros(); ++k) {
    if (v[k] != 1.0) throw std::invalid_argument(std::string(who) + ": input must be binary-weighted");
  }
}

Eigen::VectorXd log_count_ratio(const SpMat& x, std::span<const int> y, double alpha_nb) {
  if (!(alpha_nb > 0)) throw std::invalid_argument("log_count_ratio: alpha must be positive");
  check_binary_labels(y, static_cast<std::size_t>(x.rows()), "log_count_ratio");
  Eigen::VectorXd p = Eigen::VectorXd::Constant(x.cols(), alpha_nb);
  Eigen::VectorXd q = Eigen::VectorXd::Constant(x.cols(), alpha_nb);
  for (Index row = 0; row < x.outerSize(); ++row) {
    Eigen::VectorXd& target = y[static_cast<std::size_t>(row)] == 1 ? p : q;
    for (SpMat::InnerIterator it(x, row); it; ++it) target[it.col()] += it.value();
  }
  const double p1 = p.sum(), q1 = q.sum();
  Eigen::VectorXd r(x.cols());
  for (Index j = 0; j < r.size(); ++j) r[j] = std::log((p[j] / p1) / (q[j] / q1));
  return r;
}

namespace {

SpMat scale_columns(const SpMat& x, const Eigen::VectorXd& r) {
  SpMat out = x;
  for (Index row = 0; row < out.outerSize(); ++row)
    for (SpMat::InnerIterator it(out, row); it; ++it) it.valueRef() *= r[it.col()];
  out.prune(0.0);
  return out;
}

}  // namespace

NbsvmModel nbsvm_fit(const SpMat& x, std::span<const int> y, const NbsvmOptions& options) {
  if (!(options.beta >= 0.0 && options.beta <= 1.0)) throw std::invalid_argument("nbsvm_fit: beta must lie in [0, 1]");
  require_binary(x, "nbsvm_fit");
  NbsvmModel model;
  model.alpha_nb = options.alpha_nb;
  model.beta = options.beta;
  model.C = options.C;
  model.r = log_count_ratio(x, y, options.alpha_nb);

  SvmOptions svm_options;
  svm_options.C = options.C;
  const LinearSvmModel svm = svm_fit(scale_columns(x, model.r), y, svm_options);
  model.svm_w = svm.w;
  model.b = svm.b;
  const double mean_abs = svm.w.size() > 0 ? svm.w.cwiseAbs().mean() : 0.0;
  model.w = (1.0 - options.beta) * mean_abs * Eigen::VectorXd::Ones(svm.w.size()) + options.beta * svm.w;
  return model;
}

Eigen::VectorXd nbsvm_score(const NbsvmModel& model, const SpMat& x) {
  if (x.cols() != model.r.size()) throw std::invalid_argument("nbsvm_score: feature count mismatch");
  require_binary(x, "nbsvm_score");
  Eigen::VectorXd out(x.rows());
  for (Index row = 0; row < x.outerSize(); ++row) {
    double s = model.b;
    for (SpMat::InnerIterator it(x, row); it; ++it) s += it.value() * model.r[it.col()] * model.w[it.col()];
    out[row] = s;
  }
  return out;
}

}  // namespace casebench
