#pragma once

#include <span>

#include "casebench/linalg.hpp"
#include "casebench/svm.hpp"

namespace casebench {

struct NbsvmOptions {
  double alpha_nb = 1.0;
  double beta = 1.0;
  double C = 0.001;
};

/// SVM on naive-Bayes-scaled binary features with weight interpolation
/// w' = (1 - beta) * mean|w| + beta * w. The bias is not interpolated.
struct NbsvmModel {
  double alpha_nb = 1.0;
  double beta = 1.0;
  double C = 0.001;
  Eigen::VectorXd r;         // log-count ratio
  Eigen::VectorXd svm_w;     // weights of the underlying SVM
  Eigen::VectorXd w;         // interpolated weights
  double b = 0;
};

/// r = log((p / |p|_1) / (q / |q|_1)), p = alpha + positive-row sums, q likewise.
Eigen::VectorXd log_count_ratio(const SpMat& x, std::span<const int> y, double alpha_nb);

/// Throws std::invalid_argument unless every stored value is 1.
void require_binary(const SpMat& x, const char* who);

NbsvmModel nbsvm_fit(const SpMat& x, std::span<const int> y, const NbsvmOptions& options = {});
/// Signed margins (x o r) . w' + b.
Eigen::VectorXd nbsvm_score(const NbsvmModel& model, const SpMat& x);

}  // namespace casebench
