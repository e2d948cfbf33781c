#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "casebench/linalg.hpp"
#include "casebench/model_checks.hpp"

namespace casebench {

inline constexpr double kDefaultSvmC = 0.0001;

struct SvmOptions {
  double C = kDefaultSvmC;
  bool fit_bias = true;
  double tolerance = 1e-8;  // relative objective decrease that ends training
  int max_iter = 500;
};

/// L2-regularized squared-hinge linear SVM:
///   minimize 1/2 |w|^2 + C * sum_i max(0, 1 - y_i (w.x_i + b))^2
/// with y_i in {-1, +1} and the bias left unregularized.
struct LinearSvmModel {
  double C = kDefaultSvmC;
  Eigen::VectorXd w;
  double b = 0;
  double objective = 0;
  std::vector<double> objective_history;  // one entry per accepted iterate, starting at w = 0
  int iterations = 0;
};

namespace detail {

template <typename Matrix>
struct SquaredHingeProblem {
  const Matrix& x;
  Eigen::VectorXd y;  // +-1
  double C;

  // Returns the objective; fills the residuals 1 - y (x w + b) clipped at 0.
  double evaluate(const Eigen::VectorXd& w, double b, Eigen::VectorXd& slack) const {
    Eigen::VectorXd margin = x * w;
    margin.array() += b;
    slack = (1.0 - y.array() * margin.array()).cwiseMax(0.0).matrix();
    return 0.5 * w.squaredNorm() + C * slack.squaredNorm();
  }
};

}  // namespace detail

/// Deterministic Newton-CG with Armijo backtracking on the primal objective.
/// `x` is any Eigen matrix (sparse or dense); labels are 0/1.
template <typename Matrix>
LinearSvmModel svm_fit(const Matrix& x, std::span<const int> labels, const SvmOptions& options = {}) {
  if (!(options.C > 0)) throw std::invalid_argument("svm_fit: C must be positive");
  check_binary_labels(labels, static_cast<std::size_t>(x.rows()), "svm_fit");

  const Index n = x.rows(), d = x.cols();
  detail::SquaredHingeProblem<Matrix> problem{x, Eigen::VectorXd(n), options.C};
  for (Index i = 0; i < n; ++i) problem.y[i] = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
  const double C = options.C;

  LinearSvmModel model;
  model.C = C;
  model.w = Eigen::VectorXd::Zero(d);
  double b = 0;
  Eigen::VectorXd slack;
  double f = problem.evaluate(model.w, b, slack);
  model.objective_history.push_back(f);

  for (int iter = 0; iter < options.max_iter; ++iter) {
    // Gradient.
    const Eigen::VectorXd ys = problem.y.cwiseProduct(slack);  // zero outside the active set
    Eigen::VectorXd gw = model.w - 2.0 * C * (x.transpose() * ys);
    double gb = options.fit_bias ? -2.0 * C * ys.sum() : 0.0;
    const double gnorm = std::sqrt(gw.squaredNorm() + gb * gb);
    if (gnorm == 0.0) break;

    // Generalized Hessian restricted to the active set.
    Eigen::VectorXd active(n);
    for (Index i = 0; i < n; ++i) active[i] = slack[i] > 0 ? 1.0 : 0.0;
    auto hess = [&](const Eigen::VectorXd& sw, double sb, Eigen::VectorXd& hw, double& hb) {
      Eigen::VectorXd z = ((x * sw).array() + sb).matrix().cwiseProduct(active);
      hw = sw + 2.0 * C * (x.transpose() * z);
      hb = options.fit_bias ? 2.0 * C * z.sum() : 0.0;
    };

    // Conjugate gradients on H s = -g, truncated by a forcing tolerance.
    Eigen::VectorXd sw = Eigen::VectorXd::Zero(d);
    double sb = 0;
    Eigen::VectorXd rw = -gw;
    double rb = -gb;
    Eigen::VectorXd pw = rw;
    double pb = rb;
    double rr = rw.squaredNorm() + rb * rb;
    const double cg_tol = std::min(0.1, std::sqrt(gnorm)) * gnorm;
    const int cg_max = static_cast<int>(std::min<Index>(d + 2, 1000));
    for (int k = 0; k < cg_max && std::sqrt(rr) > cg_tol; ++k) {
      Eigen::VectorXd hw;
      double hb = 0;
      hess(pw, pb, hw, hb);
      const double php = pw.dot(hw) + pb * hb;
      if (php <= 0) break;
      const double alpha = rr / php;
      sw += alpha * pw;
      sb += alpha * pb;
      rw -= alpha * hw;
      rb -= alpha * hb;
      const double rr_new = rw.squaredNorm() + rb * rb;
      const double beta = rr_new / rr;
      pw = rw + beta * pw;
      pb = rb + beta * pb;
      rr = rr_new;
    }

    const double slope = gw.dot(sw) + gb * sb;
    if (!(slope < 0)) break;
    double step = 1.0;
    Eigen::VectorXd w_new;
    double b_new = b, f_new = f;
    Eigen::VectorXd slack_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      w_new = model.w + step * sw;
      b_new = b + step * sb;
      f_new = problem.evaluate(w_new, b_new, slack_new);
      if (f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double decrease = f - f_new;
    model.w = std::move(w_new);
    b = b_new;
    slack = std::move(slack_new);
    f = f_new;
    model.objective_history.push_back(f);
    model.iterations = iter + 1;
    if (decrease <= options.tolerance * std::max(std::abs(f), 1e-300)) break;
  }
  model.b = b;
  model.objective = f;
  return model;
}

/// Signed margins w.x + b.
template <typename Matrix>
Eigen::VectorXd svm_score(const LinearSvmModel& model, const Matrix& x) {
  if (x.cols() != model.w.size()) throw std::invalid_argument("svm_score: feature count mismatch");
  return ((x * model.w).array() + model.b).matrix();
}

/// Objective value of an arbitrary (w, b) on the given data.
template <typename Matrix>
double svm_objective(const Matrix& x, std::span<const int> labels, double C, const Eigen::VectorXd& w, double b) {
  Eigen::VectorXd y(x.rows());
  for (Index i = 0; i < x.rows(); ++i) y[i] = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
  detail::SquaredHingeProblem<Matrix> problem{x, y, C};
  Eigen::VectorXd slack;
  return problem.evaluate(w, b, slack);
}

}  // namespace casebench
