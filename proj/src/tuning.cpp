#include "casebench/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <stdexcept>

#include "casebench/rng.hpp"
#include "casebench/stats.hpp"

namespace casebench {

Domain Domain::set(std::string name, std::vector<double> values) {
  Domain d;
  d.name = std::move(name);
  d.values = std::move(values);
  return d;
}

Domain Domain::interval(std::string name, double lo, double hi, bool log_scale) {
  Domain d;
  d.name = std::move(name);
  d.lo = lo;
  d.hi = hi;
  d.log_scale = log_scale;
  return d;
}

void validate_space(const SearchSpace& space) {
  if (space.empty()) throw std::invalid_argument("search space is empty");
  std::set<std::string> names;
  for (const auto& d : space) {
    if (!names.insert(d.name).second) throw std::invalid_argument("duplicate parameter '" + d.name + "'");
    if (d.is_finite()) {
      for (double v : d.values)
        if (!std::isfinite(v)) throw std::invalid_argument("parameter '" + d.name + "' has a non-finite value");
      continue;
    }
    if (!std::isfinite(d.lo) || !std::isfinite(d.hi) || !(d.lo < d.hi)) {
      throw std::invalid_argument("parameter '" + d.name + "' needs finite bounds with lo < hi");
    }
    if (d.log_scale && !(d.lo > 0)) throw std::invalid_argument("parameter '" + d.name + "' log scale needs lo > 0");
  }
}

namespace {

// Runs the objective, mapping exceptions and non-finite values to failure.
bool try_evaluate(const Objective& objective, const ParamMap& point, double& error) {
  try {
    error = objective(point);
  } catch (const std::exception&) {
    return false;
  }
  return std::isfinite(error);
}

TuneResult finish(std::vector<Evaluation> log) {
  TuneResult result;
  result.best_error = std::numeric_limits<double>::infinity();
  for (const auto& e : log) {
    if (result.best.empty() || e.error < result.best_error) {
      result.best = e.point;
      result.best_error = e.error;
    }
  }
  result.log = std::move(log);
  return result;
}

}  // namespace

TuneResult grid_search(const Objective& objective, const SearchSpace& space) {
  validate_space(space);
  for (const auto& d : space)
    if (!d.is_finite()) throw std::invalid_argument("grid_search: parameter '" + d.name + "' is not a finite set");

  std::vector<std::size_t> odometer(space.size(), 0);
  std::vector<Evaluation> log;
  for (;;) {
    Evaluation e;
    for (std::size_t k = 0; k < space.size(); ++k) e.point[space[k].name] = space[k].values[odometer[k]];
    e.failed = !try_evaluate(objective, e.point, e.error);
    if (e.failed) e.error = std::numeric_limits<double>::infinity();
    log.push_back(std::move(e));

    std::size_t k = space.size();
    while (k > 0) {
      --k;
      if (++odometer[k] < space[k].values.size()) break;
      odometer[k] = 0;
      if (k == 0) return finish(std::move(log));
    }
  }
}

namespace {

// Maps parameters to and from the unit cube. Finite sets are ordinal: the
// sorted members sit at equal spacing and decoding snaps to the nearest.
class Encoder {
 public:
  explicit Encoder(const SearchSpace& space) : space_(space) {
    for (const auto& d : space) {
      std::vector<double> sorted = d.values;
      std::sort(sorted.begin(), sorted.end());
      sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
      members_.push_back(std::move(sorted));
    }
  }

  std::size_t dims() const { return space_.size(); }

  ParamMap decode(const std::vector<double>& u) const {
    ParamMap p;
    for (std::size_t k = 0; k < space_.size(); ++k) {
      const auto& d = space_[k];
      const double t = std::clamp(u[k], 0.0, 1.0);
      if (d.is_finite()) {
        const auto& m = members_[k];
        const auto idx = static_cast<std::size_t>(std::lround(t * static_cast<double>(m.size() - 1)));
        p[d.name] = m[idx];
      } else if (d.log_scale) {
        p[d.name] = std::exp(std::log(d.lo) + t * (std::log(d.hi) - std::log(d.lo)));
      } else {
        p[d.name] = d.lo + t * (d.hi - d.lo);
      }
    }
    return p;
  }

  std::vector<double> encode(const ParamMap& p) const {
    std::vector<double> u(space_.size());
    for (std::size_t k = 0; k < space_.size(); ++k) {
      const auto& d = space_[k];
      const double v = p.at(d.name);
      if (d.is_finite()) {
        const auto& m = members_[k];
        const auto idx = static_cast<std::size_t>(std::lower_bound(m.begin(), m.end(), v) - m.begin());
        u[k] = m.size() > 1 ? static_cast<double>(idx) / static_cast<double>(m.size() - 1) : 0.5;
      } else if (d.log_scale) {
        u[k] = (std::log(v) - std::log(d.lo)) / (std::log(d.hi) - std::log(d.lo));
      } else {
        u[k] = (v - d.lo) / (d.hi - d.lo);
      }
    }
    return u;
  }

 private:
  const SearchSpace& space_;
  std::vector<std::vector<double>> members_;
};

double matern52(double r, double length_scale) {
  const double s = std::sqrt(5.0) * r / length_scale;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm(); }

constexpr double kNugget = 1e-6;

// Zero-mean GP on standardized targets with correlation R + nugget I and
// signal variance profiled out in closed form.
class GaussianProcess {
 public:
  GaussianProcess(const std::vector<Eigen::VectorXd>& x, const Eigen::VectorXd& y) : x_(x) {
    mean_ = y.mean();
    const double var = (y.array() - mean_).square().mean();
    scale_ = var > 0 ? std::sqrt(var) : 1.0;
    y_ = (y.array() - mean_) / scale_;
    fit_length_scale();
  }

  double best_standardized() const { return y_.minCoeff(); }

  // Expected improvement below the best observation, in standardized units.
  double expected_improvement(const Eigen::VectorXd& u) const {
    const Index n = static_cast<Index>(x_.size());
    Eigen::VectorXd r(n);
    for (Index i = 0; i < n; ++i) r[i] = matern52(distance(u, x_[static_cast<std::size_t>(i)]), length_scale_);
    const double mu = r.dot(alpha_);
    const Eigen::VectorXd v = chol_.matrixL().solve(r);
    const double var = signal_ * std::max(1.0 + kNugget - v.squaredNorm(), 0.0);
    const double gap = best_standardized() - mu;
    const double sd = std::sqrt(var);
    if (sd < 1e-12) return std::max(gap, 0.0);
    const double z = gap / sd;
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    return gap * normal_cdf(z) + sd * pdf;
  }

 private:
  // Negative log marginal likelihood with the signal variance profiled out;
  // fills the factorization state as a side effect.
  double profile_nll(double length_scale) {
    const Index n = static_cast<Index>(x_.size());
    Eigen::MatrixXd k(n, n);
    for (Index i = 0; i < n; ++i) {
      k(i, i) = 1.0 + kNugget;
      for (Index j = 0; j < i; ++j) {
        k(i, j) = k(j, i) =
            matern52(distance(x_[static_cast<std::size_t>(i)], x_[static_cast<std::size_t>(j)]), length_scale);
      }
    }
    chol_.compute(k);
    if (chol_.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    alpha_ = chol_.solve(y_);
    signal_ = std::max(y_.dot(alpha_) / static_cast<double>(n), 1e-12);
    double log_det = 0;
    for (Index i = 0; i < n; ++i) log_det += std::log(chol_.matrixLLT()(i, i));
    return 0.5 * static_cast<double>(n) * std::log(signal_) + log_det;
  }

  void fit_length_scale() {
    const double lo = std::log(0.01), hi = std::log(3.0);
    constexpr int kGrid = 41;
    double best_t = lo, best = std::numeric_limits<double>::infinity();
    for (int g = 0; g < kGrid; ++g) {
      const double t = lo + (hi - lo) * g / (kGrid - 1);
      const double f = profile_nll(std::exp(t));
      if (f < best) {
        best = f;
        best_t = t;
      }
    }
    // Golden-section refinement around the best grid point.
    const double h = (hi - lo) / (kGrid - 1);
    double a = std::max(lo, best_t - h), b = std::min(hi, best_t + h);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - ratio * (b - a), d = a + ratio * (b - a);
    double fc = profile_nll(std::exp(c)), fd = profile_nll(std::exp(d));
    for (int it = 0; it < 30; ++it) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - ratio * (b - a);
        fc = profile_nll(std::exp(c));
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + ratio * (b - a);
        fd = profile_nll(std::exp(d));
      }
    }
    double t = 0.5 * (a + b);
    if (profile_nll(std::exp(t)) > best) t = best_t;
    length_scale_ = std::exp(t);
    profile_nll(length_scale_);
  }

  const std::vector<Eigen::VectorXd>& x_;
  Eigen::VectorXd y_;
  double mean_ = 0, scale_ = 1;
  double length_scale_ = 1;
  double signal_ = 1;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
};

// Compass search on the unit cube, halving the step when no move improves.
Eigen::VectorXd pattern_search(const GaussianProcess& gp, Eigen::VectorXd u, double& value) {
  double step = 0.1;
  int budget = 400;
  while (step > 1e-4 && budget > 0) {
    bool moved = false;
    for (Index k = 0; k < u.size() && budget > 0; ++k) {
      for (double dir : {1.0, -1.0}) {
        Eigen::VectorXd trial = u;
        trial[k] = std::clamp(trial[k] + dir * step, 0.0, 1.0);
        if (trial[k] == u[k]) continue;
        --budget;
        const double v = gp.expected_improvement(trial);
        if (v > value) {
          value = v;
          u = std::move(trial);
          moved = true;
          break;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return u;
}

}  // namespace

TuneResult bayes_opt(const Objective& objective, const SearchSpace& space, const BayesOptions& options) {
  validate_space(space);
  if (options.n_init < 1 || options.n_iter < 0) throw std::invalid_argument("bayes_opt: need n_init >= 1, n_iter >= 0");
  if (options.n_candidates < 1 || options.n_starts < 1) throw std::invalid_argument("bayes_opt: invalid search effort");

  const Encoder encoder(space);
  const auto dims = static_cast<Index>(encoder.dims());
  Rng rng(options.seed);
  std::vector<Evaluation> log;
  std::vector<Eigen::VectorXd> inputs;
  double worst = -std::numeric_limits<double>::infinity();

  auto evaluate = [&](const std::vector<double>& u) {
    Evaluation e;
    e.point = encoder.decode(u);
    e.failed = !try_evaluate(objective, e.point, e.error);
    if (e.failed) e.error = (std::isfinite(worst) ? worst : 0.0) + 1.0;
    else worst = std::max(worst, e.error);
    const auto snapped = encoder.encode(e.point);
    inputs.push_back(Eigen::Map<const Eigen::VectorXd>(snapped.data(), dims));
    log.push_back(std::move(e));
  };
  auto random_point = [&] {
    std::vector<double> u(static_cast<std::size_t>(dims));
    for (auto& v : u) v = rng.uniform();
    return u;
  };

  for (int i = 0; i < options.n_init; ++i) evaluate(random_point());

  for (int it = 0; it < options.n_iter; ++it) {
    Eigen::VectorXd y(static_cast<Index>(log.size()));
    for (std::size_t i = 0; i < log.size(); ++i) y[static_cast<Index>(i)] = log[i].error;
    const GaussianProcess gp(inputs, y);

    std::vector<std::pair<double, Eigen::VectorXd>> probes;
    probes.reserve(static_cast<std::size_t>(options.n_candidates));
    for (int c = 0; c < options.n_candidates; ++c) {
      const auto u = random_point();
      Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(u.data(), dims);
      probes.emplace_back(gp.expected_improvement(v), std::move(v));
    }
    std::stable_sort(probes.begin(), probes.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    double best_value = -1;
    Eigen::VectorXd best_u;
    const auto starts = std::min<std::size_t>(probes.size(), static_cast<std::size_t>(options.n_starts));
    for (std::size_t s = 0; s < starts; ++s) {
      double value = probes[s].first;
      Eigen::VectorXd u = pattern_search(gp, probes[s].second, value);
      if (value > best_value) {
        best_value = value;
        best_u = std::move(u);
      }
    }
    evaluate(std::vector<double>(best_u.data(), best_u.data() + best_u.size()));
  }
  return finish(std::move(log));
}

void write_tuning_log(std::ostream& out, const SearchSpace& space, const TuneResult& result) {
  out << "iteration";
  for (const auto& d : space) out << ',' << d.name;
  out << ",error,failed\n";
  char buf[64];
  for (std::size_t i = 0; i < result.log.size(); ++i) {
    const auto& e = result.log[i];
    out << i + 1;
    for (const auto& d : space) {
      std::snprintf(buf, sizeof(buf), "%.17g", e.point.at(d.name));
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", e.error);
    out << ',' << buf << ',' << (e.failed ? 1 : 0) << '\n';
  }
}

ThresholdChoice threshold_sweep(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("threshold_sweep: length mismatch");
  if (scores.empty()) throw std::invalid_argument("threshold_sweep: no scores");
  for (double s : scores)
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("threshold_sweep: scores must lie in [0, 1]");

  int best_k = 50;
  std::size_t best_correct = 0;
  bool first = true;
  for (int k = 1; k <= 99; ++k) {
    const double cutoff = k / 100.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) correct += ((scores[i] >= cutoff ? 1 : 0) == labels[i]) ? 1 : 0;
    const bool better = first || correct > best_correct ||
                        (correct == best_correct && std::abs(k - 50) < std::abs(best_k - 50));
    if (better) {
      best_k = k;
      best_correct = correct;
      first = false;
    }
  }
  return {best_k / 100.0, static_cast<double>(best_correct) / static_cast<double>(scores.size())};
}

namespace {

double validation_accuracy(const RandomForestModel& model, const SpMat& x_val, std::span<const int> y_val) {
  const auto pred = rf_predict(model, x_val);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == y_val[i] ? 1 : 0;
  return pred.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(pred.size());
}

// Ranking of `subset` (ids of the original matrix) by the model fitted on it.
std::vector<Index> rank_subset(const RandomForestModel& model, const std::vector<Index>& subset, Index keep) {
  std::vector<Index> out;
  for (Index local : top_features(model.importance, keep)) out.push_back(subset[static_cast<std::size_t>(local)]);
  return out;
}

}  // namespace

EliminationResult feature_eliminate(const ForestTrainer& trainer, const SpMat& x, std::span<const int> y,
                                    const SpMat& x_val, std::span<const int> y_val, EliminationMode mode,
                                    const EliminationOptions& options) {
  if (options.min_size < 1 || options.step < 1 || options.max_size < options.min_size ||
      options.start < options.min_size) {
    throw std::invalid_argument("feature_eliminate: invalid size range");
  }
  if (x.cols() < options.min_size) {
    throw std::invalid_argument("feature_eliminate: " + std::to_string(x.cols()) + " features, need at least " +
                                std::to_string(options.min_size));
  }
  if (x_val.cols() != x.cols() || y_val.size() != static_cast<std::size_t>(x_val.rows())) {
    throw std::invalid_argument("feature_eliminate: validation data shape mismatch");
  }

  EliminationResult result;
  std::vector<Index> all(static_cast<std::size_t>(x.cols()));
  for (Index j = 0; j < x.cols(); ++j) all[static_cast<std::size_t>(j)] = j;
  result.initial = rank_subset(trainer(x, y), all, std::min(options.start, x.cols()));
  const auto trimmed = static_cast<Index>(result.initial.size());

  std::vector<Index> sizes;  // candidate grid, ascending
  for (Index s = options.min_size; s <= std::min(options.max_size, trimmed); s += options.step) sizes.push_back(s);

  auto fit_on = [&](const std::vector<Index>& features) { return trainer(select_columns(x, features), y); };
  auto score = [&](const RandomForestModel& model, const std::vector<Index>& features) {
    return validation_accuracy(model, select_columns(x_val, features), y_val);
  };

  if (mode == EliminationMode::nonrecursive) {
    for (Index s : sizes) {
      std::vector<Index> features(result.initial.begin(), result.initial.begin() + s);
      const double acc = score(fit_on(features), features);
      result.steps.push_back({s, acc, std::move(features)});
    }
  } else {
    // Step down from the trimmed set through every grid size below it.
    std::vector<Index> chain{trimmed};
    for (Index s = options.min_size; s < trimmed; s += options.step) chain.push_back(s);
    std::sort(chain.begin() + 1, chain.end(), std::greater<>());
    std::vector<Index> current = result.initial;
    RandomForestModel model = fit_on(current);
    for (Index s : chain) {
      if (s < static_cast<Index>(current.size())) {
        current = rank_subset(model, current, s);
        model = fit_on(current);
      }
      if (std::binary_search(sizes.begin(), sizes.end(), s)) result.steps.push_back({s, score(model, current), current});
    }
    std::reverse(result.steps.begin(), result.steps.end());
  }

  const EliminationStep* best = nullptr;
  for (const auto& step : result.steps)
    if (!best || step.accuracy > best->accuracy) best = &step;
  result.n_top = best->size;
  result.features = best->features;
  return result;
}

}  // namespace casebench
