#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "casebench/linalg.hpp"

namespace casebench {

class ModelReader;
class ModelWriter;

using ParamMap = std::map<std::string, double>;

/// A classifier kind plus hyperparameter overrides. Unset parameters take the
/// tuned defaults from model_defaults().
struct ModelConfig {
  std::string kind;
  ParamMap params;
  std::uint64_t seed = 0;
};

/// Known kinds in reporting order: lda_svm, lsa_svm, mnb, svm, nbsvm, rf, nn_sum, nn_avg.
const std::vector<std::string>& model_kinds();
/// Display name used in tables, e.g. "NB-SVM".
std::string display_name(const std::string& kind);
/// Full parameter set for a kind; every kind has "ngrams" and "threshold".
ParamMap model_defaults(const std::string& kind);

/// Uniform fit/score/predict contract. Inputs are always count-valued (or
/// binary) document-term matrices over the n-gram order given by ngrams();
/// each model applies its own weighting.
class Classifier {
 public:
  explicit Classifier(ModelConfig config);
  virtual ~Classifier() = default;

  const ModelConfig& config() const { return config_; }
  const std::string& kind() const { return config_.kind; }
  double param(const std::string& name) const;
  int ngrams() const;
  double default_threshold() const { return param("threshold"); }
  bool fitted() const { return n_features_ >= 0; }
  Index n_features() const { return n_features_; }

  /// The validation rows are used only by models that early-stop on them.
  void fit(const SpMat& x, std::span<const int> y, const SpMat& x_val, std::span<const int> y_val);
  Eigen::VectorXd score(const SpMat& x) const;
  std::vector<int> predict(const SpMat& x) const { return predict(x, default_threshold()); }
  /// score >= threshold is positive.
  std::vector<int> predict(const SpMat& x, double threshold) const;

  void save(std::ostream& out) const;

 protected:
  virtual void fit_impl(const SpMat& x, std::span<const int> y, const SpMat& x_val, std::span<const int> y_val) = 0;
  virtual Eigen::VectorXd score_impl(const SpMat& x) const = 0;
  virtual void write_state(ModelWriter& out) const = 0;
  virtual void read_state(ModelReader& in) = 0;

 private:
  friend std::unique_ptr<Classifier> load_classifier(std::istream& in);

  ModelConfig config_;
  Index n_features_ = -1;
};

/// Throws std::invalid_argument for an unknown kind or parameter name.
std::unique_ptr<Classifier> make_classifier(const ModelConfig& config);

std::unique_ptr<Classifier> load_classifier(std::istream& in);
std::unique_ptr<Classifier> load_classifier(const std::string& path);
void save_classifier(const std::string& path, const Classifier& model);

}  // namespace casebench
