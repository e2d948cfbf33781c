#include "casebench/classifier.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "casebench/errors.hpp"
#include "casebench/forest.hpp"
#include "casebench/lda.hpp"
#include "casebench/lsa.hpp"
#include "casebench/mnb.hpp"
#include "casebench/model_io.hpp"
#include "casebench/nbsvm.hpp"
#include "casebench/neural.hpp"
#include "casebench/rng.hpp"
#include "casebench/svm.hpp"
#include "casebench/textprep.hpp"

namespace casebench {

namespace {

void require_counts(const SpMat& x, const char* who) {
  const double* v = x.valuePtr();
  for (Index k = 0; k < x.nonZeros(); ++k) {
    if (!(v[k] > 0) || v[k] != std::floor(v[k])) {
      throw DataError(std::string(who) + ": expected a count-valued document-term matrix");
    }
  }
}

void write_svm(ModelWriter& out, const LinearSvmModel& svm) {
  out.vector("svm_w", svm.w);
  out.real("svm_b", svm.b);
}

LinearSvmModel read_svm(ModelReader& in) {
  LinearSvmModel svm;
  svm.w = in.vector("svm_w");
  svm.b = in.real("svm_b");
  return svm;
}

SvmOptions svm_options(double C) {
  SvmOptions options;
  options.C = C;
  return options;
}

int as_int(double v, const char* name) {
  if (v != std::floor(v) || std::abs(v) > 1e9) throw std::invalid_argument(std::string(name) + " must be an integer");
  return static_cast<int>(v);
}

class MnbClassifier final : public Classifier {
 public:
  using Classifier::Classifier;

 protected:
  void fit_impl(const SpMat& x, std::span<const int> y, const SpMat&, std::span<const int>) override {
    model_ = mnb_fit(x, y, param("alpha"));
  }
  Eigen::VectorXd score_impl(const SpMat& x) const override { return mnb_score(model_, x); }
  void write_state(ModelWriter& out) const override {
    out.vector("log_prior", model_.log_prior);
    out.matrix("log_likelihood", model_.log_likelihood);
  }
  void read_state(ModelReader& in) override {
    model_.alpha = param("alpha");
    const Eigen::VectorXd prior = in.vector("log_prior");
    if (prior.size() != 2) throw DataError("model file: log_prior must have two entries");
    model_.log_prior = prior;
    model_.log_likelihood = in.matrix("log_likelihood");
  }

 private:
  MnbModel model_;
};

class SvmClassifier final : public Classifier {
 public:
  using Classifier::Classifier;

 protected:
  void fit_impl(const SpMat& x, std::span<const int> y, const SpMat&, std::span<const int>) override {
    model_ = svm_fit(x, y, svm_options(param("C")));
  }
  Eigen::VectorXd score_impl(const SpMat& x) const override { return svm_score(model_, x); }
  void write_state(ModelWriter& out) const override { write_svm(out, model_); }
  void read_state(ModelReader& in) override { model_ = read_svm(in); }

 private:
  LinearSvmModel model_;
};

class NbsvmClassifier final : public Classifier {
 public:
  using Classifier::Classifier;

 protected:
  void fit_impl(const SpMat& x, std::span<const int> y, const SpMat&, std::span<const int>) override {
    NbsvmOptions options;
    options.alpha_nb = param("alpha_nb");
    options.beta = param("beta");
    options.C = param("C");
    model_ = nbsvm_fit(binarize(x), y, options);
  }
  Eigen::VectorXd score_impl(const SpMat& x) const override { return nbsvm_score(model_, binarize(x)); }
  void write_state(ModelWriter& out) const override {
    out.vector("r", model_.r);
    out.vector("svm_w", model_.svm_w);
    out.vector("w", model_.w);
    out.real("b", model_.b);
  }
  void read_state(ModelReader& in) override {
    model_.alpha_nb = param("alpha_nb");
    model_.beta = param("beta");
    model_.C = param("C");
    model_.r = in.vector("r");
    model_.svm_w = in.vector("svm_w");
    model_.w = in.vector("w");
    model_.b = in.real("b");
    if (model_.w.size() != model_.r.size()) throw DataError("model file: NB-SVM weight size mismatch");
  }

 private:
  NbsvmModel model_;
};

/// TF-IDF (fitted on the training rows), an importance screen with a
/// `screen_trees` forest, then an `n_trees` forest refit on the `n_top`
/// highest-ranked features. n_top = 0 skips the screen.
class ForestClassifier final : public Classifier {
 public:
  using Classifier::Classifier;

 protected:
  void fit_impl(const SpMat& x, std::span<const int> y, const SpMat&, std::span<const int>) override {
    idf_ = fit_idf(x);
    const SpMat weighted = apply_tfidf(x, idf_);
    ForestOptions options;
    options.n_trees = as_int(param("n_trees"), "n_trees");
    options.seed = derive_seed(config().seed, 0);
    const int n_top = as_int(param("n_top"), "n_top");
    if (n_top > 0 && n_top < weighted.cols()) {
      ForestOptions screen_options = options;
      screen_options.n_trees = as_int(param("screen_trees"), "screen_trees");
      const RandomForestModel screen = rf_fit(weighted, y, screen_options);
      selected_ = top_features(rf_feature_importance(screen), n_top);
    } else {
      selected_.resize(static_cast<std::size_t>(weighted.cols()));
      for (Index j = 0; j < weighted.cols(); ++j) selected_[static_cast<std::size_t>(j)] = j;
    }
    options.seed = derive_seed(config().seed, 1);
    model_ = rf_fit(select_columns(weighted, selected_), y, options);
    model_.threshold = param("threshold");
  }
  Eigen::VectorXd score_impl(const SpMat& x) const override {
    return rf_score(model_, select_columns(apply_tfidf(x, idf_), selected_));
  }
  void write_state(ModelWriter& out) const override {
    out.vector("idf", idf_);
    Eigen::VectorXd selected(static_cast<Index>(selected_.size()));
    for (std::size_t k = 0; k < selected_.size(); ++k) selected[static_cast<Index>(k)] = static_cast<double>(selected_[k]);
    out.vector("selected", selected);
    out.integer("n_trees", static_cast<std::int64_t>(model_.trees.size()));
    for (const auto& tree : model_.trees) {
      Eigen::MatrixXd nodes(static_cast<Index>(tree.nodes.size()), 5);
      for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        nodes.row(static_cast<Index>(i)) << static_cast<double>(n.feature), n.threshold, n.left, n.right,
            n.positive_fraction;
      }
      out.matrix("tree", nodes);
    }
    out.vector("importance", model_.importance);
  }
  void read_state(ModelReader& in) override {
    idf_ = in.vector("idf");
    const Eigen::VectorXd selected = in.vector("selected");
    selected_.clear();
    for (Index k = 0; k < selected.size(); ++k) {
      const auto j = static_cast<Index>(selected[k]);
      if (j < 0 || j >= idf_.size()) throw DataError("model file: selected feature out of range");
      selected_.push_back(j);
    }
    model_ = {};
    model_.n_features = static_cast<Index>(selected_.size());
    model_.threshold = param("threshold");
    model_.seed = config().seed;
    const std::int64_t n_trees = in.integer("n_trees");
    for (std::int64_t t = 0; t < n_trees; ++t) {
      const Eigen::MatrixXd nodes = in.matrix("tree");
      if (nodes.cols() != 5 || nodes.rows() < 1) throw DataError("model file: malformed tree");
      DecisionTree tree;
      for (Index i = 0; i < nodes.rows(); ++i) {
        TreeNode n;
        n.feature = static_cast<Index>(nodes(i, 0));
        n.threshold = nodes(i, 1);
        n.left = static_cast<std::int32_t>(nodes(i, 2));
        n.right = static_cast<std::int32_t>(nodes(i, 3));
        n.positive_fraction = nodes(i, 4);
        const bool leaf = n.feature < 0;
        if (!leaf && (n.feature >= model_.n_features || n.left <= i || n.right <= i || n.left >= nodes.rows() ||
                      n.right >= nodes.rows())) {
          throw DataError("model file: malformed tree node");
        }
        tree.nodes.push_back(n);
      }
      model_.trees.push_back(std::move(tree));
    }
    model_.importance = in.vector("importance");
  }

 private:
  Eigen::VectorXd idf_;
  std::vector<Index> selected_;
  RandomForestModel model_;
};

class LdaSvmClassifier final : public Classifier {
 public:
  using Classifier::Classifier;

 protected:
  void fit_impl(const SpMat& x, std::span<const int> y, const SpMat&, std::span<const int>) override {
    LdaOptions options;
    options.n_topics = as_int(param("n_topics"), "n_topics");
    options.n_iters = as_int(param("n_iters"), "n_iters");
    options.transform_iters = as_int(param("transform_iters"), "transform_iters");
    options.seed = config().seed;
    lda_ = lda_fit(x, options);
    svm_ = svm_fit(lda_transform(lda_, x), y, svm_options(param("C")));
  }
  Eigen::VectorXd score_impl(const SpMat& x) const override { return svm_score(svm_, lda_transform(lda_, x)); }
  void write_state(ModelWriter& out) const override {
    out.integer("n_topics", lda_.n_topics);
    out.real("alpha", lda_.alpha);
    out.real("eta", lda_.eta);
    out.integer("n_iters", lda_.n_iters);
    out.integer("transform_iters", lda_.transform_iters);
    out.text("lda_seed", std::to_string(lda_.seed));
    Eigen::MatrixXd counts(lda_.n_topics, lda_.n_features);
    for (Index k = 0; k < counts.rows(); ++k)
      for (Index j = 0; j < counts.cols(); ++j) counts(k, j) = lda_.topic_word[static_cast<std::size_t>(k * counts.cols() + j)];
    out.matrix("topic_word", counts);
    write_svm(out, svm_);
  }
  void read_state(ModelReader& in) override {
    lda_ = {};
    lda_.n_topics = static_cast<int>(in.integer("n_topics"));
    lda_.alpha = in.real("alpha");
    lda_.eta = in.real("eta");
    lda_.n_iters = static_cast<int>(in.integer("n_iters"));
    lda_.transform_iters = static_cast<int>(in.integer("transform_iters"));
    lda_.seed = std::stoull(in.text("lda_seed"));
    const Eigen::MatrixXd counts = in.matrix("topic_word");
    if (counts.rows() != lda_.n_topics) throw DataError("model file: topic count mismatch");
    lda_.n_features = counts.cols();
    lda_.topic_totals.assign(static_cast<std::size_t>(lda_.n_topics), 0);
    for (Index k = 0; k < counts.rows(); ++k) {
      for (Index j = 0; j < counts.cols(); ++j) {
        const auto c = static_cast<std::int32_t>(counts(k, j));
        lda_.topic_word.push_back(c);
        lda_.topic_totals[static_cast<std::size_t>(k)] += c;
      }
    }
    svm_ = read_svm(in);
  }

 private:
  LdaModel lda_;
  LinearSvmModel svm_;
};

class LsaSvmClassifier final : public Classifier {
 public:
  using Classifier::Classifier;

 protected:
  void fit_impl(const SpMat& x, std::span<const int> y, const SpMat&, std::span<const int>) override {
    lsa_ = lsa_fit(x, as_int(param("rank"), "rank"), config().seed);
    svm_ = svm_fit(lsa_transform(lsa_, x), y, svm_options(param("C")));
  }
  Eigen::VectorXd score_impl(const SpMat& x) const override { return svm_score(svm_, lsa_transform(lsa_, x)); }
  void write_state(ModelWriter& out) const override {
    out.vector("singular_values", lsa_.singular_values);
    out.matrix("components", lsa_.components);
    write_svm(out, svm_);
  }
  void read_state(ModelReader& in) override {
    lsa_.singular_values = in.vector("singular_values");
    lsa_.components = in.matrix("components");
    lsa_.rank = lsa_.components.rows();
    svm_ = read_svm(in);
  }

 private:
  LsaModel lsa_;
  LinearSvmModel svm_;
};

class NeuralClassifier final : public Classifier {
 public:
  NeuralClassifier(ModelConfig config, Pooling pooling) : Classifier(std::move(config)), pooling_(pooling) {}

 protected:
  void fit_impl(const SpMat& x, std::span<const int> y, const SpMat& x_val, std::span<const int> y_val) override {
    if (x_val.rows() == 0) throw std::invalid_argument(kind() + ": early stopping needs validation documents");
    double positives = 0;
    for (int label : y) positives += label;
    const double prevalence = positives / static_cast<double>(y.size());
    EmbeddingNet net = init_net(pooling_, x.cols(), as_int(param("embedding_size"), "embedding_size"),
                                param("dropout"), prevalence, derive_seed(config().seed, 0));
    TrainPlan plan;
    plan.learning_rate = param("learning_rate");
    plan.batch_size = as_int(param("batch_size"), "batch_size");
    plan.patience = as_int(param("patience"), "patience");
    plan.max_epochs = as_int(param("max_epochs"), "max_epochs");
    plan.seed = derive_seed(config().seed, 1);
    TrainResult result = nn_train(std::move(net), plan, feature_sets(x), y, feature_sets(x_val), y_val);
    net_ = std::move(result.net);
    history_ = std::move(result.history);
  }
  Eigen::VectorXd score_impl(const SpMat& x) const override { return nn_score(net_, feature_sets(x)); }
  void write_state(ModelWriter& out) const override {
    out.matrix("embedding", net_.embedding);
    out.vector("output_weights", net_.output_weights);
    out.real("output_bias", net_.output_bias);
  }
  void read_state(ModelReader& in) override {
    net_.pooling = pooling_;
    net_.dropout = param("dropout");
    net_.embedding = in.matrix("embedding");
    net_.output_weights = in.vector("output_weights");
    net_.output_bias = in.real("output_bias");
    if (net_.output_weights.size() != net_.embedding.rows()) throw DataError("model file: embedding size mismatch");
  }

 private:
  Pooling pooling_;
  EmbeddingNet net_;
  std::vector<EpochRecord> history_;
};

}  // namespace

const std::vector<std::string>& model_kinds() {
  static const std::vector<std::string> kinds = {"lda_svm", "lsa_svm", "mnb", "svm", "nbsvm", "rf", "nn_sum", "nn_avg"};
  return kinds;
}

std::string display_name(const std::string& kind) {
  static const std::map<std::string, std::string> names = {
      {"lda_svm", "LDA"}, {"lsa_svm", "LSA"}, {"mnb", "MNB"}, {"svm", "SVM"},
      {"nbsvm", "NB-SVM"}, {"rf", "RF"}, {"nn_sum", "NN_sum"}, {"nn_avg", "NN_avg"}};
  const auto it = names.find(kind);
  return it == names.end() ? kind : it->second;
}

ParamMap model_defaults(const std::string& kind) {
  if (kind == "mnb") return {{"ngrams", 2}, {"threshold", 0.5}, {"alpha", kDefaultMnbAlpha}};
  if (kind == "svm") return {{"ngrams", 2}, {"threshold", 0.0}, {"C", kDefaultSvmC}};
  if (kind == "nbsvm") return {{"ngrams", 2}, {"threshold", 0.0}, {"alpha_nb", 1.0}, {"beta", 1.0}, {"C", 0.001}};
  if (kind == "rf") {
    return {{"ngrams", 2}, {"threshold", kDefaultForestThreshold}, {"n_trees", 1000}, {"screen_trees", 200}, {"n_top", 130}};
  }
  if (kind == "lda_svm") {
    return {{"ngrams", 1}, {"threshold", 0.0}, {"n_topics", 30}, {"C", 8.0}, {"n_iters", 40}, {"transform_iters", 10}};
  }
  if (kind == "lsa_svm") return {{"ngrams", 2}, {"threshold", 0.0}, {"rank", 100}, {"C", 0.001}};
  if (kind == "nn_sum") {
    return {{"ngrams", 1},        {"threshold", 0.5},      {"dropout", 0.86},        {"patience", 5},
            {"embedding_size", 64}, {"batch_size", 256}, {"learning_rate", 0.00001}, {"max_epochs", 600}};
  }
  if (kind == "nn_avg") {
    return {{"ngrams", 1},        {"threshold", 0.5},     {"dropout", 0.75},      {"patience", 10},
            {"embedding_size", 64}, {"batch_size", 32}, {"learning_rate", 0.001}, {"max_epochs", 600}};
  }
  throw std::invalid_argument("unknown model kind '" + kind + "'");
}

Classifier::Classifier(ModelConfig config) : config_(std::move(config)) {}

double Classifier::param(const std::string& name) const {
  const auto it = config_.params.find(name);
  if (it == config_.params.end()) throw std::invalid_argument(kind() + ": no parameter '" + name + "'");
  return it->second;
}

int Classifier::ngrams() const { return static_cast<int>(param("ngrams")); }

void Classifier::fit(const SpMat& x, std::span<const int> y, const SpMat& x_val, std::span<const int> y_val) {
  require_counts(x, "fit");
  if (x_val.rows() > 0) {
    require_counts(x_val, "fit");
    if (x_val.cols() != x.cols()) throw std::invalid_argument("fit: validation feature count mismatch");
  }
  if (static_cast<Index>(y_val.size()) != x_val.rows()) throw std::invalid_argument("fit: validation label count mismatch");
  fit_impl(x, y, x_val, y_val);
  n_features_ = x.cols();
}

Eigen::VectorXd Classifier::score(const SpMat& x) const {
  if (!fitted()) throw std::logic_error(kind() + ": score called before fit");
  if (x.cols() != n_features_) {
    throw DataError(kind() + ": model expects " + std::to_string(n_features_) + " features, matrix has " +
                    std::to_string(x.cols()));
  }
  require_counts(x, "score");
  return score_impl(x);
}

std::vector<int> Classifier::predict(const SpMat& x, double threshold) const {
  const Eigen::VectorXd s = score(x);
  std::vector<int> labels(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) labels[static_cast<std::size_t>(i)] = s[i] >= threshold ? 1 : 0;
  return labels;
}

void Classifier::save(std::ostream& out) const {
  if (!fitted()) throw std::logic_error(kind() + ": cannot save an unfitted model");
  ModelWriter writer(out, kind());
  writer.text("seed", std::to_string(config_.seed));
  writer.integer("n_params", static_cast<std::int64_t>(config_.params.size()));
  for (const auto& [name, value] : config_.params) {
    writer.text("param", name);
    writer.real("value", value);
  }
  writer.integer("n_features", n_features_);
  write_state(writer);
  writer.text("end", kind());
}

std::unique_ptr<Classifier> make_classifier(const ModelConfig& config) {
  ModelConfig full = config;
  full.params = model_defaults(config.kind);
  for (const auto& [name, value] : config.params) {
    if (!full.params.count(name)) {
      throw std::invalid_argument("unknown parameter '" + name + "' for model '" + config.kind + "'");
    }
    if (!std::isfinite(value)) throw std::invalid_argument("parameter '" + name + "' must be finite");
    full.params[name] = value;
  }
  const double ngrams = full.params["ngrams"];
  if (ngrams != 1 && ngrams != 2) throw std::invalid_argument("ngrams must be 1 or 2");
  const std::string& k = config.kind;
  if (k == "mnb") return std::make_unique<MnbClassifier>(full);
  if (k == "svm") return std::make_unique<SvmClassifier>(full);
  if (k == "nbsvm") return std::make_unique<NbsvmClassifier>(full);
  if (k == "rf") return std::make_unique<ForestClassifier>(full);
  if (k == "lda_svm") return std::make_unique<LdaSvmClassifier>(full);
  if (k == "lsa_svm") return std::make_unique<LsaSvmClassifier>(full);
  if (k == "nn_sum") return std::make_unique<NeuralClassifier>(full, Pooling::sum);
  return std::make_unique<NeuralClassifier>(full, Pooling::avg);
}

std::unique_ptr<Classifier> load_classifier(std::istream& in) {
  ModelReader reader(in);
  ModelConfig config;
  config.kind = reader.kind();
  try {
    model_defaults(config.kind);
  } catch (const std::invalid_argument&) {
    throw DataError("model file: unknown model kind '" + config.kind + "'");
  }
  config.seed = std::stoull(reader.text("seed"));
  const std::int64_t n_params = reader.integer("n_params");
  for (std::int64_t i = 0; i < n_params; ++i) {
    const std::string name = reader.text("param");
    config.params[name] = reader.real("value");
  }
  std::unique_ptr<Classifier> model;
  try {
    model = make_classifier(config);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  const std::int64_t n_features = reader.integer("n_features");
  if (n_features < 0) throw DataError("model file: negative feature count");
  model->read_state(reader);
  if (reader.text("end") != config.kind) throw DataError("model file: missing end marker");
  model->n_features_ = n_features;
  return model;
}

std::unique_ptr<Classifier> load_classifier(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return load_classifier(in);
}

void save_classifier(const std::string& path, const Classifier& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  model.save(out);
  if (!out) throw DataError("failed writing model file: " + path);
}

}  // namespace casebench
