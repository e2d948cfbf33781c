#include "casebench/forest.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "casebench/model_checks.hpp"
#include "casebench/rng.hpp"

namespace casebench {

namespace {

double feature_value(const SpMat& x, Index row, Index feature) {
  const auto* outer = x.outerIndexPtr();
  const auto* inner = x.innerIndexPtr();
  const auto* begin = inner + outer[row];
  const auto* end = inner + outer[row + 1];
  const auto* it = std::lower_bound(begin, end, static_cast<SpMat::StorageIndex>(feature));
  if (it != end && *it == feature) return x.valuePtr()[it - inner];
  return 0.0;
}

Index isqrt_ceil(Index n) {
  auto k = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(n))));
  while (k > 0 && (k - 1) * (k - 1) >= n) --k;
  while (k * k < n) ++k;
  return std::max<Index>(k, 1);
}

// Twice the Gini impurity times the node weight: W * (1 - p^2 - (1-p)^2).
double weighted_gini(double w, double pos) {
  if (w <= 0) return 0.0;
  return 2.0 * pos * (w - pos) / w;
}

struct TrainingData {
  const SpMat& rows;
  SparseCols<double> cols;
  std::span<const int> y;
  Index n = 0;
  Index n_features = 0;
};

struct Entry {
  double value;
  double weight;
  double positive;
  std::int32_t row;  // -1 for the aggregated zero entry
};

struct Split {
  Index feature = -1;
  double threshold = 0;
  double impurity = 0;  // weighted impurity of the two children
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainingData& data, Index max_features)
      : data_(data),
        max_features_(max_features),
        weight_(static_cast<std::size_t>(data.n), 0.0),
        marker_(static_cast<std::size_t>(data.n), 0),
        scratch_value_(static_cast<std::size_t>(data.n), 0.0),
        feature_perm_(static_cast<std::size_t>(data.n_features)),
        feature_stamp_(static_cast<std::size_t>(data.n_features), 0) {}

  DecisionTree build(std::uint64_t seed, bool bootstrap, std::vector<std::pair<Index, double>>& importance) {
    Rng rng(seed);
    std::fill(weight_.begin(), weight_.end(), 0.0);
    if (bootstrap) {
      for (Index i = 0; i < data_.n; ++i) weight_[rng.index(static_cast<std::uint64_t>(data_.n))] += 1.0;
    } else {
      std::fill(weight_.begin(), weight_.end(), 1.0);
    }
    samples_.clear();
    for (Index i = 0; i < data_.n; ++i)
      if (weight_[static_cast<std::size_t>(i)] > 0) samples_.push_back(static_cast<std::int32_t>(i));
    std::iota(feature_perm_.begin(), feature_perm_.end(), Index{0});

    std::vector<double> gain(static_cast<std::size_t>(data_.n_features), 0.0);
    std::vector<char> used(static_cast<std::size_t>(data_.n_features), 0);
    std::vector<Index> touched;

    DecisionTree tree;
    tree.nodes.emplace_back();
    struct Pending {
      std::size_t begin, end;
      std::int32_t node;
    };
    std::vector<Pending> stack{{0, samples_.size(), 0}};
    double root_weight = 0;
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      double w = 0, pos = 0;
      for (std::size_t k = job.begin; k < job.end; ++k) {
        const auto s = static_cast<std::size_t>(samples_[k]);
        w += weight_[s];
        pos += weight_[s] * data_.y[s];
      }
      if (job.node == 0) root_weight = w;
      tree.nodes[static_cast<std::size_t>(job.node)].positive_fraction = w > 0 ? pos / w : 0.0;
      if (pos == 0 || pos == w) continue;

      const Split split = find_split(job.begin, job.end, w, pos, rng);
      if (split.feature < 0) continue;

      const double decrease = weighted_gini(w, pos) - split.impurity;
      if (!used[static_cast<std::size_t>(split.feature)]) {
        used[static_cast<std::size_t>(split.feature)] = 1;
        touched.push_back(split.feature);
      }
      gain[static_cast<std::size_t>(split.feature)] += std::max(decrease, 0.0);

      const std::size_t mid = partition(job.begin, job.end, split);
      auto& node = tree.nodes[static_cast<std::size_t>(job.node)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = static_cast<std::int32_t>(tree.nodes.size());
      node.right = node.left + 1;
      const std::int32_t left = node.left, right = node.right;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      stack.push_back({mid, job.end, right});
      stack.push_back({job.begin, mid, left});
    }

    std::sort(touched.begin(), touched.end());
    double total = 0;
    for (Index f : touched) total += gain[static_cast<std::size_t>(f)];
    importance.clear();
    if (total > 0 && root_weight > 0) {
      for (Index f : touched) importance.emplace_back(f, gain[static_cast<std::size_t>(f)] / total);
    }
    return tree;
  }

 private:
  // Evaluates max_features uniformly drawn candidates. When every candidate
  // is constant within the node, draws further candidates from the features
  // present in the node's rows until one varies.
  Split find_split(std::size_t begin, std::size_t end, double w, double pos, Rng& rng) {
    ++stamp_;
    current_samples_ = std::span<const std::int32_t>(samples_.data() + begin, end - begin);
    for (std::size_t k = begin; k < end; ++k) marker_[static_cast<std::size_t>(samples_[k])] = stamp_;
    const std::size_t node_size = end - begin;

    Split best;
    bool varied = false;
    const std::size_t total = feature_perm_.size();
    const auto draws = std::min(total, static_cast<std::size_t>(max_features_));
    for (std::size_t p = 0; p < draws; ++p) {
      const std::size_t j = p + rng.index(total - p);
      std::swap(feature_perm_[p], feature_perm_[j]);
      varied = evaluate(feature_perm_[p], node_size, w, pos, best) || varied;
    }
    if (varied) return best;

    pool_.clear();
    const auto* outer = data_.rows.outerIndexPtr();
    const auto* inner = data_.rows.innerIndexPtr();
    for (std::size_t k = begin; k < end; ++k) {
      const auto s = samples_[k];
      for (auto q = outer[s]; q < outer[s + 1]; ++q) {
        const auto f = static_cast<std::size_t>(inner[q]);
        if (feature_stamp_[f] != stamp_) {
          feature_stamp_[f] = stamp_;
          pool_.push_back(static_cast<Index>(f));
        }
      }
    }
    std::sort(pool_.begin(), pool_.end());
    for (std::size_t p = 0; p < pool_.size(); ++p) {
      const std::size_t j = p + rng.index(pool_.size() - p);
      std::swap(pool_[p], pool_[j]);
      if (evaluate(pool_[p], node_size, w, pos, best)) break;
    }
    return best;
  }

  void gather(Index feature, std::size_t node_size) {
    entries_.clear();
    const auto& cols = data_.cols;
    const auto col_begin = cols.outerIndexPtr()[feature];
    const auto col_end = cols.outerIndexPtr()[feature + 1];
    if (static_cast<std::size_t>(col_end - col_begin) <= 8 * node_size) {
      const auto* rows = cols.innerIndexPtr();
      const auto* vals = cols.valuePtr();
      for (auto p = col_begin; p < col_end; ++p) {
        const auto r = static_cast<std::size_t>(rows[p]);
        if (marker_[r] == stamp_) push_entry(vals[p], static_cast<std::int32_t>(r));
      }
    } else {
      for (std::size_t k = 0; k < node_size; ++k) {
        const auto s = current_samples_[k];
        const double v = feature_value(data_.rows, s, feature);
        if (v != 0.0) push_entry(v, s);
      }
    }
  }

  void push_entry(double value, std::int32_t row) {
    const double wt = weight_[static_cast<std::size_t>(row)];
    entries_.push_back({value, wt, wt * data_.y[static_cast<std::size_t>(row)], row});
  }

  // Returns false when the feature is constant within the node.
  bool evaluate(Index feature, std::size_t node_size, double w, double pos, Split& best) {
    gather(feature, node_size);
    if (entries_.empty()) return false;
    double w_nz = 0, pos_nz = 0;
    for (const auto& e : entries_) {
      w_nz += e.weight;
      pos_nz += e.positive;
    }
    if (w - w_nz > 0) entries_.push_back({0.0, w - w_nz, pos - pos_nz, -1});
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return a.value < b.value || (a.value == b.value && a.row < b.row);
    });
    if (entries_.front().value == entries_.back().value) return false;

    double wl = 0, pl = 0;
    for (std::size_t i = 0; i + 1 < entries_.size(); ++i) {
      wl += entries_[i].weight;
      pl += entries_[i].positive;
      if (entries_[i].value == entries_[i + 1].value) continue;
      const double impurity = weighted_gini(wl, pl) + weighted_gini(w - wl, pos - pl);
      if (best.feature < 0 || impurity < best.impurity) {
        double threshold = 0.5 * (entries_[i].value + entries_[i + 1].value);
        if (!(threshold < entries_[i + 1].value)) threshold = entries_[i].value;
        best = {feature, threshold, impurity};
      }
    }
    return true;
  }

  std::size_t partition(std::size_t begin, std::size_t end, const Split& split) {
    current_samples_ = std::span<const std::int32_t>(samples_.data() + begin, end - begin);
    gather(split.feature, end - begin);
    for (const auto& e : entries_) scratch_value_[static_cast<std::size_t>(e.row)] = e.value;
    auto mid = std::stable_partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                     samples_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::int32_t s) {
                                       return scratch_value_[static_cast<std::size_t>(s)] <= split.threshold;
                                     });
    for (const auto& e : entries_) scratch_value_[static_cast<std::size_t>(e.row)] = 0.0;
    return static_cast<std::size_t>(mid - samples_.begin());
  }

  const TrainingData& data_;
  Index max_features_;
  std::vector<double> weight_;
  std::vector<std::int32_t> samples_;
  std::span<const std::int32_t> current_samples_;
  std::vector<std::int32_t> marker_;
  std::vector<double> scratch_value_;
  std::vector<Index> feature_perm_;
  std::vector<std::int32_t> feature_stamp_;
  std::vector<Index> pool_;
  std::vector<Entry> entries_;
  std::int32_t stamp_ = 0;
};

}  // namespace

const TreeNode& DecisionTree::leaf_for(const SpMat& x, Index row) const {
  std::size_t k = 0;
  while (nodes[k].feature >= 0) {
    const double v = feature_value(x, row, nodes[k].feature);
    k = static_cast<std::size_t>(v <= nodes[k].threshold ? nodes[k].left : nodes[k].right);
  }
  return nodes[k];
}

RandomForestModel rf_fit(const SpMat& x, std::span<const int> y, const ForestOptions& options) {
  if (x.rows() == 0) throw std::invalid_argument("rf_fit: empty training set");
  if (options.n_trees < 1) throw std::invalid_argument("rf_fit: n_trees must be at least 1");
  check_binary_labels(y, static_cast<std::size_t>(x.rows()), "rf_fit");
  if (!x.isCompressed()) throw std::invalid_argument("rf_fit: matrix must be compressed");

  TrainingData data{x, SparseCols<double>(x), y, x.rows(), x.cols()};
  const Index max_features =
      options.max_features > 0 ? std::min(options.max_features, x.cols()) : isqrt_ceil(std::max<Index>(x.cols(), 1));

  RandomForestModel model;
  model.n_features = x.cols();
  model.seed = options.seed;
  model.trees.resize(static_cast<std::size_t>(options.n_trees));
  std::vector<std::vector<std::pair<Index, double>>> tree_importance(static_cast<std::size_t>(options.n_trees));

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int n_threads = std::max(1, std::min(options.n_trees, options.n_threads > 0 ? options.n_threads : static_cast<int>(hw)));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
  auto work = [&](int worker) {
    try {
      TreeBuilder builder(data, max_features);
      for (int t = worker; t < options.n_trees; t += n_threads) {
        const auto idx = static_cast<std::size_t>(t);
        model.trees[idx] = builder.build(derive_seed(options.seed, static_cast<std::uint64_t>(t)), options.bootstrap,
                                         tree_importance[idx]);
      }
    } catch (...) {
      errors[static_cast<std::size_t>(worker)] = std::current_exception();
    }
  };
  if (n_threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < n_threads; ++k) pool.emplace_back(work, k);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  model.importance = Eigen::VectorXd::Zero(x.cols());
  for (const auto& per_tree : tree_importance)
    for (const auto& [f, v] : per_tree) model.importance[f] += v;
  const double total = model.importance.sum();
  if (total > 0) model.importance /= total;
  return model;
}

Eigen::VectorXd rf_score(const RandomForestModel& model, const SpMat& x) {
  if (x.cols() != model.n_features) throw std::invalid_argument("rf_score: feature count mismatch");
  if (model.trees.empty()) throw std::invalid_argument("rf_score: model has no trees");
  Eigen::VectorXd out(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    std::size_t votes = 0;
    for (const auto& tree : model.trees) votes += tree.votes_positive(x, r) ? 1 : 0;
    out[r] = static_cast<double>(votes) / static_cast<double>(model.trees.size());
  }
  return out;
}

std::vector<int> rf_predict(const RandomForestModel& model, const SpMat& x, double threshold) {
  const Eigen::VectorXd s = rf_score(model, x);
  std::vector<int> out(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s[i] >= threshold ? 1 : 0;
  return out;
}

const Eigen::VectorXd& rf_feature_importance(const RandomForestModel& model) { return model.importance; }

std::vector<Index> top_features(const Eigen::VectorXd& importance, Index k) {
  std::vector<Index> order(static_cast<std::size_t>(importance.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return importance[a] > importance[b]; });
  order.resize(static_cast<std::size_t>(std::min<Index>(k, importance.size())));
  return order;
}

}  // namespace casebench
