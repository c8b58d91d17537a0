#include "cbcv/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "cbcv/splitters.hpp"

namespace cbcv {

const char* to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::LogReg: return "logreg";
    case LearnerKind::Tree: return "tree";
    case LearnerKind::Forest: return "forest";
    case LearnerKind::Oracle: return "oracle";
  }
  return "?";
}

LearnerKind learner_kind_from_string(std::string_view s) {
  for (LearnerKind k : {LearnerKind::LogReg, LearnerKind::Tree, LearnerKind::Forest, LearnerKind::Oracle})
    if (s == to_string(k)) return k;
  fail(ErrorKind::InvalidArgument, "unknown learner kind '" + std::string(s) + "'");
}

std::string LearnerSpec::id() const { return label.empty() ? std::string(to_string(kind)) : label; }

double LearnerSpec::get(const std::string& name, double fallback) const {
  const auto it = hyperparams.find(name);
  return it == hyperparams.end() ? fallback : it->second;
}

void validate(const LearnerSpec& spec) {
  std::set<std::string> allowed;
  switch (spec.kind) {
    case LearnerKind::LogReg: allowed = {"C"}; break;
    case LearnerKind::Tree: allowed = {"max_depth"}; break;
    case LearnerKind::Forest: allowed = {"max_depth", "n_trees"}; break;
    case LearnerKind::Oracle: break;
  }
  for (const auto& [name, value] : spec.hyperparams) {
    if (!allowed.contains(name))
      fail(ErrorKind::InvalidArgument,
           "hyperparameter '" + name + "' is not valid for learner '" + to_string(spec.kind) + "'");
    if (!std::isfinite(value) || value <= 0.0)
      fail(ErrorKind::InvalidArgument, "hyperparameter '" + name + "' must be positive");
  }
}

namespace {

std::vector<bool> classes_present(std::span<const int> y, int n_classes) {
  std::vector<bool> present(static_cast<std::size_t>(n_classes), false);
  for (int v : y) {
    require(v >= 0 && v < n_classes, "train: label out of range");
    present[static_cast<std::size_t>(v)] = true;
  }
  return present;
}

// Majority class with ties going to the lowest id.
int argmax_count(std::span<const std::size_t> counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

class ConstantModel final : public Model {
 public:
  ConstantModel(int cls, std::size_t d) : cls_(cls), d_(d) {}
  std::vector<int> predict(const Matrix& X) const override { return std::vector<int>(X.rows(), cls_); }
  std::size_t n_features() const override { return d_; }

 private:
  int cls_;
  std::size_t d_;
};

// ---------------------------------------------------------------- logistic

class LogRegModel final : public Model {
 public:
  LogRegModel(Matrix weights, std::vector<bool> present)
      : weights_(std::move(weights)), present_(std::move(present)) {}

  std::vector<int> predict(const Matrix& X) const override {
    std::vector<int> out(X.rows());
    const std::size_t d = n_features();
    for (std::size_t i = 0; i < X.rows(); ++i) {
      auto x = X.row(i);
      int best = -1;
      double best_z = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < weights_.rows(); ++c) {
        if (!present_[c]) continue;
        auto w = weights_.row(c);
        double z = w[d];
        for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
        if (best < 0 || z > best_z) {
          best_z = z;
          best = static_cast<int>(c);
        }
      }
      out[i] = best;
    }
    return out;
  }
  std::size_t n_features() const override { return weights_.cols() - 1; }

 private:
  Matrix weights_;  // K x (d + 1), bias last
  std::vector<bool> present_;
};

// Regularized mean cross-entropy and (optionally) its gradient.
double logreg_objective(const Matrix& X, std::span<const int> y, const Matrix& W, double lambda, Matrix* grad) {
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  const std::size_t k = W.rows();
  if (grad) *grad = Matrix(k, d + 1);
  std::vector<double> z(k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto x = X.row(i);
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      auto w = W.row(c);
      double v = w[d];
      for (std::size_t j = 0; j < d; ++j) v += w[j] * x[j];
      z[c] = v;
      zmax = std::max(zmax, v);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(z[c] - zmax);
    const double log_sum = zmax + std::log(sum);
    const auto yi = static_cast<std::size_t>(y[i]);
    loss += log_sum - z[yi];
    if (grad) {
      for (std::size_t c = 0; c < k; ++c) {
        const double coef = std::exp(z[c] - log_sum) - (c == yi ? 1.0 : 0.0);
        auto g = grad->row(c);
        for (std::size_t j = 0; j < d; ++j) g[j] += coef * x[j];
        g[d] += coef;
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  double penalty = 0.0;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < d; ++j) penalty += W(c, j) * W(c, j);
  loss += 0.5 * lambda * penalty;
  if (grad) {
    for (std::size_t c = 0; c < k; ++c) {
      auto g = grad->row(c);
      for (std::size_t j = 0; j <= d; ++j) g[j] *= inv_n;
      for (std::size_t j = 0; j < d; ++j) g[j] += lambda * W(c, j);
    }
  }
  return loss;
}

// -------------------------------------------------------------------- tree

struct Node {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
};

class TreeModel final : public Model {
 public:
  TreeModel(std::vector<Node> nodes, std::size_t d) : nodes_(std::move(nodes)), d_(d) {}

  int predict_row(std::span<const double> x) const {
    int at = 0;
    while (nodes_[static_cast<std::size_t>(at)].feature >= 0) {
      const Node& node = nodes_[static_cast<std::size_t>(at)];
      at = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes_[static_cast<std::size_t>(at)].label;
  }

  std::vector<int> predict(const Matrix& X) const override {
    std::vector<int> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_row(X.row(i));
    return out;
  }
  std::size_t n_features() const override { return d_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  std::size_t d_;
};

double gini(std::span<const std::size_t> counts, std::size_t total) {
  if (total == 0) return 0.0;
  double s = 0.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s += p * p;
  }
  return 1.0 - s;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const int> y, int n_classes, const TreeOptions& options)
      : X_(X), y_(y), k_(static_cast<std::size_t>(n_classes)), options_(options), rng_(options.seed) {}

  std::vector<Node> build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t> rows, int depth) {
    std::vector<std::size_t> counts(k_, 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(y_[r])];
    const int at = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_.back().label = argmax_count(counts);

    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    if (pure || depth >= options_.max_depth || rows.size() < 2) return at;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_impurity = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> features(X_.cols());
    std::iota(features.begin(), features.end(), 0);
    std::size_t m = features.size();
    if (options_.max_features > 0 && options_.max_features < features.size()) {
      rng_.shuffle(features);
      m = options_.max_features;
      std::sort(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(m));
    }

    std::vector<std::size_t> order = rows;
    std::vector<std::size_t> left(k_);
    std::vector<std::size_t> right(k_);
    for (std::size_t fi = 0; fi < m; ++fi) {
      const std::size_t f = features[fi];
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = X_(a, f);
        const double vb = X_(b, f);
        return va != vb ? va < vb : a < b;
      });
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      const std::size_t total = order.size();
      for (std::size_t p = 0; p + 1 < total; ++p) {
        const auto cls = static_cast<std::size_t>(y_[order[p]]);
        ++left[cls];
        --right[cls];
        const double v = X_(order[p], f);
        const double next = X_(order[p + 1], f);
        if (!(v < next)) continue;
        const std::size_t nl = p + 1;
        const std::size_t nr = total - nl;
        const double impurity = (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
                                static_cast<double>(total);
        if (impurity < best_impurity - 1e-15) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          double mid = 0.5 * (v + next);
          if (!(mid < next)) mid = v;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return at;

    std::vector<std::size_t> lrows;
    std::vector<std::size_t> rrows;
    for (std::size_t r : rows)
      (X_(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? lrows : rrows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    nodes_[static_cast<std::size_t>(at)].feature = best_feature;
    nodes_[static_cast<std::size_t>(at)].threshold = best_threshold;
    const int l = grow(std::move(lrows), depth + 1);
    nodes_[static_cast<std::size_t>(at)].left = l;
    const int r = grow(std::move(rrows), depth + 1);
    nodes_[static_cast<std::size_t>(at)].right = r;
    return at;
  }

  const Matrix& X_;
  std::span<const int> y_;
  std::size_t k_;
  TreeOptions options_;
  Rng rng_;
  std::vector<Node> nodes_;
};

class ForestModel final : public Model {
 public:
  ForestModel(std::vector<TreeModel> trees, int n_classes, std::size_t d)
      : trees_(std::move(trees)), k_(static_cast<std::size_t>(n_classes)), d_(d) {}

  std::vector<int> predict(const Matrix& X) const override {
    std::vector<int> out(X.rows());
    std::vector<std::size_t> votes(k_);
    for (std::size_t i = 0; i < X.rows(); ++i) {
      std::fill(votes.begin(), votes.end(), 0);
      for (const auto& t : trees_) ++votes[static_cast<std::size_t>(t.predict_row(X.row(i)))];
      out[i] = argmax_count(votes);
    }
    return out;
  }
  std::size_t n_features() const override { return d_; }

 private:
  std::vector<TreeModel> trees_;
  std::size_t k_;
  std::size_t d_;
};

// ------------------------------------------------------------------ oracle

class OracleModel final : public Model {
 public:
  explicit OracleModel(const Dataset& reference) : d_(reference.n_features()) {
    for (std::size_t i = 0; i < reference.n_instances(); ++i) {
      auto row = reference.features.row(i);
      table_.try_emplace(std::vector<double>(row.begin(), row.end()), reference.labels[i]);
    }
  }
  std::vector<int> predict(const Matrix& X) const override {
    std::vector<int> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
      auto row = X.row(i);
      const auto it = table_.find(std::vector<double>(row.begin(), row.end()));
      if (it == table_.end()) fail(ErrorKind::Internal, "oracle learner: row not found in reference dataset");
      out[i] = it->second;
    }
    return out;
  }
  std::size_t n_features() const override { return d_; }

 private:
  std::map<std::vector<double>, int> table_;
  std::size_t d_;
};

}  // namespace

std::shared_ptr<const Model> train_logreg(const Matrix& X, std::span<const int> y, int n_classes,
                                          const LogRegOptions& options, const LossTrace& trace) {
  require(X.rows() > 0 && X.rows() == y.size(), "logreg: empty or mismatched training set");
  require(options.C > 0.0, "logreg: C must be positive");
  const auto present = classes_present(y, n_classes);
  const double lambda = 1.0 / (options.C * static_cast<double>(X.rows()));
  Matrix W(static_cast<std::size_t>(n_classes), X.cols() + 1);
  Matrix grad;
  Matrix trial_grad;
  double loss = logreg_objective(X, y, W, lambda, &grad);
  double lr = options.learning_rate;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Matrix trial = W;
    double trial_loss = 0.0;
    while (true) {
      for (std::size_t c = 0; c < W.rows(); ++c)
        for (std::size_t j = 0; j < W.cols(); ++j) trial(c, j) = W(c, j) - lr * grad(c, j);
      trial_loss = logreg_objective(X, y, trial, lambda, &trial_grad);
      if (trial_loss <= loss || lr < 1e-12) break;
      lr *= 0.5;
    }
    if (trial_loss > loss) break;  // no descent step left
    W = std::move(trial);
    grad = trial_grad;
    loss = trial_loss;
    if (trace) trace(epoch, loss);
  }
  return std::make_shared<LogRegModel>(std::move(W), present);
}

std::shared_ptr<const Model> train_tree(const Matrix& X, std::span<const int> y, int n_classes,
                                        const TreeOptions& options) {
  require(X.rows() > 0 && X.rows() == y.size(), "tree: empty or mismatched training set");
  require(options.max_depth >= 1, "tree: max_depth must be at least 1");
  classes_present(y, n_classes);
  std::vector<std::size_t> rows(X.rows());
  std::iota(rows.begin(), rows.end(), 0);
  TreeBuilder builder(X, y, n_classes, options);
  return std::make_shared<TreeModel>(builder.build(std::move(rows)), X.cols());
}

std::shared_ptr<const Model> train_forest(const Matrix& X, std::span<const int> y, int n_classes,
                                          const ForestOptions& options) {
  require(X.rows() > 0 && X.rows() == y.size(), "forest: empty or mismatched training set");
  require(options.n_trees >= 1, "forest: n_trees must be positive");
  classes_present(y, n_classes);
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  std::vector<TreeModel> trees;
  trees.reserve(static_cast<std::size_t>(options.n_trees));
  for (int t = 0; t < options.n_trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(options.seed, static_cast<std::uint64_t>(t));
    std::vector<std::size_t> rows(n);
    if (options.bootstrap) {
      Rng rng(derive_seed(tree_seed, std::string_view("bootstrap")));
      for (std::size_t& r : rows) r = rng.uniform_index(n);
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    TreeOptions topt;
    topt.max_depth = options.max_depth;
    topt.max_features = options.sqrt_features
                            ? std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))))
                            : 0;
    topt.seed = tree_seed;
    TreeBuilder builder(X, y, n_classes, topt);
    trees.emplace_back(builder.build(std::move(rows)), d);
  }
  return std::make_shared<ForestModel>(std::move(trees), n_classes, d);
}

TrainedModel train(const LearnerSpec& spec, const Matrix& X, std::span<const int> y, int n_classes,
                   const Dataset* reference) {
  validate(spec);
  if (X.rows() == 0) fail(ErrorKind::InvalidArgument, "train: empty training set");
  require(X.rows() == y.size(), "train: feature/label length mismatch");
  for (double v : X.data())
    if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "train: non-finite feature value");

  TrainedModel tm;
  tm.kind = spec.kind;
  tm.n_classes = n_classes;

  if (spec.kind == LearnerKind::Oracle) {
    if (!reference) fail(ErrorKind::InvalidArgument, "oracle learner needs a reference dataset");
    tm.model = std::make_shared<OracleModel>(*reference);
    return tm;
  }

  const auto present = classes_present(y, n_classes);
  if (std::count(present.begin(), present.end(), true) == 1) {
    // Single training class degenerates to a constant predictor.
    tm.model = std::make_shared<ConstantModel>(y[0], X.cols());
    return tm;
  }

  switch (spec.kind) {
    case LearnerKind::LogReg: {
      LogRegOptions opt;
      opt.C = spec.get("C", 1.0);
      tm.model = train_logreg(X, y, n_classes, opt);
      break;
    }
    case LearnerKind::Tree: {
      TreeOptions opt;
      opt.max_depth = static_cast<int>(spec.get("max_depth", 50));
      opt.seed = spec.seed;
      tm.model = train_tree(X, y, n_classes, opt);
      break;
    }
    case LearnerKind::Forest: {
      ForestOptions opt;
      opt.max_depth = static_cast<int>(spec.get("max_depth", 50));
      opt.n_trees = static_cast<int>(spec.get("n_trees", 100));
      opt.seed = spec.seed;
      tm.model = train_forest(X, y, n_classes, opt);
      break;
    }
    case LearnerKind::Oracle: break;
  }
  return tm;
}

std::vector<int> predict(const TrainedModel& model, const Matrix& X) {
  require(model.model != nullptr, "predict: untrained model");
  if (X.rows() > 0 && X.cols() != model.model->n_features())
    fail(ErrorKind::InvalidArgument, "predict: feature dimension " + std::to_string(X.cols()) +
                                         " does not match training dimension " +
                                         std::to_string(model.model->n_features()));
  return model.model->predict(X);
}

// ----------------------------------------------------------------- metrics

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
  require(y_true.size() == y_pred.size(), "confusion: length mismatch");
  require(n_classes >= 1, "confusion: need at least one class");
  const auto k = static_cast<std::size_t>(n_classes);
  ConfusionCounts cc;
  cc.n_classes = n_classes;
  cc.n_eval = y_true.size();
  cc.tp.assign(k, 0);
  cc.fp.assign(k, 0);
  cc.fn.assign(k, 0);
  cc.tn.assign(k, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes)
      fail(ErrorKind::InvalidArgument, "confusion: label outside [0, K)");
    if (t == p) {
      ++cc.correct;
      ++cc.tp[static_cast<std::size_t>(t)];
    } else {
      ++cc.fn[static_cast<std::size_t>(t)];
      ++cc.fp[static_cast<std::size_t>(p)];
    }
  }
  for (std::size_t c = 0; c < k; ++c) cc.tn[c] = cc.n_eval - cc.tp[c] - cc.fp[c] - cc.fn[c];
  return cc;
}

double accuracy(const ConfusionCounts& cc) {
  require(cc.n_eval > 0, "accuracy: empty evaluation set");
  return static_cast<double>(cc.correct) / static_cast<double>(cc.n_eval);
}

double precision(const ConfusionCounts& cc, int cls) {
  const auto c = static_cast<std::size_t>(cls);
  const std::size_t denom = cc.tp[c] + cc.fp[c];
  return denom == 0 ? 0.0 : static_cast<double>(cc.tp[c]) / static_cast<double>(denom);
}

double recall(const ConfusionCounts& cc, int cls) {
  const auto c = static_cast<std::size_t>(cls);
  const std::size_t denom = cc.tp[c] + cc.fn[c];
  return denom == 0 ? 0.0 : static_cast<double>(cc.tp[c]) / static_cast<double>(denom);
}

double class_f1(const ConfusionCounts& cc, int cls) {
  const double p = precision(cc, cls);
  const double r = recall(cc, cls);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double f1_score(const ConfusionCounts& cc, F1Average average) {
  require(cc.n_eval > 0, "f1_score: empty evaluation set");
  if (cc.n_classes == 2) {
    // No positives in truth or prediction: nothing was misclassified.
    if (cc.tp[1] + cc.fp[1] + cc.fn[1] == 0) return 1.0;
    return class_f1(cc, 1);
  }
  double sum = 0.0;
  double weight = 0.0;
  for (int c = 0; c < cc.n_classes; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    if (cc.tp[uc] + cc.fp[uc] + cc.fn[uc] == 0) continue;
    const double w = average == F1Average::Macro ? 1.0 : static_cast<double>(cc.tp[uc] + cc.fn[uc]);
    sum += w * class_f1(cc, c);
    weight += w;
  }
  return weight > 0.0 ? sum / weight : 0.0;
}

double balanced_accuracy(const ConfusionCounts& cc) {
  require(cc.n_eval > 0, "balanced_accuracy: empty evaluation set");
  double sum = 0.0;
  for (int c = 0; c < cc.n_classes; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    if (cc.tp[uc] + cc.fn[uc] == 0)
      fail(ErrorKind::Data, "balanced_accuracy: class " + std::to_string(c) + " absent from y_true");
    sum += recall(cc, c);
  }
  return sum / static_cast<double>(cc.n_classes);
}

const char* to_string(MetricKind m) {
  switch (m) {
    case MetricKind::Accuracy: return "accuracy";
    case MetricKind::F1: return "f1";
    case MetricKind::BalancedAccuracy: return "balanced_accuracy";
  }
  return "?";
}

MetricKind metric_from_string(std::string_view s) {
  for (MetricKind m : {MetricKind::Accuracy, MetricKind::F1, MetricKind::BalancedAccuracy})
    if (s == to_string(m)) return m;
  fail(ErrorKind::InvalidArgument, "unknown metric '" + std::string(s) + "'");
}

double score(MetricKind metric, const ConfusionCounts& cc, F1Average average) {
  switch (metric) {
    case MetricKind::Accuracy: return accuracy(cc);
    case MetricKind::F1: return f1_score(cc, average);
    case MetricKind::BalancedAccuracy: return balanced_accuracy(cc);
  }
  return 0.0;
}

// ------------------------------------------------------------------ tuning

Grid default_grid(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::LogReg: return {{"C", {0.003, 0.03, 0.3, 3.0, 30.0}}};
    case LearnerKind::Tree: return {{"max_depth", {1, 5, 10, 15, 50}}};
    case LearnerKind::Forest: return {{"max_depth", {1, 5, 10, 15, 50}}};
    case LearnerKind::Oracle: return {};
  }
  return {};
}

GridSearchResult grid_search(const Dataset& ds, LearnerKind kind, const Grid& grid, std::uint64_t seed, int folds) {
  for (const auto& [name, values] : grid)
    if (values.empty()) fail(ErrorKind::InvalidArgument, "grid_search: empty value list for '" + name + "'");
  const auto dist = class_distribution(ds);
  for (std::size_t c = 0; c < dist.counts.size(); ++c)
    if (dist.counts[c] < static_cast<std::size_t>(folds))
      fail(ErrorKind::Data, "grid_search: dataset too small for " + std::to_string(folds) + " folds (class '" +
                                ds.class_names[c] + "' has " + std::to_string(dist.counts[c]) + " instances)");

  std::vector<std::map<std::string, double>> combos{{}};
  for (const auto& [name, values] : grid) {
    std::vector<std::map<std::string, double>> next;
    for (const auto& base : combos)
      for (double v : values) {
        auto c = base;
        c[name] = v;
        next.push_back(std::move(c));
      }
    combos = std::move(next);
  }

  const auto pairs = materialize_folds(split_scv(ds, folds, seed));
  GridSearchResult result;
  double best = -1.0;
  for (const auto& combo : combos) {
    LearnerSpec spec{kind, combo, seed, {}};
    validate(spec);
    double total = 0.0;
    for (const auto& pair : pairs) {
      const Dataset train_part = ds.subset(pair.train);
      const Dataset test_part = ds.subset(pair.test);
      const auto model = train(spec, train_part.features, train_part.labels, ds.n_classes(), &ds);
      const auto pred = predict(model, test_part.features);
      total += balanced_accuracy(confusion(test_part.labels, pred, ds.n_classes()));
    }
    const double mean = total / static_cast<double>(pairs.size());
    result.scores.emplace_back(combo, mean);
    if (mean > best) {
      best = mean;
      result.best = spec;
    }
  }
  return result;
}

}  // namespace cbcv
