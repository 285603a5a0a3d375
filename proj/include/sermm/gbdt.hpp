#pragma once

// Second-order gradient-boosted regression trees with a softmax multiclass
// objective. Exact greedy split search over pre-sorted feature columns.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sermm/matrix.hpp"

namespace sermm {

struct GbdtConfig {
  int num_rounds = 200;
  int max_depth = 4;
  double learning_rate = 0.1;
  double lambda_l2 = 1.0;
  double gamma_min_gain = 0.0;
  double min_child_hessian = 1.0;
  /// Row fraction drawn once per round and shared by the class trees.
  double subsample = 0.8;
  /// Feature fraction drawn per tree.
  double colsample = 0.8;
  int num_classes = 7;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const GbdtConfig&) const = default;
};

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Node 0 is the root. Rows with x[feature] <= threshold go left.
class RegressionTree {
 public:
  RegressionTree() : nodes_{TreeNode{}} {}
  explicit RegressionTree(std::vector<TreeNode> nodes);

  double predict(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const;
  int depth() const;

  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;
  /// Optional per-row speaker or group ids.
  std::vector<std::string> groups;

  std::size_t size() const noexcept { return labels.size(); }
  /// Throws on shape mismatch, labels outside [0, num_classes) or non-finite features.
  void validate(int num_classes) const;
};

struct GbdtModel {
  /// Round-major: trees[round * num_classes + k].
  std::vector<RegressionTree> trees;
  double base_score = 0.0;
  GbdtConfig config;
  std::size_t feature_dim = 0;

  int rounds() const;
  bool operator==(const GbdtModel&) const = default;
};

struct GradHess {
  Matrix grad;
  Matrix hess;
};

/// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

GradHess softmax_grad_hess(const Matrix& logits, std::span<const int> labels);

/// Mean multiclass cross-entropy.
double log_loss(const Matrix& logits, std::span<const int> labels);

/// -G / (H + lambda), 0 when the denominator vanishes.
double leaf_weight(double g, double h, double lambda);

double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma);

/// Per-column row orders sorted by value, shared by all trees of one fit.
class SortedColumns {
 public:
  explicit SortedColumns(const Matrix& x);
  std::span<const std::uint32_t> order(std::size_t feature) const {
    return {order_.data() + feature * rows_, rows_};
  }
  /// Column values in sorted order.
  std::span<const double> values(std::size_t feature) const {
    return {values_.data() + feature * rows_, rows_};
  }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint32_t> order_;
  std::vector<double> values_;
};

/// One tree fitted to the given gradient statistics. `in_sample` marks the
/// rows drawn for this round; `features` lists the candidate columns.
RegressionTree build_tree(const Matrix& x, const SortedColumns& sorted,
                          std::span<const double> grad, std::span<const double> hess,
                          std::span<const char> in_sample, std::span<const std::size_t> features,
                          const GbdtConfig& config);

/// Convenience overload: all rows, all features, no pre-sorting reuse.
RegressionTree build_tree(const Matrix& x, std::span<const double> grad,
                          std::span<const double> hess, const GbdtConfig& config);

/// Called after each round with the round index and the training logits.
using RoundCallback = std::function<void(int round, const Matrix& logits)>;

GbdtModel fit(const LabeledDataset& data, const GbdtConfig& config,
              const RoundCallback& on_round = {});

/// Raw per-class scores.
Matrix predict_logits(const GbdtModel& model, const Matrix& features);

struct Prediction {
  std::vector<int> classes;
  Matrix probabilities;
};

Prediction predict(const GbdtModel& model, const Matrix& features);

/// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const double> row);

inline constexpr std::string_view kModelFormat = "sermm-gbdt";
inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const GbdtModel& model);
GbdtModel model_from_json(std::string_view text);
void save_model(const GbdtModel& model, const std::filesystem::path& path);
GbdtModel load_model(const std::filesystem::path& path);

}  // namespace sermm
