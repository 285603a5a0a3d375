#include "sermm/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "sermm/rng.hpp"

namespace sermm {

using nlohmann::json;

void GbdtConfig::validate() const {
  if (num_classes < 2) throw ParameterError("num_classes must be at least 2");
  if (num_rounds < 1) throw ParameterError("num_rounds must be at least 1");
  if (max_depth < 1) throw ParameterError("max_depth must be at least 1");
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (!(lambda_l2 >= 0.0)) throw ParameterError("lambda_l2 must be non-negative");
  if (!(gamma_min_gain >= 0.0)) throw ParameterError("gamma_min_gain must be non-negative");
  if (!(min_child_hessian >= 0.0)) throw ParameterError("min_child_hessian must be non-negative");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ParameterError("subsample must lie in (0, 1]");
  if (!(colsample > 0.0 && colsample <= 1.0)) throw ParameterError("colsample must lie in (0, 1]");
}

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw InvariantError("tree without nodes");
  const int n = static_cast<int>(nodes_.size());
  for (int i = 0; i < n; ++i) {
    const TreeNode& node = nodes_[static_cast<std::size_t>(i)];
    if (node.is_leaf()) {
      if (!std::isfinite(node.weight)) throw InvariantError("non-finite leaf weight");
    } else if (node.left <= i || node.left >= n || node.right <= i || node.right >= n) {
      // Children always follow their parent, which also rules out cycles.
      throw InvariantError("tree node references a missing child");
    } else if (!std::isfinite(node.threshold)) {
      throw InvariantError("non-finite split threshold");
    }
  }
}

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const TreeNode& node = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                     ? node.left
                                     : node.right);
  }
  return nodes_[i].weight;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int RegressionTree::depth() const {
  std::vector<int> level(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes_[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes_[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes_[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

void LabeledDataset::validate(int num_classes) const {
  if (features.rows() != labels.size()) {
    throw DimensionError("dataset has " + std::to_string(features.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (!groups.empty() && groups.size() != labels.size()) {
    throw DimensionError("dataset group ids do not match the row count");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
  }
  for (double v : features.data()) {
    if (!std::isfinite(v)) throw DataError("dataset contains a non-finite feature value");
  }
}

int GbdtModel::rounds() const {
  return static_cast<int>(trees.size() / static_cast<std::size_t>(config.num_classes));
}

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      p(i, k) = std::exp(z[k] - top);
      sum += p(i, k);
    }
    for (std::size_t k = 0; k < z.size(); ++k) p(i, k) /= sum;
  }
  return p;
}

GradHess softmax_grad_hess(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() != labels.size()) throw DimensionError("logits and labels disagree in length");
  GradHess out{softmax(logits), Matrix(logits.rows(), logits.cols())};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    for (std::size_t k = 0; k < logits.cols(); ++k) {
      const double p = out.grad(i, k);
      out.hess(i, k) = p * (1.0 - p);
      if (static_cast<std::size_t>(labels[i]) == k) out.grad(i, k) = p - 1.0;
    }
  }
  return out;
}

double log_loss(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() != labels.size()) throw DimensionError("logits and labels disagree in length");
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    total += top + std::log(sum) - z[static_cast<std::size_t>(labels[i])];
  }
  return total / static_cast<double>(labels.size());
}

double leaf_weight(double g, double h, double lambda) {
  const double denom = h + lambda;
  if (denom == 0.0) return 0.0;
  return -g / denom;
}

namespace {

double score(double g, double h, double lambda) {
  const double denom = h + lambda;
  return denom > 0.0 ? g * g / denom : 0.0;
}

}  // namespace

double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  return 0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) -
                score(gl + gr, hl + hr, lambda)) -
         gamma;
}

SortedColumns::SortedColumns(const Matrix& x)
    : rows_(x.rows()), cols_(x.cols()), order_(x.rows() * x.cols()), values_(x.rows() * x.cols()) {
  std::vector<std::uint32_t> idx(rows_);
  for (std::size_t f = 0; f < cols_; ++f) {
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    for (std::size_t i = 0; i < rows_; ++i) {
      order_[f * rows_ + i] = idx[i];
      values_[f * rows_ + i] = x(idx[i], f);
    }
  }
}

namespace {

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  double gl = 0.0;
  double hl = 0.0;
};

struct ScanState {
  double gl = 0.0;
  double hl = 0.0;
  double last = 0.0;
  bool seen = false;
};

double midpoint(double lo, double hi) {
  const double mid = lo + 0.5 * (hi - lo);
  return mid < hi ? mid : lo;
}

}  // namespace

RegressionTree build_tree(const Matrix& x, const SortedColumns& sorted,
                          std::span<const double> grad, std::span<const double> hess,
                          std::span<const char> in_sample, std::span<const std::size_t> features,
                          const GbdtConfig& config) {
  const std::size_t n = x.rows();
  if (grad.size() != n || hess.size() != n || in_sample.size() != n) {
    throw DimensionError("gradient statistics do not match the row count");
  }
  if (sorted.rows() != n || sorted.cols() != x.cols()) {
    throw DimensionError("sorted columns built for a different matrix");
  }
  const double lambda = config.lambda_l2;

  std::vector<TreeNode> nodes(1);
  std::vector<double> node_g(1, 0.0), node_h(1, 0.0);
  std::vector<int> node_of(n, -1);
  for (std::size_t r = 0; r < n; ++r) {
    if (!in_sample[r]) continue;
    node_of[r] = 0;
    node_g[0] += grad[r];
    node_h[0] += hess[r];
  }

  struct RowStat {
    double g;
    double h;
    int slot;
  };
  std::vector<RowStat> row_stat(n);
  for (std::size_t r = 0; r < n; ++r) row_stat[r] = {grad[r], hess[r], -1};

  std::vector<int> frontier{0};
  for (int depth = 0; depth < config.max_depth && !frontier.empty(); ++depth) {
    std::vector<int> slot_of(nodes.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) slot_of[frontier[s]] = static_cast<int>(s);
    for (std::size_t r = 0; r < n; ++r) {
      row_stat[r].slot = node_of[r] < 0 ? -1 : slot_of[static_cast<std::size_t>(node_of[r])];
    }
    // Within one node the parent term and gamma are constant, so candidates
    // are ranked by the child scores alone.
    std::vector<double> parent_score(frontier.size());
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      parent_score[s] = score(node_g[frontier[s]], node_h[frontier[s]], lambda);
    }
    std::vector<Candidate> best(frontier.size());
    std::vector<double> best_children(frontier.size());
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      best_children[s] = parent_score[s] + 2.0 * config.gamma_min_gain;
    }
    std::vector<ScanState> scan(frontier.size());

    for (std::size_t f : features) {
      std::fill(scan.begin(), scan.end(), ScanState{});
      auto order = sorted.order(f);
      auto values = sorted.values(f);
      for (std::size_t i = 0; i < n; ++i) {
        const RowStat& rs = row_stat[order[i]];
        if (rs.slot < 0) continue;
        const auto s = static_cast<std::size_t>(rs.slot);
        ScanState& st = scan[s];
        const double v = values[i];
        if (st.seen && v > st.last) {
          const int node = frontier[s];
          const double hr = node_h[node] - st.hl;
          if (st.hl >= config.min_child_hessian && hr >= config.min_child_hessian) {
            const double children = score(st.gl, st.hl, lambda) + score(node_g[node] - st.gl, hr, lambda);
            if (children > best_children[s]) {
              best_children[s] = children;
              best[s] = {0.0, static_cast<int>(f), midpoint(st.last, v), st.gl, st.hl};
            }
          }
        }
        st.gl += rs.g;
        st.hl += rs.h;
        st.last = v;
        st.seen = true;
      }
    }
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      if (best[s].feature < 0) continue;
      const int node = frontier[s];
      best[s].gain = split_gain(best[s].gl, best[s].hl, node_g[node] - best[s].gl,
                                node_h[node] - best[s].hl, lambda, config.gamma_min_gain);
      if (!(best[s].gain > 0.0)) best[s].feature = -1;
    }

    std::vector<int> next;
    for (std::size_t s = 0; s < frontier.size(); ++s) {
      const Candidate& b = best[s];
      if (b.feature < 0) continue;
      const int parent = frontier[s];
      const int left = static_cast<int>(nodes.size());
      nodes.push_back({});
      nodes.push_back({});
      node_g.push_back(b.gl);
      node_h.push_back(b.hl);
      node_g.push_back(node_g[parent] - b.gl);
      node_h.push_back(node_h[parent] - b.hl);
      TreeNode& p = nodes[static_cast<std::size_t>(parent)];
      p.feature = b.feature;
      p.threshold = b.threshold;
      p.left = left;
      p.right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    if (next.empty()) break;
    for (std::size_t r = 0; r < n; ++r) {
      const int node = node_of[r];
      if (node < 0) continue;
      const TreeNode& p = nodes[static_cast<std::size_t>(node)];
      if (p.is_leaf()) continue;
      node_of[r] = x(r, static_cast<std::size_t>(p.feature)) <= p.threshold ? p.left : p.right;
    }
    frontier = std::move(next);
  }

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) {
      nodes[i].weight = leaf_weight(node_g[i], node_h[i], lambda) * config.learning_rate;
    }
  }
  return RegressionTree(std::move(nodes));
}

RegressionTree build_tree(const Matrix& x, std::span<const double> grad,
                          std::span<const double> hess, const GbdtConfig& config) {
  const SortedColumns sorted(x);
  const std::vector<char> all(x.rows(), 1);
  std::vector<std::size_t> features(x.cols());
  std::iota(features.begin(), features.end(), std::size_t{0});
  return build_tree(x, sorted, grad, hess, all, features, config);
}

GbdtModel fit(const LabeledDataset& data, const GbdtConfig& config,
              const RoundCallback& on_round) {
  config.validate();
  data.validate(config.num_classes);
  const std::size_t n = data.size();
  const std::size_t d = data.features.cols();
  const std::size_t classes = static_cast<std::size_t>(config.num_classes);

  std::vector<std::size_t> per_class(classes, 0);
  for (int y : data.labels) ++per_class[static_cast<std::size_t>(y)];
  std::string missing;
  for (std::size_t k = 0; k < classes; ++k) {
    if (per_class[k] == 0) missing += (missing.empty() ? "" : ", ") + std::to_string(k);
  }
  if (!missing.empty()) throw MissingClassError("training data lacks class(es) " + missing);
  if (d == 0) throw DimensionError("training data has no features");

  GbdtModel model;
  model.config = config;
  model.feature_dim = d;
  model.trees.reserve(static_cast<std::size_t>(config.num_rounds) * classes);

  const SortedColumns sorted(data.features);
  Matrix logits(n, classes, model.base_score);
  Rng rng(config.seed);

  const std::size_t rows_drawn =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.subsample * n)));
  const std::size_t cols_drawn =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.colsample * d)));
  std::vector<std::size_t> row_pool(n), col_pool(d);
  std::vector<char> in_sample(n, 1);
  std::vector<double> g(n), h(n);

  for (int round = 0; round < config.num_rounds; ++round) {
    const GradHess gh = softmax_grad_hess(logits, data.labels);
    if (rows_drawn < n) {
      std::iota(row_pool.begin(), row_pool.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(row_pool));
      std::fill(in_sample.begin(), in_sample.end(), 0);
      for (std::size_t i = 0; i < rows_drawn; ++i) in_sample[row_pool[i]] = 1;
    }
    for (std::size_t k = 0; k < classes; ++k) {
      std::iota(col_pool.begin(), col_pool.end(), std::size_t{0});
      if (cols_drawn < d) {
        rng.shuffle(std::span<std::size_t>(col_pool));
        std::sort(col_pool.begin(), col_pool.begin() + static_cast<std::ptrdiff_t>(cols_drawn));
      }
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = gh.grad(i, k);
        h[i] = gh.hess(i, k);
      }
      RegressionTree tree =
          build_tree(data.features, sorted, g, h, in_sample,
                     std::span<const std::size_t>(col_pool.data(), cols_drawn), config);
      for (std::size_t i = 0; i < n; ++i) logits(i, k) += tree.predict(data.features.row(i));
      model.trees.push_back(std::move(tree));
    }
    if (on_round) on_round(round, logits);
  }
  return model;
}

Matrix predict_logits(const GbdtModel& model, const Matrix& features) {
  if (features.cols() != model.feature_dim) {
    throw DimensionError("model expects " + std::to_string(model.feature_dim) +
                         " features, got " + std::to_string(features.cols()));
  }
  const std::size_t classes = static_cast<std::size_t>(model.config.num_classes);
  Matrix logits(features.rows(), classes, model.base_score);
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const std::size_t k = t % classes;
    for (std::size_t i = 0; i < features.rows(); ++i) {
      logits(i, k) += model.trees[t].predict(features.row(i));
    }
  }
  return logits;
}

int argmax(std::span<const double> row) {
  int best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

Prediction predict(const GbdtModel& model, const Matrix& features) {
  const Matrix logits = predict_logits(model, features);
  Prediction out{std::vector<int>(features.rows()), softmax(logits)};
  for (std::size_t i = 0; i < features.rows(); ++i) out.classes[i] = argmax(logits.row(i));
  return out;
}

namespace {

json config_to_json(const GbdtConfig& c) {
  return {{"num_rounds", c.num_rounds},
          {"max_depth", c.max_depth},
          {"learning_rate", c.learning_rate},
          {"lambda_l2", c.lambda_l2},
          {"gamma_min_gain", c.gamma_min_gain},
          {"min_child_hessian", c.min_child_hessian},
          {"subsample", c.subsample},
          {"colsample", c.colsample},
          {"num_classes", c.num_classes},
          {"seed", c.seed}};
}

GbdtConfig config_from_json(const json& j) {
  GbdtConfig c;
  c.num_rounds = j.at("num_rounds").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lambda_l2 = j.at("lambda_l2").get<double>();
  c.gamma_min_gain = j.at("gamma_min_gain").get<double>();
  c.min_child_hessian = j.at("min_child_hessian").get<double>();
  c.subsample = j.at("subsample").get<double>();
  c.colsample = j.at("colsample").get<double>();
  c.num_classes = j.at("num_classes").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string model_to_json(const GbdtModel& model) {
  json trees = json::array();
  for (const RegressionTree& tree : model.trees) {
    json nodes = json::array();
    for (const TreeNode& node : tree.nodes()) {
      if (node.is_leaf()) {
        nodes.push_back({{"leaf", node.weight}});
      } else {
        nodes.push_back({{"feature", node.feature},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  json j = {{"format", kModelFormat},
            {"version", kModelFormatVersion},
            {"feature_dim", model.feature_dim},
            {"base_score", model.base_score},
            {"config", config_to_json(model.config)},
            {"trees", std::move(trees)}};
  return j.dump(1);
}

GbdtModel model_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kModelFormat) throw DataError("not a GBDT model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model format version " + std::to_string(version));
    }
    GbdtModel model;
    model.feature_dim = j.at("feature_dim").get<std::size_t>();
    model.base_score = j.at("base_score").get<double>();
    model.config = config_from_json(j.at("config"));
    model.config.validate();
    for (const json& jt : j.at("trees")) {
      std::vector<TreeNode> nodes;
      for (const json& jn : jt) {
        TreeNode node;
        if (jn.contains("leaf")) {
          node.weight = jn.at("leaf").get<double>();
        } else {
          node.feature = jn.at("feature").get<int>();
          node.threshold = jn.at("threshold").get<double>();
          node.left = jn.at("left").get<int>();
          node.right = jn.at("right").get<int>();
          if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= model.feature_dim) {
            throw DataError("tree node feature index out of range");
          }
        }
        nodes.push_back(node);
      }
      model.trees.emplace_back(std::move(nodes));
    }
    if (model.trees.size() % static_cast<std::size_t>(model.config.num_classes) != 0) {
      throw DataError("tree count is not a multiple of the class count");
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model JSON: ") + e.what());
  } catch (const InvariantError& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const GbdtModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << model_to_json(model) << '\n';
  if (!out) throw DataError("failed writing model file " + path.string());
}

GbdtModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace sermm
