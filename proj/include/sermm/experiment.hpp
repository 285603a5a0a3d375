#pragma once

// Uni-, bi- and tri-modal early-fusion scenarios evaluated by k-fold
// cross-validation with pooled accuracy and confusion matrices.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sermm/ema.hpp"
#include "sermm/emotion.hpp"
#include "sermm/functionals.hpp"
#include "sermm/gbdt.hpp"

namespace sermm {

struct Scenario {
  /// Canonical order, no duplicates.
  std::vector<Modality> modalities;
  std::string label;

  /// Sorts into canonical order, validates and derives the label
  /// ("speech+articulatory").
  static Scenario of(std::vector<Modality> modalities);
  /// Parses a label such as "speech+egg+ema" or "speech+excitation_est".
  static Scenario parse(std::string_view text);

  std::size_t arity() const noexcept { return modalities.size(); }
  void validate() const;
  bool operator==(const Scenario&) const = default;
};

/// The seven rows of the comparison table: 3 uni-, 3 bi- and 1 tri-modal.
/// With `estimated` the excitation and articulatory inputs are the
/// estimated variants.
std::vector<Scenario> standard_scenarios(bool estimated = false);

/// Concatenation in canonical order. All inputs must share one utterance id
/// and carry distinct modalities.
FeatureVector fuse(std::span<const FeatureVector> vectors);

enum class FoldStrategy { StratifiedRandom, SpeakerIndependent };

std::string_view to_string(FoldStrategy s);
std::optional<FoldStrategy> parse_fold_strategy(std::string_view text);

struct FoldAssignment {
  std::vector<int> fold_of_sample;
  int k = 0;
  std::uint64_t seed = 0;
  FoldStrategy strategy = FoldStrategy::StratifiedRandom;

  std::vector<std::size_t> fold_sizes() const;
  /// Hex digest of k, strategy and the assignment itself.
  std::string digest() const;
};

/// StratifiedRandom shuffles each class and deals round-robin with one
/// counter running across classes. SpeakerIndependent assigns whole groups,
/// largest first, to the currently smallest fold.
FoldAssignment make_folds(std::span<const int> labels, std::span<const std::string> groups, int k,
                          std::uint64_t seed, FoldStrategy strategy,
                          int num_classes = kEmotionCount);
FoldAssignment make_folds(const LabeledDataset& data, int k, std::uint64_t seed,
                          FoldStrategy strategy, int num_classes = kEmotionCount);

/// Rows are true classes, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes = kEmotionCount);

  void add(int truth, int predicted);
  std::int64_t at(int truth, int predicted) const;
  int classes() const noexcept { return classes_; }
  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t row_sum(int truth) const;
  double accuracy() const;
  /// Row-normalized percentages; all-zero rows stay zero.
  std::vector<std::vector<double>> row_percentages() const;
  std::vector<double> per_class_accuracy() const;
  std::vector<std::string> class_names() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_;
  std::vector<std::int64_t> counts_;
};

struct UtteranceFeatures {
  std::string utterance_id;
  std::string speaker_id;
  int label = 0;
  std::map<Modality, FeatureVector> features;
};

/// Per-utterance feature vectors keyed by modality, in insertion order.
class FeatureStore {
 public:
  void add_utterance(std::string utterance_id, std::string speaker_id, int label);
  /// The vector's utterance id must already be registered.
  void put(FeatureVector v);

  const std::vector<UtteranceFeatures>& utterances() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  const UtteranceFeatures& find(const std::string& utterance_id) const;
  bool contains(const std::string& utterance_id) const;

  /// (utterance id, modality) pairs absent from the store.
  std::vector<std::pair<std::string, Modality>> missing(std::span<const Modality> required) const;
  /// Copy without any utterance lacking one of `required`.
  FeatureStore complete_subset(std::span<const Modality> required) const;

  std::vector<int> labels() const;
  std::vector<std::string> speakers() const;

  /// Fused rows for the scenario; throws DataError listing absent modalities.
  LabeledDataset dataset(const Scenario& scenario) const;

 private:
  std::vector<UtteranceFeatures> items_;
  std::map<std::string, std::size_t> index_;
};

struct ScenarioReport {
  Scenario scenario;
  /// Pooled: correct over all held-out predictions.
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<double> fold_accuracies;
  GbdtConfig config;
  int folds = 0;
  std::uint64_t fold_seed = 0;
  FoldStrategy fold_strategy = FoldStrategy::StratifiedRandom;
  std::string fold_digest;
  std::vector<std::string> utterance_ids;
  std::vector<int> truth;
  std::vector<int> predicted;
};

/// Raw trajectories keyed by utterance id, for fold-local speaker medians.
struct EmaSources {
  std::map<std::string, EmaRecording> articulatory;
  std::map<std::string, EmaRecording> estimated;
};

struct RunOptions {
  /// 0 picks the hardware concurrency.
  unsigned threads = 0;
  /// When set, articulatory features are recomputed per fold with speaker
  /// medians pooled over that fold's training utterances only. A speaker
  /// absent from the training folds falls back to its own held-out
  /// recordings (medians never see labels).
  const EmaSources* leakage_safe = nullptr;
};

/// Trains on k-1 folds and predicts the held-out fold, for every fold.
ScenarioReport run_scenario(const FeatureStore& store, const Scenario& scenario,
                            const FoldAssignment& folds, const GbdtConfig& config,
                            const RunOptions& options = {});

std::vector<ScenarioReport> run_matrix(const FeatureStore& store,
                                       std::span<const Scenario> scenarios,
                                       const FoldAssignment& folds, const GbdtConfig& config,
                                       const RunOptions& options = {});

struct ComparisonRow {
  std::string label;
  std::size_t arity = 0;
  /// Percent.
  double accuracy = 0.0;
  bool best_of_arity = false;
  /// Pooled counts behind `accuracy`; total is 0 when the report had none.
  std::int64_t correct = 0;
  std::int64_t total = 0;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  /// delta[i][j] = accuracy[i] - accuracy[j] in percentage points, taken
  /// from the integer counts so each entry is a single rounding of the
  /// exact difference.
  std::vector<std::vector<double>> delta;

  /// Row index of the best scenario with the given arity, if any.
  std::optional<std::size_t> best(std::size_t arity) const;
  /// Best of arity a minus best of arity b.
  double best_delta(std::size_t a, std::size_t b) const;
};

/// Reports must share the fold assignment and classifier config.
ComparisonTable compare_scenarios(std::span<const ScenarioReport> reports);

}  // namespace sermm
