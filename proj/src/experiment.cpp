#include "sermm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "sermm/rng.hpp"

namespace sermm {

Scenario Scenario::of(std::vector<Modality> modalities) {
  std::stable_sort(modalities.begin(), modalities.end(), [](Modality a, Modality b) {
    return canonical_slot(a) < canonical_slot(b);
  });
  Scenario s{std::move(modalities), {}};
  s.validate();
  for (Modality m : s.modalities) {
    if (!s.label.empty()) s.label += '+';
    s.label += to_string(m);
  }
  return s;
}

Scenario Scenario::parse(std::string_view text) {
  std::vector<Modality> mods;
  while (!text.empty()) {
    const auto plus = text.find('+');
    const std::string_view part = text.substr(0, plus);
    const auto m = parse_modality(part);
    if (!m) throw ParameterError("unknown modality '" + std::string(part) + "' in scenario");
    mods.push_back(*m);
    if (plus == std::string_view::npos) break;
    text.remove_prefix(plus + 1);
  }
  return of(std::move(mods));
}

void Scenario::validate() const {
  if (modalities.empty()) throw ParameterError("scenario needs at least one modality");
  std::set<int> slots;
  for (Modality m : modalities) {
    if (!slots.insert(canonical_slot(m)).second) {
      throw ParameterError("scenario repeats modality kind '" + std::string(to_string(m)) + "'");
    }
  }
}

std::vector<Scenario> standard_scenarios(bool estimated) {
  const Modality s = Modality::Speech;
  const Modality e = estimated ? Modality::ExcitationEstimated : Modality::Excitation;
  const Modality a = estimated ? Modality::ArticulatoryEstimated : Modality::Articulatory;
  return {Scenario::of({s}),       Scenario::of({e}),    Scenario::of({a}),
          Scenario::of({s, e}),    Scenario::of({s, a}), Scenario::of({e, a}),
          Scenario::of({s, e, a})};
}

FeatureVector fuse(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) throw ParameterError("nothing to fuse");
  const std::string& id = vectors.front().utterance_id();
  std::set<int> slots;
  for (const FeatureVector& v : vectors) {
    if (v.utterance_id() != id) {
      throw ContextError("cannot fuse utterances '" + id + "' and '" + v.utterance_id() + "'");
    }
    for (Modality m : v.modalities()) {
      if (!slots.insert(canonical_slot(m)).second) {
        throw ParameterError("duplicate modality '" + std::string(to_string(m)) + "' in fusion");
      }
    }
  }
  if (vectors.size() == 1) return vectors.front();

  std::vector<const FeatureVector*> ordered;
  for (const FeatureVector& v : vectors) ordered.push_back(&v);
  std::stable_sort(ordered.begin(), ordered.end(), [](const FeatureVector* a, const FeatureVector* b) {
    return canonical_slot(a->modalities().front()) < canonical_slot(b->modalities().front());
  });

  std::vector<double> values;
  std::vector<std::string> names;
  std::vector<Modality> mods;
  for (const FeatureVector* v : ordered) {
    const bool prefixed = v->modalities().size() > 1;
    values.insert(values.end(), v->values().begin(), v->values().end());
    for (const std::string& n : v->names()) {
      names.push_back(prefixed ? n : std::string(to_string(v->modality())) + "/" + n);
    }
    mods.insert(mods.end(), v->modalities().begin(), v->modalities().end());
  }
  return FeatureVector(std::move(values), std::move(names), std::move(mods), id);
}

std::string_view to_string(FoldStrategy s) {
  return s == FoldStrategy::StratifiedRandom ? "stratified" : "speaker";
}

std::optional<FoldStrategy> parse_fold_strategy(std::string_view text) {
  if (text == "stratified" || text == "stratified-random") return FoldStrategy::StratifiedRandom;
  if (text == "speaker" || text == "speaker-independent") return FoldStrategy::SpeakerIndependent;
  return std::nullopt;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int f : fold_of_sample) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

std::string FoldAssignment::digest() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(k));
  mix(static_cast<std::uint64_t>(strategy));
  mix(fold_of_sample.size());
  for (int f : fold_of_sample) mix(static_cast<std::uint64_t>(f));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

FoldAssignment make_folds(std::span<const int> labels, std::span<const std::string> groups, int k,
                          std::uint64_t seed, FoldStrategy strategy, int num_classes) {
  if (k < 2) throw ParameterError("need at least 2 folds");
  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  out.strategy = strategy;
  out.fold_of_sample.assign(labels.size(), -1);
  Rng rng(seed);

  if (strategy == FoldStrategy::StratifiedRandom) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= num_classes) throw DataError("label out of range");
      by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      if (by_class[c].size() < static_cast<std::size_t>(k)) {
        throw DataError("class " + std::to_string(c) + " has " +
                        std::to_string(by_class[c].size()) + " samples, fewer than " +
                        std::to_string(k) + " folds");
      }
    }
    std::size_t counter = 0;
    for (auto& members : by_class) {
      rng.shuffle(std::span<std::size_t>(members));
      for (std::size_t i : members) {
        out.fold_of_sample[i] = static_cast<int>(counter % static_cast<std::size_t>(k));
        ++counter;
      }
    }
    return out;
  }

  if (groups.size() != labels.size()) {
    throw DataError("speaker-independent folds need a speaker id for every sample");
  }
  std::map<std::string, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < groups.size(); ++i) by_group[groups[i]].push_back(i);
  if (by_group.size() < static_cast<std::size_t>(k)) {
    throw DataError(std::to_string(by_group.size()) + " speakers cannot fill " +
                    std::to_string(k) + " speaker-independent folds");
  }
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [name, members] : by_group) order.push_back(&members);
  rng.shuffle(std::span<const std::vector<std::size_t>*>(order));
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return a->size() > b->size();
  });
  std::vector<std::size_t> load(static_cast<std::size_t>(k), 0);
  for (const auto* members : order) {
    const auto f = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    for (std::size_t i : *members) out.fold_of_sample[i] = static_cast<int>(f);
    load[f] += members->size();
  }
  return out;
}

FoldAssignment make_folds(const LabeledDataset& data, int k, std::uint64_t seed,
                          FoldStrategy strategy, int num_classes) {
  return make_folds(data.labels, data.groups, k, seed, strategy, num_classes);
}

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes), counts_(static_cast<std::size_t>(classes * classes), 0) {
  if (classes < 1) throw ParameterError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
    throw ParameterError("class id outside the confusion matrix");
  }
  ++counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
}

std::int64_t ConfusionMatrix::at(int truth, int predicted) const {
  return counts_.at(static_cast<std::size_t>(truth * classes_ + predicted));
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int k = 0; k < classes_; ++k) t += at(k, k);
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int truth) const {
  std::int64_t s = 0;
  for (int k = 0; k < classes_; ++k) s += at(truth, k);
  return s;
}

double ConfusionMatrix::accuracy() const {
  const std::int64_t n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

std::vector<std::vector<double>> ConfusionMatrix::row_percentages() const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(classes_),
                                       std::vector<double>(static_cast<std::size_t>(classes_), 0.0));
  for (int t = 0; t < classes_; ++t) {
    const std::int64_t n = row_sum(t);
    if (n == 0) continue;
    for (int p = 0; p < classes_; ++p) {
      out[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] =
          100.0 * static_cast<double>(at(t, p)) / static_cast<double>(n);
    }
  }
  return out;
}

std::vector<double> ConfusionMatrix::per_class_accuracy() const {
  std::vector<double> out(static_cast<std::size_t>(classes_), 0.0);
  for (int t = 0; t < classes_; ++t) {
    const std::int64_t n = row_sum(t);
    if (n > 0) out[static_cast<std::size_t>(t)] = static_cast<double>(at(t, t)) / static_cast<double>(n);
  }
  return out;
}

std::vector<std::string> ConfusionMatrix::class_names() const {
  std::vector<std::string> out;
  for (int k = 0; k < classes_; ++k) {
    out.push_back(classes_ == kEmotionCount ? std::string(kEmotionNames[static_cast<std::size_t>(k)])
                                            : "class" + std::to_string(k));
  }
  return out;
}

void FeatureStore::add_utterance(std::string utterance_id, std::string speaker_id, int label) {
  if (index_.contains(utterance_id)) {
    throw DataError("utterance '" + utterance_id + "' registered twice");
  }
  index_.emplace(utterance_id, items_.size());
  items_.push_back({std::move(utterance_id), std::move(speaker_id), label, {}});
}

void FeatureStore::put(FeatureVector v) {
  const auto it = index_.find(v.utterance_id());
  if (it == index_.end()) throw DataError("unknown utterance '" + v.utterance_id() + "'");
  if (v.modalities().size() != 1) throw ParameterError("store takes single-modality vectors");
  const Modality m = v.modality();
  if (v.dim() != modality_dim(m)) {
    throw DimensionError(std::string(to_string(m)) + " vector has dim " + std::to_string(v.dim()) +
                         ", expected " + std::to_string(modality_dim(m)));
  }
  items_[it->second].features.insert_or_assign(m, std::move(v));
}

const UtteranceFeatures& FeatureStore::find(const std::string& utterance_id) const {
  const auto it = index_.find(utterance_id);
  if (it == index_.end()) throw DataError("unknown utterance '" + utterance_id + "'");
  return items_[it->second];
}

bool FeatureStore::contains(const std::string& utterance_id) const {
  return index_.contains(utterance_id);
}

std::vector<std::pair<std::string, Modality>> FeatureStore::missing(
    std::span<const Modality> required) const {
  std::vector<std::pair<std::string, Modality>> out;
  for (const UtteranceFeatures& u : items_) {
    for (Modality m : required) {
      if (!u.features.contains(m)) out.emplace_back(u.utterance_id, m);
    }
  }
  return out;
}

FeatureStore FeatureStore::complete_subset(std::span<const Modality> required) const {
  FeatureStore out;
  for (const UtteranceFeatures& u : items_) {
    const bool complete = std::all_of(required.begin(), required.end(),
                                      [&](Modality m) { return u.features.contains(m); });
    if (!complete) continue;
    out.index_.emplace(u.utterance_id, out.items_.size());
    out.items_.push_back(u);
  }
  return out;
}

std::vector<int> FeatureStore::labels() const {
  std::vector<int> out;
  for (const UtteranceFeatures& u : items_) out.push_back(u.label);
  return out;
}

std::vector<std::string> FeatureStore::speakers() const {
  std::vector<std::string> out;
  for (const UtteranceFeatures& u : items_) out.push_back(u.speaker_id);
  return out;
}

LabeledDataset FeatureStore::dataset(const Scenario& scenario) const {
  scenario.validate();
  const auto absent = missing(scenario.modalities);
  if (!absent.empty()) {
    std::string msg = std::to_string(absent.size()) + " missing modality record(s) for scenario " +
                      scenario.label + ":";
    for (std::size_t i = 0; i < absent.size() && i < 10; ++i) {
      msg += " " + absent[i].first + "/" + std::string(to_string(absent[i].second));
    }
    if (absent.size() > 10) msg += " ...";
    throw DataError(msg);
  }
  std::size_t dim = 0;
  for (Modality m : scenario.modalities) dim += modality_dim(m);
  LabeledDataset out;
  out.features = Matrix(items_.size(), dim);
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto row = out.features.row(i);
    std::size_t at = 0;
    for (Modality m : scenario.modalities) {
      const auto values = items_[i].features.at(m).values();
      std::copy(values.begin(), values.end(), row.begin() + static_cast<std::ptrdiff_t>(at));
      at += values.size();
    }
    out.labels.push_back(items_[i].label);
    out.groups.push_back(items_[i].speaker_id);
  }
  return out;
}

namespace {

std::uint64_t fold_model_seed(std::uint64_t base, int fold) {
  return base ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(fold + 1));
}

// Overwrites the articulatory block of every row with vectors built from
// medians of the training rows.
void apply_fold_medians(Matrix& x, const Scenario& scenario, const FeatureStore& store,
                        const std::vector<int>& fold_of, int fold, const EmaSources& sources) {
  std::size_t offset = 0;
  for (Modality m : scenario.modalities) {
    if (canonical_slot(m) != 2) {
      offset += modality_dim(m);
      continue;
    }
    const auto& recs = m == Modality::Articulatory ? sources.articulatory : sources.estimated;
    const auto& items = store.utterances();
    auto recording = [&](std::size_t i) -> const EmaRecording& {
      const auto it = recs.find(items[i].utterance_id);
      if (it == recs.end()) {
        throw DataError("no EMA recording for utterance '" + items[i].utterance_id + "'");
      }
      return it->second;
    };
    std::map<std::string, std::vector<const EmaRecording*>> train, held;
    for (std::size_t i = 0; i < items.size(); ++i) {
      (fold_of[i] == fold ? held : train)[items[i].speaker_id].push_back(&recording(i));
    }
    std::map<std::string, SpeakerMedians> medians;
    for (const auto& [speaker, list] : train) medians.emplace(speaker, compute_speaker_medians(list));
    for (const auto& [speaker, list] : held) {
      if (!medians.contains(speaker)) medians.emplace(speaker, compute_speaker_medians(list));
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      const FeatureVector v = ema_vector(recording(i), medians.at(items[i].speaker_id), m);
      std::copy(v.values().begin(), v.values().end(),
                x.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += modality_dim(m);
  }
}

Matrix select_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

ScenarioReport run_scenario(const FeatureStore& store, const Scenario& scenario,
                            const FoldAssignment& folds, const GbdtConfig& config,
                            const RunOptions& options) {
  config.validate();
  const LabeledDataset data = store.dataset(scenario);
  if (folds.fold_of_sample.size() != data.size()) {
    throw DimensionError("fold assignment covers " + std::to_string(folds.fold_of_sample.size()) +
                         " samples, store has " + std::to_string(data.size()));
  }

  struct FoldResult {
    std::vector<std::size_t> rows;
    std::vector<int> predicted;
  };
  const int k = folds.k;
  std::vector<FoldResult> results(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int f = folds.fold_of_sample[i];
    if (f < 0 || f >= k) throw InvariantError("sample without a valid fold");
    results[static_cast<std::size_t>(f)].rows.push_back(i);
  }

  auto run_fold = [&](int f) {
    FoldResult& res = results[static_cast<std::size_t>(f)];
    if (res.rows.empty()) return;
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (folds.fold_of_sample[i] != f) train.push_back(i);
    }
    const Matrix* x = &data.features;
    Matrix local;
    if (options.leakage_safe) {
      local = data.features;
      apply_fold_medians(local, scenario, store, folds.fold_of_sample, f, *options.leakage_safe);
      x = &local;
    }
    LabeledDataset fold_data;
    fold_data.features = select_rows(*x, train);
    for (std::size_t i : train) fold_data.labels.push_back(data.labels[i]);
    GbdtConfig fold_config = config;
    fold_config.seed = fold_model_seed(config.seed, f);
    const GbdtModel model = fit(fold_data, fold_config);
    res.predicted = predict(model, select_rows(*x, res.rows)).classes;
  };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(k));
  if (threads == 1) {
    for (int f = 0; f < k; ++f) run_fold(f);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int f = next++; f < k; f = next++) {
          try {
            run_fold(f);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (std::thread& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  ScenarioReport report;
  report.scenario = scenario;
  report.confusion = ConfusionMatrix(config.num_classes);
  report.config = config;
  report.folds = k;
  report.fold_seed = folds.seed;
  report.fold_strategy = folds.strategy;
  report.fold_digest = folds.digest();
  const auto& utterances = store.utterances();
  for (const FoldResult& res : results) {
    std::int64_t correct = 0;
    for (std::size_t j = 0; j < res.rows.size(); ++j) {
      const std::size_t i = res.rows[j];
      report.confusion.add(data.labels[i], res.predicted[j]);
      correct += data.labels[i] == res.predicted[j];
      report.utterance_ids.push_back(utterances[i].utterance_id);
      report.truth.push_back(data.labels[i]);
      report.predicted.push_back(res.predicted[j]);
    }
    report.fold_accuracies.push_back(
        res.rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(res.rows.size()));
  }
  if (report.confusion.total() != static_cast<std::int64_t>(data.size())) {
    throw InvariantError("not every utterance was tested exactly once");
  }
  report.accuracy = report.confusion.accuracy();
  return report;
}

std::vector<ScenarioReport> run_matrix(const FeatureStore& store,
                                       std::span<const Scenario> scenarios,
                                       const FoldAssignment& folds, const GbdtConfig& config,
                                       const RunOptions& options) {
  std::vector<ScenarioReport> out;
  for (const Scenario& s : scenarios) out.push_back(run_scenario(store, s, folds, config, options));
  return out;
}

std::optional<std::size_t> ComparisonTable::best(std::size_t arity) const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].arity == arity && rows[i].best_of_arity) return i;
  }
  return std::nullopt;
}

double ComparisonTable::best_delta(std::size_t a, std::size_t b) const {
  const auto ia = best(a);
  const auto ib = best(b);
  if (!ia || !ib) throw ParameterError("comparison table lacks a scenario of the requested arity");
  return delta[*ia][*ib];
}

namespace {

// num / den with one rounding when both fit in a double's mantissa.
double exact_ratio(__int128 num, __int128 den) {
  const __int128 g = [&] {
    __int128 a = num < 0 ? -num : num, b = den;
    while (b != 0) {
      const __int128 t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? __int128{1} : a;
  }();
  return static_cast<double>(num / g) / static_cast<double>(den / g);
}

}  // namespace

ComparisonTable compare_scenarios(std::span<const ScenarioReport> reports) {
  if (reports.empty()) throw ParameterError("nothing to compare");
  const ScenarioReport& ref = reports.front();
  for (const ScenarioReport& r : reports) {
    if (r.fold_seed != ref.fold_seed || r.fold_digest != ref.fold_digest || r.folds != ref.folds ||
        r.fold_strategy != ref.fold_strategy) {
      throw ContextError("scenario '" + r.scenario.label + "' used different folds than '" +
                         ref.scenario.label + "'");
    }
    if (!(r.config == ref.config)) {
      throw ContextError("scenario '" + r.scenario.label + "' used a different classifier config");
    }
  }
  ComparisonTable table;
  for (const ScenarioReport& r : reports) {
    ComparisonRow row{r.scenario.label, r.scenario.arity(), 100.0 * r.accuracy, false,
                      r.confusion.trace(), r.confusion.total()};
    if (row.total > 0) {
      row.accuracy = static_cast<double>(100 * row.correct) / static_cast<double>(row.total);
    }
    table.rows.push_back(std::move(row));
  }
  std::map<std::size_t, std::size_t> best;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto it = best.find(table.rows[i].arity);
    if (it == best.end() || table.rows[i].accuracy > table.rows[it->second].accuracy) {
      best[table.rows[i].arity] = i;
    }
  }
  for (const auto& [arity, i] : best) table.rows[i].best_of_arity = true;
  const std::size_t n = table.rows.size();
  table.delta.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const ComparisonRow& a = table.rows[i];
      const ComparisonRow& b = table.rows[j];
      if (a.total > 0 && b.total > 0) {
        const __int128 num =
            static_cast<__int128>(100) * (static_cast<__int128>(a.correct) * b.total -
                                          static_cast<__int128>(b.correct) * a.total);
        const __int128 den = static_cast<__int128>(a.total) * b.total;
        table.delta[i][j] = exact_ratio(num, den);
      } else {
        table.delta[i][j] = a.accuracy - b.accuracy;
      }
    }
  }
  return table;
}

}  // namespace sermm
