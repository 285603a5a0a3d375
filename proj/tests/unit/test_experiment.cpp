#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "sermm/errors.hpp"
#include "sermm/experiment.hpp"
#include "test_support.hpp"

using namespace sermm;

namespace {

FeatureVector vec(Modality m, const std::string& id, double fill = 0.0) {
  const std::size_t d = modality_dim(m);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < d; ++i) names.push_back("f" + std::to_string(i));
  return FeatureVector(std::vector<double>(d, fill), names, {m}, id);
}

std::string uid(std::size_t i) { return "u" + std::to_string(i); }

// Speech vectors whose first column is a noisy copy of the label (when
// `informative`) and whose remaining columns are noise.
FeatureStore store_with(Rng& rng, std::size_t n, bool informative, std::size_t speakers = 5) {
  FeatureStore store;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % kEmotionCount);
    store.add_utterance(uid(i), "S" + std::to_string(i % speakers), y);
    auto v = vec(Modality::Speech, uid(i));
    std::vector<double> values(v.values().begin(), v.values().end());
    for (double& x : values) x = rng.normal();
    if (informative) values[0] = y + 0.1 * rng.normal();
    store.put(FeatureVector(values, v.names(), {Modality::Speech}, uid(i)));
  }
  return store;
}

GbdtConfig quick_config() {
  GbdtConfig c;
  c.num_rounds = 15;
  c.max_depth = 3;
  c.learning_rate = 0.3;
  c.colsample = 0.1;
  return c;
}

ScenarioReport fixture(const std::string& label, std::int64_t correct) {
  ScenarioReport r;
  r.scenario = Scenario::parse(label);
  r.confusion = ConfusionMatrix(2);
  for (std::int64_t i = 0; i < correct; ++i) r.confusion.add(0, 0);
  for (std::int64_t i = correct; i < 10000; ++i) r.confusion.add(0, 1);
  r.accuracy = r.confusion.accuracy();
  r.folds = 10;
  r.fold_seed = 1;
  r.fold_digest = "abc";
  return r;
}

}  // namespace

TEST_CASE("fusion order and dimensions") {
  const auto s = vec(Modality::Speech, "a", 1.0);
  const auto e = vec(Modality::Excitation, "a", 2.0);
  const auto m = vec(Modality::Articulatory, "a", 3.0);

  const std::vector<FeatureVector> tri{m, s, e};
  const auto all = fuse(tri);
  CHECK(all.dim() == 965);
  CHECK(all.modalities() == std::vector<Modality>{Modality::Speech, Modality::Excitation,
                                                  Modality::Articulatory});
  CHECK(all.values()[0] == 1.0);
  CHECK(all.values()[384] == 2.0);
  CHECK(all.values()[768] == 3.0);
  CHECK(all.names()[0] == "speech/f0");
  CHECK(all.names()[768] == "articulatory/f0");
  CHECK(std::set<std::string>(all.names().begin(), all.names().end()).size() == 965);

  const std::vector<FeatureVector> sa{m, s};
  const auto two = fuse(sa);
  CHECK(two.dim() == 581);
  CHECK(two.values()[0] == 1.0);
  CHECK(two.values()[384] == 3.0);

  const std::vector<FeatureVector> one{e};
  const auto same = fuse(one);
  CHECK(same.names() == e.names());
  CHECK(std::equal(same.values().begin(), same.values().end(), e.values().begin()));

  const std::vector<FeatureVector> mixed{s, vec(Modality::Excitation, "b")};
  CHECK_THROWS_AS(fuse(mixed), ContextError);
  const std::vector<FeatureVector> dup{e, vec(Modality::ExcitationEstimated, "a")};
  CHECK_THROWS_AS(fuse(dup), ParameterError);
  CHECK_THROWS_AS(fuse(std::vector<FeatureVector>{}), ParameterError);
}

TEST_CASE("scenarios") {
  const auto all = standard_scenarios();
  REQUIRE(all.size() == 7);
  std::map<std::size_t, int> arity;
  for (const auto& s : all) ++arity[s.arity()];
  CHECK(arity[1] == 3);
  CHECK(arity[2] == 3);
  CHECK(arity[3] == 1);
  CHECK(all.back().label == "speech+excitation+articulatory");

  CHECK(Scenario::parse("ema+speech").label == "speech+articulatory");
  CHECK(Scenario::parse("speech+ema") == Scenario::parse("articulatory+speech"));
  CHECK_THROWS_AS(Scenario::parse("speech+video"), ParameterError);
  CHECK_THROWS_AS(Scenario::parse("egg+excitation_est"), ParameterError);

  for (const auto& s : standard_scenarios(true)) {
    for (Modality m : s.modalities) {
      CHECK(m != Modality::Excitation);
      CHECK(m != Modality::Articulatory);
    }
  }
}

TEST_CASE("stratified folds") {
  Rng rng(1);
  std::vector<int> labels(2427);
  for (int& y : labels) y = static_cast<int>(rng.below(7));
  const auto f = make_folds(labels, {}, 10, 42, FoldStrategy::StratifiedRandom);
  REQUIRE(f.fold_of_sample.size() == labels.size());
  for (int k : f.fold_of_sample) CHECK((k >= 0 && k < 10));
  for (int c = 0; c < 7; ++c) {
    std::vector<int> per_fold(10, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) ++per_fold[static_cast<std::size_t>(f.fold_of_sample[i])];
    }
    const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
    CHECK(*hi - *lo <= 1);
  }
  const auto sizes = f.fold_sizes();
  CHECK(*std::max_element(sizes.begin(), sizes.end()) -
            *std::min_element(sizes.begin(), sizes.end()) <= 1);

  const auto again = make_folds(labels, {}, 10, 42, FoldStrategy::StratifiedRandom);
  CHECK(again.fold_of_sample == f.fold_of_sample);
  CHECK(again.digest() == f.digest());
  const auto other = make_folds(labels, {}, 10, 43, FoldStrategy::StratifiedRandom);
  CHECK(other.digest() != f.digest());

  const std::vector<int> four{0, 0, 1, 1};
  const auto two = make_folds(four, {}, 2, 7, FoldStrategy::StratifiedRandom, 2);
  CHECK(two.fold_of_sample[0] != two.fold_of_sample[1]);
  CHECK(two.fold_of_sample[2] != two.fold_of_sample[3]);

  CHECK_THROWS_AS(make_folds(four, {}, 3, 7, FoldStrategy::StratifiedRandom, 2), DataError);
  CHECK_THROWS_AS(make_folds(four, {}, 1, 7, FoldStrategy::StratifiedRandom, 2), ParameterError);
}

TEST_CASE("speaker-independent folds") {
  std::vector<int> labels;
  std::vector<std::string> groups;
  for (int s = 0; s < 8; ++s) {
    for (int i = 0; i < 20 + s; ++i) {
      labels.push_back(i % 7);
      groups.push_back("S" + std::to_string(s));
    }
  }
  const auto f = make_folds(labels, groups, 4, 3, FoldStrategy::SpeakerIndependent);
  std::map<std::string, std::set<int>> folds_of;
  for (std::size_t i = 0; i < labels.size(); ++i) folds_of[groups[i]].insert(f.fold_of_sample[i]);
  for (const auto& [speaker, folds] : folds_of) CHECK(folds.size() == 1);
  for (std::size_t size : f.fold_sizes()) CHECK(size > 0);
  CHECK_THROWS_AS(make_folds(labels, groups, 9, 3, FoldStrategy::SpeakerIndependent), DataError);
  CHECK(parse_fold_strategy("speaker") == FoldStrategy::SpeakerIndependent);
  CHECK(parse_fold_strategy(to_string(FoldStrategy::StratifiedRandom)) ==
        FoldStrategy::StratifiedRandom);
  CHECK_FALSE(parse_fold_strategy("loso").has_value());
}

TEST_CASE("confusion matrix") {
  ConfusionMatrix cm(3);
  cm.add(0, 0);
  cm.add(0, 1);
  cm.add(1, 1);
  cm.add(2, 2);
  CHECK(cm.total() == 4);
  CHECK(cm.trace() == 3);
  CHECK(cm.accuracy() == 0.75);
  CHECK(cm.row_sum(0) == 2);
  CHECK(cm.row_percentages()[0][0] == 50.0);
  CHECK(cm.per_class_accuracy() == std::vector<double>{0.5, 1.0, 1.0});
  CHECK_THROWS(cm.add(3, 0));
  CHECK(ConfusionMatrix(7).class_names()[3] == "angry");
  CHECK(ConfusionMatrix(3).row_percentages()[1] == std::vector<double>(3, 0.0));
}

TEST_CASE("feature store") {
  FeatureStore store;
  store.add_utterance("a", "S1", 0);
  store.add_utterance("b", "S1", 1);
  store.put(vec(Modality::Speech, "a"));
  store.put(vec(Modality::Speech, "b"));
  store.put(vec(Modality::Articulatory, "a"));
  CHECK_THROWS_AS(store.add_utterance("a", "S1", 0), DataError);
  CHECK_THROWS_AS(store.put(vec(Modality::Speech, "zzz")), DataError);
  CHECK_THROWS_AS(store.put(FeatureVector({1.0}, {"x"}, {Modality::Speech}, "a")), DimensionError);

  const std::vector<Modality> need{Modality::Speech, Modality::Articulatory};
  const auto missing = store.missing(need);
  REQUIRE(missing.size() == 1);
  CHECK(missing[0].first == "b");
  CHECK_THROWS_AS(store.dataset(Scenario::of(need)), DataError);
  const auto subset = store.complete_subset(need);
  CHECK(subset.size() == 1);
  const auto data = subset.dataset(Scenario::of(need));
  CHECK(data.features.cols() == 581);
  CHECK(data.labels == std::vector<int>{0});
  CHECK(data.groups == std::vector<std::string>{"S1"});
}

TEST_CASE("label-determined features are classified perfectly") {
  Rng rng(3);
  const auto store = store_with(rng, 140, true);
  const auto folds = make_folds(store.labels(), store.speakers(), 5, 1,
                                FoldStrategy::StratifiedRandom);
  GbdtConfig config = quick_config();
  config.colsample = 1.0;
  const auto report = run_scenario(store, Scenario::parse("speech"), folds, config);
  CHECK(report.accuracy == 1.0);
  CHECK(report.confusion.total() == 140);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) {
      if (i != j) CHECK(report.confusion.at(i, j) == 0);
    }
  }
  CHECK(report.fold_accuracies.size() == 5);
  CHECK(report.utterance_ids.size() == 140);
  CHECK(report.fold_digest == folds.digest());
}

TEST_CASE("shuffled labels give chance accuracy") {
  Rng rng(4);
  FeatureStore informative = store_with(rng, 2100, true);
  std::vector<int> labels = informative.labels();
  rng.shuffle(std::span<int>(labels));
  FeatureStore shuffled;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& u = informative.utterances()[i];
    shuffled.add_utterance(u.utterance_id, u.speaker_id, labels[i]);
    shuffled.put(u.features.at(Modality::Speech));
  }
  const auto folds = make_folds(shuffled.labels(), shuffled.speakers(), 10, 2,
                                FoldStrategy::StratifiedRandom);
  const auto report = run_scenario(shuffled, Scenario::parse("speech"), folds, quick_config());
  CHECK(std::abs(report.accuracy - 1.0 / 7.0) <= 0.05);
}

TEST_CASE("runs are reproducible and thread-count independent") {
  Rng rng(5);
  const auto store = store_with(rng, 210, false);
  const auto folds = make_folds(store.labels(), store.speakers(), 3, 9,
                                FoldStrategy::StratifiedRandom);
  const auto a = run_scenario(store, Scenario::parse("speech"), folds, quick_config(), {1});
  const auto b = run_scenario(store, Scenario::parse("speech"), folds, quick_config(), {4});
  CHECK(a.predicted == b.predicted);
  CHECK(a.confusion == b.confusion);
}

TEST_CASE("leakage-safe medians recompute the articulatory block per fold") {
  // Every recording of a speaker is identical, so fold-local medians equal
  // the pooled ones and the result matches a run on the stored vectors.
  Rng rng(6);
  EmaSources sources;
  FeatureStore exact, zeroed;
  std::map<std::string, Matrix> base;
  for (int s = 0; s < 3; ++s) {
    Matrix p(60, kEmaChannels);
    for (double& v : p.data()) v = rng.uniform(-10.0, 10.0);
    base.emplace("S" + std::to_string(s), p);
  }
  for (std::size_t i = 0; i < 105; ++i) {
    const int y = static_cast<int>(i % 7);
    const std::string speaker = "S" + std::to_string(i % 3);
    Matrix p = base.at(speaker);
    for (std::size_t r = 0; r < p.rows(); ++r) p(r, ema_column(Articulator::TT, Axis::Z)) += y * r;
    EmaRecording rec(p, 250.0, uid(i), speaker);
    const EmaRecording* one[] = {&rec};
    const auto v = ema_vector(rec, compute_speaker_medians(one));
    for (FeatureStore* st : {&exact, &zeroed}) st->add_utterance(uid(i), speaker, y);
    exact.put(v);
    zeroed.put(vec(Modality::Articulatory, uid(i)));
    sources.articulatory.emplace(uid(i), std::move(rec));
  }
  const auto folds = make_folds(exact.labels(), exact.speakers(), 3, 1,
                                FoldStrategy::SpeakerIndependent);
  const auto scenario = Scenario::parse("ema");
  const auto plain = run_scenario(exact, scenario, folds, quick_config());
  RunOptions safe;
  safe.leakage_safe = &sources;
  const auto local = run_scenario(zeroed, scenario, folds, quick_config(), safe);
  CHECK(local.predicted == plain.predicted);

  EmaSources empty;
  safe.leakage_safe = &empty;
  CHECK_THROWS_AS(run_scenario(zeroed, scenario, folds, quick_config(), safe), DataError);
}

TEST_CASE("comparison fixtures") {
  const std::vector<ScenarioReport> table1{
      fixture("speech", 7997),         fixture("excitation", 7000),
      fixture("articulatory", 6500),   fixture("speech+excitation", 8723),
      fixture("speech+articulatory", 8600), fixture("excitation+articulatory", 8000),
      fixture("speech+excitation+articulatory", 8842)};
  const auto t = compare_scenarios(table1);
  CHECK(t.best_delta(3, 2) == 1.19);
  CHECK(t.best_delta(3, 1) == 8.45);
  CHECK(t.rows[6].accuracy == 88.42);
  CHECK(t.rows[*t.best(1)].label == "speech");
  CHECK(t.rows[*t.best(2)].label == "speech+excitation");

  const std::vector<ScenarioReport> table2{fixture("speech", 7997),
                                           fixture("speech+excitation_est+articulatory_est", 8269)};
  const auto t2 = compare_scenarios(table2);
  CHECK(t2.best_delta(3, 1) == 2.72);

  const std::vector<ScenarioReport> same{fixture("speech", 5000), fixture("excitation", 5000)};
  for (const auto& row : compare_scenarios(same).delta) {
    for (double d : row) CHECK(d == 0.0);
  }

  auto off = table1;
  off[2].fold_digest = "other";
  CHECK_THROWS_AS(compare_scenarios(off), ContextError);
  off = table1;
  off[1].config.num_rounds = 7;
  CHECK_THROWS_AS(compare_scenarios(off), ContextError);
  CHECK_THROWS_AS(compare_scenarios(std::vector<ScenarioReport>{}), ParameterError);
}
