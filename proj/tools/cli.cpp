#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sermm/errors.hpp"
#include "sermm/experiment.hpp"
#include "sermm/gbdt.hpp"
#include "sermm/pipeline.hpp"
#include "sermm/png_plot.hpp"
#include "sermm/report_io.hpp"
#include "sermm/synth_corpus.hpp"

namespace sermm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  int folds = 10;
  std::string fold_strategy = "stratified";
  std::string config_path;
  std::string cache_dir;
  unsigned threads = 0;
};

struct Settings {
  GbdtConfig gbdt;
  ExtractOptions extract;
  SyntheticSpec synth;
};

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

// Optional JSON config: {"gbdt": {...}, "extract": {...}, "synth": {...}}.
Settings load_settings(const Globals& g) {
  Settings s;
  s.gbdt.seed = g.seed;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw DataError("cannot read config " + g.config_path);
    json j;
    try {
      j = json::parse(in);
      if (j.contains("gbdt")) {
        const json& c = j.at("gbdt");
        take(c, "num_rounds", s.gbdt.num_rounds);
        take(c, "max_depth", s.gbdt.max_depth);
        take(c, "learning_rate", s.gbdt.learning_rate);
        take(c, "lambda_l2", s.gbdt.lambda_l2);
        take(c, "gamma_min_gain", s.gbdt.gamma_min_gain);
        take(c, "min_child_hessian", s.gbdt.min_child_hessian);
        take(c, "subsample", s.gbdt.subsample);
        take(c, "colsample", s.gbdt.colsample);
        take(c, "seed", s.gbdt.seed);
      }
      if (j.contains("extract")) {
        const json& c = j.at("extract");
        double len = s.extract.plan.frame_len_s(), shift = s.extract.plan.shift_s();
        take(c, "frame_len_s", len);
        take(c, "frame_shift_s", shift);
        s.extract.plan = FramePlan(len, shift);
        take(c, "f0_min_hz", s.extract.lld.f0_min_hz);
        take(c, "f0_max_hz", s.extract.lld.f0_max_hz);
        take(c, "voicing_threshold", s.extract.lld.voicing_threshold);
        take(c, "mel_filters", s.extract.lld.mel_filters);
        take(c, "mfcc_coeffs", s.extract.lld.mfcc_coeffs);
        take(c, "pre_emphasis", s.extract.lld.pre_emphasis);
        take(c, "iaif_highpass_hz", s.extract.iaif.highpass_hz);
        take(c, "iaif_vocal_tract_order", s.extract.iaif.vocal_tract_order);
        take(c, "iaif_glottal_order", s.extract.iaif.glottal_order);
        take(c, "iaif_leak", s.extract.iaif.leak);
        take(c, "iaif_lag_window_hz", s.extract.iaif.lag_window_hz);
        take(c, "iaif_flow_corner_hz", s.extract.iaif.flow_corner_hz);
      }
      if (j.contains("synth")) {
        const json& c = j.at("synth");
        take(c, "speakers", s.synth.speakers);
        take(c, "sentences", s.synth.sentences);
        take(c, "corruption", s.synth.corruption);
        take(c, "duration_s", s.synth.duration_s);
        take(c, "audio_rate_hz", s.synth.audio_rate_hz);
        take(c, "egg_rate_hz", s.synth.egg_rate_hz);
        take(c, "estimated_ema", s.synth.estimated_ema);
      }
    } catch (const json::exception& e) {
      throw ParameterError("invalid config " + g.config_path + ": " + e.what());
    }
  }
  s.gbdt.validate();
  s.extract.threads = g.threads;
  s.synth.threads = g.threads;
  return s;
}

fs::path cache_dir_for(const Globals& g, const fs::path& manifest) {
  if (!g.cache_dir.empty()) return g.cache_dir;
  return manifest.parent_path() / "cache";
}

FoldStrategy strategy_of(const Globals& g) {
  const auto s = parse_fold_strategy(g.fold_strategy);
  if (!s) throw ParameterError("unknown fold strategy '" + g.fold_strategy + "'");
  return *s;
}

std::vector<Modality> union_of(std::span<const Scenario> scenarios) {
  std::vector<Modality> out;
  for (const Scenario& s : scenarios) {
    for (Modality m : s.modalities) {
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
  }
  return out;
}

// Loads cached features for the scenarios and applies the missing-data policy.
FeatureStore prepare_store(const Manifest& manifest, const Settings& settings, const fs::path& cache,
                           std::span<const Scenario> scenarios, bool allow_missing,
                           const fs::path& out_dir, std::ostream& err) {
  const auto needed = union_of(scenarios);
  FeatureStore store = load_feature_store(manifest, settings.extract, cache, needed);
  const auto absent = store.missing(needed);
  if (absent.empty()) return store;
  fs::create_directories(out_dir);
  const fs::path report = out_dir / "exclusions.txt";
  {
    std::ofstream ex(report);
    for (const auto& [id, m] : absent) ex << id << ',' << to_string(m) << '\n';
  }
  if (!allow_missing) {
    throw DataError(std::to_string(absent.size()) +
                    " modality record(s) missing; see " + report.string() +
                    " or pass --allow-missing");
  }
  FeatureStore kept = store.complete_subset(needed);
  err << "[sermm] excluded " << store.size() - kept.size() << " utterance(s) lacking modalities ("
      << report.string() << ")\n";
  return kept;
}

void write_reports(const std::vector<ScenarioReport>& reports, const fs::path& out_dir,
                   std::ostream& out) {
  fs::create_directories(out_dir);
  for (const ScenarioReport& r : reports) {
    const fs::path p = out_dir / (report_file_stem(r.scenario) + ".report.json");
    save_report(p, r);
    out << r.scenario.label << ": accuracy " << 100.0 * r.accuracy << "% -> " << p.string() << '\n';
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal emotion recognition features and experiments", "sermm"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for corpus generation, folds and the classifier");
  app.add_option("--folds", g.folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
  app.add_option("--fold-strategy", g.fold_strategy, "stratified | speaker");
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--cache-dir", g.cache_dir, "Feature cache directory (default: <manifest dir>/cache)");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string synth_out;
  std::optional<int> speakers, sentences;
  std::optional<double> corruption, duration;
  bool no_estimated = false;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--speakers", speakers);
  synth->add_option("--sentences", sentences);
  synth->add_option("--corruption", corruption, "Per-modality label corruption probability");
  synth->add_option("--duration", duration, "Utterance duration in seconds");
  synth->add_flag("--no-estimated-ema", no_estimated);

  auto* extract = app.add_subcommand("extract", "Extract features into the cache");
  std::string manifest_path;
  bool f_speech = false, f_egg = false, f_ema = false, f_glottal = false, f_ema_est = false;
  extract->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  extract->add_flag("--speech", f_speech);
  extract->add_flag("--egg", f_egg);
  extract->add_flag("--ema", f_ema);
  extract->add_flag("--glottal-estimate", f_glottal);
  extract->add_flag("--ema-estimate", f_ema_est);

  auto* train = app.add_subcommand("train", "Fit one scenario on the whole corpus");
  std::string scenario_text, model_out;
  bool allow_missing = false;
  train->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  train->add_option("--scenario", scenario_text)->required();
  train->add_option("--model-out", model_out)->required();
  train->add_flag("--allow-missing", allow_missing);

  auto* evaluate = app.add_subcommand("evaluate", "Cross-validate one scenario");
  std::string out_dir;
  evaluate->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--scenario", scenario_text)->required();
  evaluate->add_option("--out", out_dir)->required();
  evaluate->add_flag("--allow-missing", allow_missing);

  auto* matrix = app.add_subcommand("matrix", "Cross-validate the seven-scenario table");
  bool estimated = false;
  matrix->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  matrix->add_option("--out", out_dir)->required();
  matrix->add_flag("--estimated", estimated, "Use estimated excitation and articulation");
  matrix->add_flag("--allow-missing", allow_missing);

  auto* report = app.add_subcommand("report", "Comparison table and confusion images");
  std::string reports_dir;
  report->add_option("--reports", reports_dir)->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", out_dir, "Output directory (default: the reports directory)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const Settings settings = load_settings(g);
    auto log = [&err](const std::string& line) { err << "[sermm] " << line << '\n'; };

    if (synth->parsed()) {
      SyntheticSpec spec = settings.synth;
      if (speakers) spec.speakers = *speakers;
      if (sentences) spec.sentences = *sentences;
      if (corruption) spec.corruption = *corruption;
      if (duration) spec.duration_s = *duration;
      if (no_estimated) spec.estimated_ema = false;
      const Manifest m = generate_synthetic_corpus(spec, g.seed, synth_out);
      out << "wrote " << m.entries.size() << " utterances to "
          << (fs::path(synth_out) / "manifest.csv").string() << '\n';
      return kOk;
    }

    const fs::path manifest_file = manifest_path;
    if (extract->parsed()) {
      const Manifest m = load_manifest(manifest_file);
      ExtractOptions opts = settings.extract;
      if (f_speech || f_egg || f_ema || f_glottal || f_ema_est) {
        opts.speech = f_speech;
        opts.egg = f_egg;
        opts.ema = f_ema;
        opts.glottal_estimate = f_glottal;
        opts.ema_estimate = f_ema_est;
      }
      const ExtractResult r = extract_to_cache(m, opts, cache_dir_for(g, manifest_file), log);
      out << "extracted " << r.computed.size() << " modality file(s), " << r.cache_hits.size()
          << " cache hit(s)\n";
      return kOk;
    }

    if (report->parsed()) {
      std::vector<ScenarioReport> reports;
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(reports_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 12 && name.ends_with(".report.json")) files.push_back(entry.path());
      }
      if (files.empty()) throw DataError("no *.report.json files in " + reports_dir);
      std::sort(files.begin(), files.end());
      for (const fs::path& f : files) reports.push_back(load_report(f));
      std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
        return a.scenario.arity() < b.scenario.arity();
      });
      const fs::path dest = out_dir.empty() ? fs::path(reports_dir) : fs::path(out_dir);
      fs::create_directories(dest);
      const ComparisonTable table = compare_scenarios(reports);
      const std::string text = format_comparison(table);
      std::ofstream(dest / "comparison.txt") << text;
      std::ofstream(dest / "comparison.json") << comparison_to_json(table) << '\n';
      for (const ScenarioReport& r : reports) {
        write_confusion_png(dest / (report_file_stem(r.scenario) + ".confusion.png"), r.confusion);
      }
      out << text;
      return kOk;
    }

    const Manifest m = load_manifest(manifest_file);
    const fs::path cache = cache_dir_for(g, manifest_file);

    if (train->parsed()) {
      const std::vector<Scenario> one{Scenario::parse(scenario_text)};
      const fs::path model_dir = fs::path(model_out).parent_path();
      const FeatureStore store = prepare_store(m, settings, cache, one, allow_missing,
                                               model_dir.empty() ? fs::path(".") : model_dir, err);
      const LabeledDataset data = store.dataset(one.front());
      const GbdtModel model = fit(data, settings.gbdt);
      save_model(model, model_out);
      const auto pred = predict(model, data.features);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < data.size(); ++i) correct += pred.classes[i] == data.labels[i];
      out << "trained " << one.front().label << " on " << data.size()
          << " utterances, training accuracy "
          << 100.0 * static_cast<double>(correct) / static_cast<double>(data.size()) << "% -> "
          << model_out << '\n';
      return kOk;
    }

    std::vector<Scenario> scenarios;
    if (evaluate->parsed()) {
      scenarios.push_back(Scenario::parse(scenario_text));
    } else {
      scenarios = standard_scenarios(estimated);
    }
    const FeatureStore store = prepare_store(m, settings, cache, scenarios, allow_missing, out_dir, err);
    const auto labels = store.labels();
    const auto groups = store.speakers();
    const FoldAssignment folds = make_folds(labels, groups, g.folds, g.seed, strategy_of(g));
    RunOptions run;
    run.threads = g.threads;
    std::vector<ScenarioReport> reports;
    for (const Scenario& s : scenarios) {
      log("running " + s.label + " (" + std::to_string(g.folds) + " folds, " +
          std::to_string(store.size()) + " utterances)");
      reports.push_back(run_scenario(store, s, folds, settings.gbdt, run));
    }
    write_reports(reports, out_dir, out);
    if (reports.size() > 1) {
      const ComparisonTable table = compare_scenarios(reports);
      std::ofstream(fs::path(out_dir) / "comparison.txt") << format_comparison(table);
      std::ofstream(fs::path(out_dir) / "comparison.json") << comparison_to_json(table) << '\n';
      out << format_comparison(table);
    }
    return kOk;
  } catch (const ParameterError& e) {
    err << "sermm: " << e.what() << '\n';
    return kUsage;
  } catch (const InvariantError& e) {
    err << "sermm: internal error: " << e.what() << '\n';
    return kInternal;
  } catch (const Error& e) {
    err << "sermm: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "sermm: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "sermm: internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace sermm::cli
