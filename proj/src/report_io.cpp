#include "sermm/report_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sermm {

using nlohmann::json;

namespace {

json config_json(const GbdtConfig& c) {
  return {{"num_rounds", c.num_rounds},         {"max_depth", c.max_depth},
          {"learning_rate", c.learning_rate},   {"lambda_l2", c.lambda_l2},
          {"gamma_min_gain", c.gamma_min_gain}, {"min_child_hessian", c.min_child_hessian},
          {"subsample", c.subsample},           {"colsample", c.colsample},
          {"num_classes", c.num_classes},       {"seed", c.seed}};
}

GbdtConfig config_from(const json& j) {
  GbdtConfig c;
  c.num_rounds = j.at("num_rounds");
  c.max_depth = j.at("max_depth");
  c.learning_rate = j.at("learning_rate");
  c.lambda_l2 = j.at("lambda_l2");
  c.gamma_min_gain = j.at("gamma_min_gain");
  c.min_child_hessian = j.at("min_child_hessian");
  c.subsample = j.at("subsample");
  c.colsample = j.at("colsample");
  c.num_classes = j.at("num_classes");
  c.seed = j.at("seed");
  return c;
}

}  // namespace

std::string report_to_json(const ScenarioReport& r) {
  const ConfusionMatrix& cm = r.confusion;
  const auto names = cm.class_names();
  json counts = json::array();
  for (int t = 0; t < cm.classes(); ++t) {
    json row = json::array();
    for (int p = 0; p < cm.classes(); ++p) row.push_back(cm.at(t, p));
    counts.push_back(std::move(row));
  }
  json per_class = json::object();
  const auto acc = cm.per_class_accuracy();
  for (std::size_t k = 0; k < names.size(); ++k) per_class[names[k]] = acc[k];
  json modalities = json::array();
  for (Modality m : r.scenario.modalities) modalities.push_back(to_string(m));
  json predictions = json::array();
  for (std::size_t i = 0; i < r.utterance_ids.size(); ++i) {
    predictions.push_back({{"utterance_id", r.utterance_ids[i]},
                           {"truth", names[static_cast<std::size_t>(r.truth[i])]},
                           {"predicted", names[static_cast<std::size_t>(r.predicted[i])]}});
  }
  const json j = {
      {"format", kReportFormat},
      {"version", kReportFormatVersion},
      {"scenario", r.scenario.label},
      {"modalities", modalities},
      {"accuracy", r.accuracy},
      {"accuracy_percent", 100.0 * r.accuracy},
      {"per_class_accuracy", per_class},
      {"confusion",
       {{"classes", names}, {"counts", counts}, {"row_percentages", cm.row_percentages()}}},
      {"folds",
       {{"k", r.folds},
        {"seed", r.fold_seed},
        {"strategy", to_string(r.fold_strategy)},
        {"digest", r.fold_digest},
        {"fold_accuracies", r.fold_accuracies}}},
      {"classifier", config_json(r.config)},
      {"predictions", predictions}};
  return j.dump(1);
}

ScenarioReport report_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != kReportFormat) throw DataError("not a scenario report");
    if (j.at("version") != kReportFormatVersion) throw DataError("unsupported report version");
    ScenarioReport r;
    r.scenario = Scenario::parse(j.at("scenario").get<std::string>());
    r.accuracy = j.at("accuracy");
    const auto& names = j.at("confusion").at("classes");
    const int k = static_cast<int>(names.size());
    r.confusion = ConfusionMatrix(k);
    const auto& counts = j.at("confusion").at("counts");
    for (int t = 0; t < k; ++t) {
      for (int p = 0; p < k; ++p) {
        const std::int64_t c = counts.at(static_cast<std::size_t>(t)).at(static_cast<std::size_t>(p));
        for (std::int64_t i = 0; i < c; ++i) r.confusion.add(t, p);
      }
    }
    const auto& folds = j.at("folds");
    r.folds = folds.at("k");
    r.fold_seed = folds.at("seed");
    const auto strategy = parse_fold_strategy(folds.at("strategy").get<std::string>());
    if (!strategy) throw DataError("unknown fold strategy in report");
    r.fold_strategy = *strategy;
    r.fold_digest = folds.at("digest");
    r.fold_accuracies = folds.at("fold_accuracies").get<std::vector<double>>();
    r.config = config_from(j.at("classifier"));
    auto index_of = [&](const std::string& name) {
      for (int c = 0; c < k; ++c) {
        if (names.at(static_cast<std::size_t>(c)) == name) return c;
      }
      throw DataError("unknown class '" + name + "' in report predictions");
    };
    for (const json& p : j.at("predictions")) {
      r.utterance_ids.push_back(p.at("utterance_id"));
      r.truth.push_back(index_of(p.at("truth")));
      r.predicted.push_back(index_of(p.at("predicted")));
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report JSON: ") + e.what());
  }
}

void save_report(const std::filesystem::path& path, const ScenarioReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report " + path.string());
  out << report_to_json(report) << '\n';
  if (!out) throw DataError("failed writing report " + path.string());
}

ScenarioReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read report " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

std::string report_file_stem(const Scenario& scenario) { return scenario.label; }

std::string comparison_to_json(const ComparisonTable& table) {
  json rows = json::array();
  for (const ComparisonRow& r : table.rows) {
    rows.push_back({{"scenario", r.label},
                    {"arity", r.arity},
                    {"accuracy_percent", r.accuracy},
                    {"best_of_arity", r.best_of_arity}});
  }
  json labels = json::array();
  for (const ComparisonRow& r : table.rows) labels.push_back(r.label);
  return json{{"rows", rows}, {"delta_labels", labels}, {"delta_pp", table.delta}}.dump(1);
}

std::string format_comparison(const ComparisonTable& table) {
  std::size_t width = 8;
  for (const ComparisonRow& r : table.rows) width = std::max(width, r.label.size());
  const auto best_uni = table.best(1);
  const auto best_bi = table.best(2);
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %5s  %9s  %12s  %12s\n", static_cast<int>(width), "scenario",
                "arity", "accuracy", "vs best uni", "vs best bi");
  out += buf;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const ComparisonRow& r = table.rows[i];
    auto delta = [&](std::optional<std::size_t> ref) {
      if (!ref) return std::string("-");
      std::snprintf(buf, sizeof buf, "%+.2f", table.delta[i][*ref]);
      return std::string(buf);
    };
    std::snprintf(buf, sizeof buf, "%-*s  %5zu  %8.2f%%%s  %12s  %12s\n", static_cast<int>(width),
                  r.label.c_str(), r.arity, r.accuracy, r.best_of_arity ? "*" : " ",
                  delta(best_uni).c_str(), delta(best_bi).c_str());
    out += buf;
  }
  out += "* best of its arity\n";
  return out;
}

}  // namespace sermm
