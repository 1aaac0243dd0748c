#ifndef A4LAB_HARNESS_HPP
#define A4LAB_HARNESS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "a4lab/attack.hpp"
#include "a4lab/corpus.hpp"
#include "a4lab/error.hpp"
#include "a4lab/features.hpp"
#include "a4lab/forest.hpp"
#include "a4lab/graph_io.hpp"
#include "a4lab/mlp.hpp"

namespace a4lab {

struct TrainingConfig {
  ForestConfig forest;
  SurrogateConfig surrogate;
};

struct TrainedModels {
  RandomForest forest;
  SurrogateMlp surrogate;
  NormalizationStats stats;
  double forest_accuracy = 0.0;  // held-out, against ground truth
  double agreement = 0.0;        // held-out, against the forest
};

/// Fits the target forest on the train split, then a surrogate on the
/// forest's own labels over normalized train features. Both scores are
/// measured on the test split.
inline TrainedModels train_models(const Corpus& corpus, const FeatureSchema& schema,
                                  const TrainingConfig& config = {}) {
  LabeledMatrix train = corpus.matrix(Split::train);
  LabeledMatrix test = corpus.matrix(Split::test);
  if (train.rows() == 0) throw Error(Errc::empty_corpus, "train split is empty");

  RandomForest forest = train_forest(train, config.forest);

  std::vector<FeatureVector> train_vectors;
  for (const auto& s : corpus.samples)
    if (s.split == Split::train) train_vectors.push_back(s.features);
  NormalizationStats stats = compute_normalization_stats(train_vectors);

  auto relabel = [&](const LabeledMatrix& m) {
    LabeledMatrix out{m.width, {}, {}};
    for (std::size_t r = 0; r < m.rows(); ++r) {
      FeatureVector x(std::vector<double>(m.row(r).begin(), m.row(r).end()));
      out.push_back(normalize(x, stats, schema).span(), forest.predict(m.row(r)).label);
    }
    return out;
  };
  auto training = train_surrogate(relabel(train), config.surrogate);
  double forest_accuracy = test.rows() ? accuracy(forest, test) : 0.0;
  double agreement = test.rows() ? agreement_rate(training.model, relabel(test)) : training.holdout_agreement;
  return TrainedModels{std::move(forest), std::move(training.model), std::move(stats), forest_accuracy, agreement};
}

inline void save_models(const TrainedModels& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file((dir / "forest.json").string(), forest_to_json(m.forest).dump());
  write_file((dir / "surrogate.json").string(), mlp_to_json(m.surrogate).dump());
  nlohmann::json stats = stats_to_json(m.stats);
  stats["forest_accuracy"] = m.forest_accuracy;
  stats["agreement"] = m.agreement;
  write_file((dir / "stats.json").string(), stats.dump());
}

inline TrainedModels load_models(const std::filesystem::path& dir) {
  for (const char* f : {"forest.json", "surrogate.json", "stats.json"})
    if (!std::filesystem::exists(dir / f)) throw Error(Errc::missing_model, "missing model file " + (dir / f).string());
  try {
    auto stats = nlohmann::json::parse(read_file((dir / "stats.json").string()));
    return TrainedModels{forest_from_json(nlohmann::json::parse(read_file((dir / "forest.json").string()))),
                         mlp_from_json(nlohmann::json::parse(read_file((dir / "surrogate.json").string()))),
                         stats_from_json(stats), stats.value("forest_accuracy", 0.0), stats.value("agreement", 0.0)};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, e.what());
  }
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvaluationOptions {
  std::vector<AttackKind> attacks = {AttackKind::a4, AttackKind::strong, AttackKind::weak};
  std::size_t sample = 0;  // 0: every attackable sample
  std::uint64_t sample_seed = 1;
  CandidateObserver observer;  // forwarded to the searching attacks
};

/// Test-split samples labelled ad and classified ad by the target.
inline std::vector<std::size_t> attackable_samples(const Corpus& corpus, const RandomForest& forest) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const auto& s = corpus.samples[i];
    if (s.split == Split::test && s.label == Label::ad && forest.predict(s.features.span()).label == Label::ad)
      out.push_back(i);
  }
  return out;
}

/// One line of outcomes.jsonl. It carries everything the report needs.
inline nlohmann::json outcome_record(const Sample& s, const AttackOutcome& o, const FeatureSchema& schema,
                                     const NormalizationStats& stats, double seconds) {
  nlohmann::json strategies = nlohmann::json::array();
  for (auto v : o.strategies_succeeded) strategies.push_back(to_string(v));
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : o.perturbation.url_actions)
    actions.push_back({{"kind", to_string(a.kind)}, {"column", a.column}, {"patterns", a.patterns}});
  nlohmann::json ranges = nlohmann::json::object();
  for (std::size_t i = 0; i < schema.width(); ++i)
    if (schema.column(i).numeric()) ranges[schema.column(i).name] = stats.range(i);
  nlohmann::json rec = {{"graph_file", s.graph_file},
                        {"page_id", s.page_id},
                        {"request_id", s.request_id},
                        {"attack", to_string(o.attack)},
                        {"status", to_string(o.status)},
                        {"iterations", o.iterations_used},
                        {"strategies_succeeded", strategies},
                        {"original", o.original_vector.values},
                        {"final", o.final_vector.values},
                        {"delta", o.perturbation.delta},
                        {"norm", {{"numeric_max", o.norm.numeric_max}, {"flips", o.norm.flips}}},
                        {"reverted", o.reverted_columns},
                        {"node_add_count", o.perturbation.node_add_count},
                        {"url_actions", actions},
                        {"feature_ranges", ranges},
                        {"evades_target", o.evades_target},
                        {"actionable", o.actionable},
                        {"p_before", o.target_probability_before},
                        {"p_after", o.target_probability_after},
                        {"seconds", seconds}};
  if (o.perturbed_graph) rec["perturbed_url"] = o.perturbed_graph->request().url->markup_form();
  return rec;
}

/// Runs every requested attack over the attackable samples and returns one
/// record per (sample, attack).
inline std::vector<nlohmann::json> evaluate(const Corpus& corpus, const TrainedModels& models,
                                            const FeatureSchema& schema, const UrlPatterns& patterns,
                                            const AttackConfig& config, const EvaluationOptions& options = {}) {
  auto targets = attackable_samples(corpus, models.forest);
  if (options.sample > 0 && options.sample < targets.size()) {
    std::mt19937_64 rng(options.sample_seed);
    std::shuffle(targets.begin(), targets.end(), rng);
    targets.resize(options.sample);
    std::sort(targets.begin(), targets.end());
  }
  if (targets.empty()) throw Error(Errc::empty_report, "no test sample is labelled and classified as an ad");

  AttackContext ctx{schema, patterns, models.stats, models.forest, models.surrogate};
  std::vector<nlohmann::json> records;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const Sample& s = corpus.samples[targets[k]];
    AttackConfig cfg = config;
    cfg.seed = detail::mix_seed(config.seed, targets[k]);
    for (AttackKind kind : options.attacks) {
      auto t0 = std::chrono::steady_clock::now();
      AttackOutcome o = run(kind, ctx, s.graph, cfg, options.observer);
      double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      records.push_back(outcome_record(s, o, schema, models.stats, seconds));
    }
  }
  return records;
}

/// Aggregates outcome records into the evaluation tables. Uses nothing but
/// the records themselves.
inline nlohmann::json build_report(const std::vector<nlohmann::json>& records, const FeatureSchema& schema) {
  struct Tally {
    std::size_t total = 0, success = 0, evades = 0;
    double seconds = 0.0, max_seconds = 0.0;
  };
  std::map<std::string, Tally> tallies;
  std::vector<std::size_t> histogram;  // index k: successes after k + 1 iterations
  std::size_t longest = 0;
  std::vector<std::size_t> modified(schema.width(), 0);
  struct Stat {
    std::size_t n = 0;
    double sum = 0.0, max = 0.0, min = 0.0, range = 0.0;
  };
  std::vector<Stat> perturbation(schema.width());
  std::size_t centralized_only = 0, distributed_only = 0, both = 0, a4_success = 0;

  for (const auto& r : records) {
    const std::string attack = r.at("attack").get<std::string>();
    const std::string status = r.at("status").get<std::string>();
    if (status == "not_applicable") continue;
    Tally& t = tallies[attack];
    ++t.total;
    double sec = r.value("seconds", 0.0);
    t.seconds += sec;
    t.max_seconds = std::max(t.max_seconds, sec);
    if (r.value("evades_target", false)) ++t.evades;
    const auto iterations = r.at("iterations").get<std::size_t>();
    if (attack == "a4") longest = std::max(longest, iterations);
    if (status != "success") continue;
    ++t.success;
    if (attack != "a4") continue;

    ++a4_success;
    if (histogram.size() < iterations) histogram.resize(iterations, 0);
    if (iterations > 0) ++histogram[iterations - 1];
    auto original = r.at("original").get<std::vector<double>>();
    auto final = r.at("final").get<std::vector<double>>();
    const auto& ranges = r.at("feature_ranges");
    for (std::size_t i = 0; i < schema.width() && i < original.size(); ++i) {
      double d = final[i] - original[i];
      if (d == 0.0) continue;
      ++modified[i];
      const Column& c = schema.column(i);
      if (!c.numeric()) continue;
      Stat& st = perturbation[i];
      st.min = st.n == 0 ? d : std::min(st.min, d);
      st.max = st.n == 0 ? d : std::max(st.max, d);
      st.sum += d;
      ++st.n;
      st.range = ranges.value(c.name, 0.0);
    }
    bool c = false, d = false;
    for (const auto& s : r.at("strategies_succeeded")) {
      c = c || s == "centralized";
      d = d || s == "distributed";
    }
    if (c && d) ++both;
    else if (c) ++centralized_only;
    else if (d) ++distributed_only;
  }

  auto rate = [](std::size_t k, std::size_t n) { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; };
  nlohmann::json table7 = nlohmann::json::object();
  nlohmann::json timing = nlohmann::json::object();
  for (const auto& [attack, t] : tallies) {
    table7[attack] = {{"total", t.total},
                      {"success", t.success},
                      {"fail", t.total - t.success},
                      {"success_rate", rate(t.success, t.total)},
                      {"fail_rate", rate(t.total - t.success, t.total)},
                      {"evades_target", t.evades}};
    timing[attack] = {{"mean_seconds", t.total ? t.seconds / static_cast<double>(t.total) : 0.0},
                      {"max_seconds", t.max_seconds},
                      {"total_seconds", t.seconds}};
  }

  histogram.resize(std::max(longest, histogram.size()), 0);
  std::size_t within5 = 0;
  for (std::size_t k = 0; k < histogram.size() && k < 5; ++k) within5 += histogram[k];
  nlohmann::json fig6 = {{"bins", histogram}, {"successes", a4_success}, {"within_5", within5},
                         {"within_5_fraction", rate(within5, a4_success)}};

  nlohmann::json fig7 = nlohmann::json::object();
  nlohmann::json table8 = nlohmann::json::object();
  for (std::size_t i = 0; i < schema.width(); ++i) {
    const Column& c = schema.column(i);
    fig7[c.name] = {{"modified", modified[i]}, {"frequency", rate(modified[i], a4_success)}};
    if (!c.numeric() || perturbation[i].n == 0) continue;
    const Stat& st = perturbation[i];
    double mean = st.sum / static_cast<double>(st.n);
    auto ratio = [&](double v) { return st.range > 0.0 ? v / st.range : 0.0; };
    table8[c.name] = {{"count", st.n},       {"mean", mean},           {"max", st.max},
                      {"min", st.min},       {"range", st.range},      {"mean_ratio", ratio(mean)},
                      {"max_ratio", ratio(st.max)}, {"min_ratio", ratio(st.min)}};
  }

  nlohmann::json table9 = {{"centralized_only", centralized_only},
                           {"distributed_only", distributed_only},
                           {"both", both},
                           {"total", a4_success}};

  return {{"attacks", table7},
          {"convergence", fig6},
          {"feature_modification", fig7},
          {"perturbation_statistics", table8},
          {"strategy_significance", table9},
          {"timing", timing}};
}

/// Flat CSV mirror: section,key,field,value.
inline std::string report_to_csv(const nlohmann::json& report) {
  std::ostringstream out;
  out << "section,key,field,value\n";
  auto emit = [&](const std::string& section, const nlohmann::json& table) {
    for (const auto& [key, row] : table.items()) {
      if (row.is_object()) {
        for (const auto& [field, value] : row.items())
          if (!value.is_structured()) out << section << ',' << key << ',' << field << ',' << value.dump() << '\n';
      } else if (row.is_array()) {
        for (std::size_t k = 0; k < row.size(); ++k) out << section << ',' << key << ',' << k + 1 << ',' << row[k].dump() << '\n';
      } else {
        out << section << ",," << key << ',' << row.dump() << '\n';
      }
    }
  };
  for (const auto& [section, table] : report.items()) emit(section, table);
  return out.str();
}

inline std::vector<nlohmann::json> read_outcomes(const std::filesystem::path& path) {
  std::vector<nlohmann::json> records;
  std::istringstream in(read_file(path.string()));
  std::string line;
  try {
    while (std::getline(in, line))
      if (!line.empty()) records.push_back(nlohmann::json::parse(line));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, e.what());
  }
  return records;
}

inline void write_outcomes(const std::vector<nlohmann::json>& records, const std::filesystem::path& path) {
  std::string text;
  for (const auto& r : records) text += r.dump() + "\n";
  write_file(path.string(), text);
}

}  // namespace a4lab

#endif  // A4LAB_HARNESS_HPP
