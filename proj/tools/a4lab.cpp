// Command-line driver: gen, train, attack, eval, report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "a4lab/attack.hpp"
#include "a4lab/corpus.hpp"
#include "a4lab/error.hpp"
#include "a4lab/features.hpp"
#include "a4lab/graph_io.hpp"
#include "a4lab/harness.hpp"

namespace fs = std::filesystem;
using namespace a4lab;

namespace {

enum Exit { ok = 0, other = 1, usage = 2, missing_file = 3, missing_model = 4, schema_mismatch = 5, empty_report = 6 };

int exit_code(Errc code) {
  switch (code) {
    case Errc::missing_file: return missing_file;
    case Errc::missing_model: return missing_model;
    case Errc::schema_mismatch:
    case Errc::dimension_mismatch: return schema_mismatch;
    case Errc::empty_report: return empty_report;
    case Errc::invalid_config: return usage;
    default: return other;
  }
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, path + ": " + e.what());
  }
}

struct Options {
  std::uint64_t seed = 7;
  std::size_t pages = 500;
  std::string config;
  std::string out = "a4lab_out";
  std::string attack = "a4";
  std::string strategies = "both";
  std::size_t sample = 0;
  std::string graph;
};

AttackConfig attack_config(const Options& o) {
  AttackConfig c = o.config.empty() ? AttackConfig{} : attack_config_from_json(read_json(o.config));
  c.strategies = parse_strategies(o.strategies, c.strategies.front().anchor_seed);
  return c;
}

void print_report(const nlohmann::json& report) {
  std::printf("%-8s %7s %8s %8s %9s\n", "attack", "total", "success", "rate", "evasions");
  for (const auto& [attack, row] : report.at("attacks").items())
    std::printf("%-8s %7zu %8zu %7.2f%% %9zu\n", attack.c_str(), row.at("total").get<std::size_t>(),
                row.at("success").get<std::size_t>(), 100.0 * row.at("success_rate").get<double>(),
                row.at("evades_target").get<std::size_t>());
  const auto& conv = report.at("convergence");
  std::printf("\nA4 iterations to success:");
  const auto& bins = conv.at("bins");
  for (std::size_t k = 0; k < bins.size(); ++k) std::printf(" %zu:%zu", k + 1, bins[k].get<std::size_t>());
  std::printf("\nwithin 5 iterations: %.2f%%\n", 100.0 * conv.at("within_5_fraction").get<double>());
  const auto& s = report.at("strategy_significance");
  std::printf("strategies: both %zu, centralized only %zu, distributed only %zu\n",
              s.at("both").get<std::size_t>(), s.at("centralized_only").get<std::size_t>(),
              s.at("distributed_only").get<std::size_t>());
  std::printf("\n%-22s %9s %10s %10s %10s\n", "feature", "modified", "mean", "max", "mean/r");
  for (const auto& [name, row] : report.at("perturbation_statistics").items())
    std::printf("%-22s %9zu %10.3f %10.3f %10.4f\n", name.c_str(), row.at("count").get<std::size_t>(),
                row.at("mean").get<double>(), row.at("max").get<double>(), row.at("mean_ratio").get<double>());
  for (const auto& [attack, row] : report.at("timing").items())
    std::printf("%s: %.4f s per sample\n", attack.c_str(), row.at("mean_seconds").get<double>());
}

int cmd_gen(const Options& o) {
  CorpusSpec spec;
  if (!o.config.empty()) spec = corpus_spec_from_json(read_json(o.config));
  spec.seed = o.seed;
  spec.pages = o.pages;
  auto schema = default_schema();
  auto corpus = generate_corpus(spec);
  write_corpus(corpus, o.out, schema);
  std::size_t ads = 0;
  for (const auto& s : corpus.samples) ads += s.label == Label::ad;
  std::printf("generated %zu requests on %zu pages (%zu ads) in %s\n", corpus.samples.size(), spec.pages, ads,
              o.out.c_str());
  return ok;
}

int cmd_train(const Options& o) {
  auto schema = default_schema();
  auto corpus = read_corpus(o.out, schema);
  TrainingConfig cfg;
  cfg.forest.seed = o.seed;
  cfg.surrogate.seed = o.seed;
  auto models = train_models(corpus, schema, cfg);
  save_models(models, fs::path(o.out) / "models");
  std::printf("forest_accuracy=%.4f\nagreement_rate=%.4f\n", models.forest_accuracy, models.agreement);
  return ok;
}

int cmd_attack(const Options& o) {
  auto schema = default_schema();
  auto models = load_models(fs::path(o.out) / "models");
  auto config = attack_config(o);
  UrlPatterns patterns;
  AttackKind kind = parse_attack_kind(o.attack);
  if (!o.graph.empty()) {
    auto graph = load_graph_file(o.graph);
    AttackContext ctx{schema, patterns, models.stats, models.forest, models.surrogate};
    auto outcome = run(kind, ctx, graph, config);
    Sample s{0, graph.request_id(), Label::ad, Split::test, o.graph, graph, outcome.original_vector};
    std::cout << outcome_record(s, outcome, schema, models.stats, 0.0).dump(2) << "\n";
    return ok;
  }
  auto corpus = read_corpus(o.out, schema);
  EvaluationOptions opts;
  opts.attacks = {kind};
  opts.sample = o.sample;
  auto records = evaluate(corpus, models, schema, patterns, config, opts);
  write_outcomes(records, fs::path(o.out) / "outcomes.jsonl");
  std::size_t wins = 0;
  for (const auto& r : records) wins += r.at("status") == "success";
  std::printf("%s: %zu/%zu successful\n", o.attack.c_str(), wins, records.size());
  return ok;
}

int cmd_eval(const Options& o) {
  auto schema = default_schema();
  auto models = load_models(fs::path(o.out) / "models");
  auto corpus = read_corpus(o.out, schema);
  EvaluationOptions opts;
  opts.sample = o.sample;
  auto records = evaluate(corpus, models, schema, UrlPatterns{}, attack_config(o), opts);
  write_outcomes(records, fs::path(o.out) / "outcomes.jsonl");
  auto report = build_report(records, schema);
  write_file((fs::path(o.out) / "report.json").string(), report.dump(2) + "\n");
  write_file((fs::path(o.out) / "report.csv").string(), report_to_csv(report));
  print_report(report);
  return ok;
}

int cmd_report(const Options& o) {
  fs::path dir(o.out);
  nlohmann::json report;
  if (fs::exists(dir / "outcomes.jsonl")) {
    auto records = read_outcomes(dir / "outcomes.jsonl");
    if (records.empty()) throw Error(Errc::empty_report, "outcomes.jsonl has no records");
    report = build_report(records, default_schema());
  } else {
    report = read_json((dir / "report.json").string());
  }
  print_report(report);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Actionable adversarial examples against a graph-feature ad classifier"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen", "Generate the synthetic corpus");
  gen->add_option("--seed", o.seed, "Master seed");
  gen->add_option("--pages", o.pages, "Number of pages")->check(CLI::PositiveNumber);
  gen->add_option("--config", o.config, "Flat JSON overriding corpus parameters");
  gen->add_option("--out", o.out, "Output directory");

  auto* train = app.add_subcommand("train", "Train the target forest and the surrogate");
  train->add_option("--seed", o.seed, "Training seed");
  train->add_option("--out", o.out, "Corpus directory");

  auto add_attack_flags = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Corpus directory");
    sub->add_option("--config", o.config, "Flat JSON attack configuration");
    sub->add_option("--strategies", o.strategies, "Map-back strategies")
        ->check(CLI::IsMember({"centralized", "distributed", "both"}));
    sub->add_option("--sample", o.sample, "Attack a random subset of this size (0: all)");
  };
  auto* attack = app.add_subcommand("attack", "Attack one graph or the whole test split");
  add_attack_flags(attack);
  attack->add_option("--attack", o.attack, "Attack kind")->check(CLI::IsMember({"a4", "strong", "weak"}));
  attack->add_option("--graph", o.graph, "Single graph file to attack");

  auto* eval = app.add_subcommand("eval", "Run all attacks and write the report");
  add_attack_flags(eval);

  auto* report = app.add_subcommand("report", "Summarize report files");
  report->add_option("--out", o.out, "Corpus directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (gen->parsed()) return cmd_gen(o);
    if (train->parsed()) return cmd_train(o);
    if (attack->parsed()) return cmd_attack(o);
    if (eval->parsed()) return cmd_eval(o);
    if (report->parsed()) return cmd_report(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "a4lab: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "a4lab: %s\n", e.what());
    return other;
  }
  return usage;
}
