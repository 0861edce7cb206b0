#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gansearch/arch_export.hpp"
#include "gansearch/errors.hpp"
#include "gansearch/pipeline.hpp"

namespace {

using namespace gansearch;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.out_dir = g.out;
  if (const char* env = std::getenv("GANSEARCH_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) cfg.search.threads = n;
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolutionary GAN architecture search for zero-shot learning"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions global;
  app.add_option("--config", global.config, "Run configuration (JSON)");
  app.add_option("--seed", global.seed, "Root seed");
  app.add_option("--out", global.out, "Output directory");

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset bundle");
  SyntheticSpec spec;
  gen->add_option("--seen", spec.seen, "Seen classes");
  gen->add_option("--unseen", spec.unseen, "Unseen classes");
  gen->add_option("--attr-dim", spec.attr_dim, "Attribute dimension");
  gen->add_option("--feature-dim", spec.feature_dim, "Feature dimension");
  gen->add_option("--per-class", spec.samples_per_class, "Samples per class");
  gen->add_option("--sigma", spec.noise_sigma, "Feature noise standard deviation");

  auto* search = app.add_subcommand("search", "Warm-up, generator search, discriminator search");
  std::string stage = "all";
  search->add_option("--stage", stage, "all, generator or discriminator (resume)")
      ->check(CLI::IsMember({"all", "generator", "discriminator"}));

  auto* train = app.add_subcommand("train-eval", "Train the chosen pair and evaluate ZSL");
  bool baseline = false;
  bool oracle = false;
  bool reuse = false;
  train->add_flag("--baseline", baseline, "Use the fixed CLSWGAN-style pair");
  train->add_flag("--oracle", oracle, "Diagnostic: classifier on real unseen features");
  train->add_flag("--reuse-supernet-weights", reuse, "Start from the searched supernet weights");

  auto* export_cmd = app.add_subcommand("export-arch", "Print a genome as DOT or architecture JSON");
  std::string genome_file;
  bool as_json = false;
  export_cmd->add_option("genome", genome_file, "SearchResult or genome JSON")->required();
  export_cmd->add_flag("--json", as_json, "Print the architecture report JSON instead of DOT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      if (global.seed) spec.seed = *global.seed;
      spec.validate();
      const std::string out = global.out.empty() ? "data" : global.out;
      save_dataset(gen_synthetic(spec), out);
      std::cout << "wrote dataset bundle to " << out << "\n";
    } else if (search->parsed()) {
      const RunConfig cfg = resolve_config(global);
      const ZslDataset ds = load_or_generate(cfg);
      const auto outcome = run_search(cfg, ds, stage_from_name(stage));
      if (outcome.generator)
        std::cout << "generator winner " << outcome.generator->best.genome.hash_hex()
                  << " fitness " << outcome.generator->best.fitness << "\n";
      if (outcome.discriminator)
        std::cout << "discriminator winner " << outcome.discriminator->best.genome.hash_hex()
                  << " fitness " << outcome.discriminator->best.fitness << "\n";
    } else if (train->parsed()) {
      if (baseline && oracle) throw ParameterError("--baseline and --oracle are exclusive");
      RunConfig cfg = resolve_config(global);
      if (reuse) cfg.reuse_supernet_weights = true;
      const ZslDataset ds = load_or_generate(cfg);
      const EvalMode mode = oracle ? EvalMode::kOracle : baseline ? EvalMode::kBaseline : EvalMode::kSearched;
      std::cout << run_train_eval(cfg, ds, mode).table();
    } else if (export_cmd->parsed()) {
      const auto [space, genome] = load_genome_file(genome_file);
      const Genome canonical = canonicalize(space, genome);
      const auto report = export_arch(space, canonical);
      std::cout << (as_json ? report.json.dump(2) + "\n" : report.dot);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
