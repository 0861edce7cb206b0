#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gansearch/classifier.hpp"
#include "gansearch/dataset.hpp"
#include "gansearch/evolution.hpp"
#include "gansearch/zsl.hpp"

namespace gansearch {

struct RunConfig {
  std::uint64_t seed = 1;
  std::string dataset;  // bundle directory; empty means the synthetic spec
  std::string out_dir = "out";
  SyntheticSpec synthetic;
  SearchConfig search;
  CriticConfig critic;
  OptimHyper hyper;
  ActivationConfig activation;
  SynthConfig synth;
  ClassifierConfig classifier;
  std::vector<std::size_t> generator_dims;  // empty means scaled defaults
  std::vector<std::size_t> discriminator_dims;
  double init_scale = 1.0;
  bool reuse_supernet_weights = false;

  void validate() const;
};

// Missing keys keep their defaults; unknown keys and wrong types throw
// ParameterError.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

ZslDataset load_or_generate(const RunConfig& cfg);

struct SpacePair {
  SearchSpace generator;
  SearchSpace discriminator;
};

SpacePair make_spaces(const RunConfig& cfg, const ZslDataset& ds);

// Stage-specific copies of the shared settings, seeds derived from cfg.seed.
SearchConfig effective_search_config(const RunConfig& cfg);
FinalTrainConfig effective_final_config(const RunConfig& cfg);
ZslEvalConfig effective_eval_config(const RunConfig& cfg);

enum class StageSelect { kAll, kGenerator, kDiscriminator };

StageSelect stage_from_name(const std::string& name);

struct SearchRunOutcome {
  std::optional<SearchResult> generator;
  std::optional<SearchResult> discriminator;
  WarmupStats warmup;
  AccessCounts access;  // dataset reads during the whole command
};

// Output files, all written under cfg.out_dir.
inline constexpr const char* kConfigEcho = "config.json";
inline constexpr const char* kWarmupCheckpoint = "warmup.ckpt";
inline constexpr const char* kGeneratorStageCheckpoint = "generator_stage.ckpt";
inline constexpr const char* kFinalSupernetCheckpoint = "supernets.ckpt";
inline constexpr const char* kGeneratorResult = "search_generator.json";
inline constexpr const char* kDiscriminatorResult = "search_discriminator.json";
inline constexpr const char* kGeneratorDot = "generator.dot";
inline constexpr const char* kDiscriminatorDot = "discriminator.dot";
inline constexpr const char* kGeneratorRounds = "rounds_generator.jsonl";
inline constexpr const char* kDiscriminatorRounds = "rounds_discriminator.jsonl";
inline constexpr const char* kTrainLog = "train_log.csv";
inline constexpr const char* kTiming = "timing.json";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kMetricsTable = "metrics.txt";

// Warm-up, generator search, discriminator search. kGenerator stops after
// stage one and checkpoints both supernets; kDiscriminator resumes from that
// checkpoint and the stored generator winner.
SearchRunOutcome run_search(const RunConfig& cfg, const ZslDataset& ds,
                            StageSelect stage = StageSelect::kAll);

enum class EvalMode { kSearched, kBaseline, kOracle };

struct TrainEvalOutcome {
  EvalMode mode = EvalMode::kSearched;
  ZslMetrics metrics;
  std::string generator_hash;
  std::string discriminator_hash;
  AccessCounts before_eval;  // reads before synthesis and evaluation
  double train_seconds = 0.0;
  nlohmann::ordered_json to_json() const;
  std::string table() const;
};

// kSearched reads the winners from cfg.out_dir. kOracle skips the GAN and
// fits the CZSL classifier on real unseen features (diagnostic only).
TrainEvalOutcome run_train_eval(const RunConfig& cfg, const ZslDataset& ds, EvalMode mode);

// Loads a genome from a SearchResult JSON or a plain genome JSON.
std::pair<SearchSpace, Genome> load_genome_file(const std::filesystem::path& path);

}  // namespace gansearch
