#include "gansearch/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "gansearch/arch_export.hpp"
#include "gansearch/checkpoint.hpp"
#include "gansearch/errors.hpp"

namespace gansearch {
namespace {

using Json = nlohmann::json;

// Reads the fields of one config object, rejecting keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ParameterError(where_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& into) {
    known_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      into = it->template get<T>();
    } catch (const Json::exception& e) {
      throw ParameterError(where_ + "." + key + ": " + e.what());
    }
  }

  const Json* child(const char* key) {
    known_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!known_.contains(key)) throw ParameterError(where_ + ": unknown key '" + key + "'");
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> known_;
};

std::string sign_name(ComplexitySign s) { return s == ComplexitySign::kReward ? "reward" : "penalize"; }

ComplexitySign sign_from_name(const std::string& s) {
  if (s == "reward") return ComplexitySign::kReward;
  if (s == "penalize") return ComplexitySign::kPenalize;
  throw ParameterError("search.d_complexity_sign must be 'reward' or 'penalize'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

enum : std::uint64_t {
  kStreamWarmup = 10,
  kStreamGeneratorSearch = 11,
  kStreamDiscriminatorSearch = 12,
  kStreamSupernetInit = 13,
  kStreamFinalTrain = 14,
  kStreamEval = 15,
  kStreamClassifier = 16,
};

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream) { return Rng(seed).split(stream)(); }

}  // namespace

void RunConfig::validate() const {
  if (dataset.empty()) synthetic.validate();
  search.validate();
  critic.validate();
  hyper.validate();
  synth.validate();
  if (!(activation.leaky_slope >= 0.0 && activation.leaky_slope < 1.0))
    throw ParameterError("activation.leaky_slope must lie in [0,1)");
  if (!(activation.dropout_rate >= 0.0 && activation.dropout_rate < 1.0))
    throw ParameterError("activation.dropout_rate must lie in [0,1)");
  if (classifier.epochs < 1 || classifier.batch_size == 0 || !(classifier.learning_rate > 0.0))
    throw ParameterError("classifier needs epochs >= 1, batch_size >= 1 and learning_rate > 0");
  if (!(init_scale > 0.0)) throw ParameterError("init_scale must be positive");
  if (out_dir.empty()) throw ParameterError("out_dir must not be empty");
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig cfg;
  ObjectReader top(j, "config");
  top.read("seed", cfg.seed);
  top.read("dataset", cfg.dataset);
  top.read("out_dir", cfg.out_dir);
  top.read("generator_dims", cfg.generator_dims);
  top.read("discriminator_dims", cfg.discriminator_dims);
  top.read("init_scale", cfg.init_scale);
  top.read("reuse_supernet_weights", cfg.reuse_supernet_weights);
  if (const Json* s = top.child("synthetic")) {
    ObjectReader r(*s, "synthetic");
    r.read("seen", cfg.synthetic.seen);
    r.read("unseen", cfg.synthetic.unseen);
    r.read("attr_dim", cfg.synthetic.attr_dim);
    r.read("feature_dim", cfg.synthetic.feature_dim);
    r.read("samples_per_class", cfg.synthetic.samples_per_class);
    r.read("noise_sigma", cfg.synthetic.noise_sigma);
    r.read("seed", cfg.synthetic.seed);
    r.finish();
  }
  if (const Json* s = top.child("search")) {
    ObjectReader r(*s, "search");
    std::string sign = sign_name(cfg.search.d_complexity_sign);
    r.read("population_size", cfg.search.population_size);
    r.read("rounds", cfg.search.rounds);
    r.read("epochs_per_round", cfg.search.epochs_per_round);
    r.read("eval_batches", cfg.search.eval_batches);
    r.read("lambda_g", cfg.search.lambda_g);
    r.read("lambda_d", cfg.search.lambda_d);
    r.read("warmup_epochs", cfg.search.warmup_epochs);
    r.read("none_bias", cfg.search.none_bias);
    r.read("batch_size", cfg.search.batch_size);
    r.read("d_complexity_sign", sign);
    r.finish();
    cfg.search.d_complexity_sign = sign_from_name(sign);
  }
  if (const Json* s = top.child("critic")) {
    ObjectReader r(*s, "critic");
    r.read("n_critic", cfg.critic.n_critic);
    r.read("gp_weight", cfg.critic.gp_weight);
    r.finish();
  }
  if (const Json* s = top.child("optim")) {
    ObjectReader r(*s, "optim");
    r.read("learning_rate", cfg.hyper.learning_rate);
    r.read("beta1", cfg.hyper.beta1);
    r.read("beta2", cfg.hyper.beta2);
    r.read("epsilon", cfg.hyper.epsilon);
    r.finish();
  }
  if (const Json* s = top.child("activation")) {
    ObjectReader r(*s, "activation");
    r.read("leaky_slope", cfg.activation.leaky_slope);
    r.read("dropout_rate", cfg.activation.dropout_rate);
    r.finish();
  }
  if (const Json* s = top.child("synth")) {
    ObjectReader r(*s, "synth");
    r.read("per_class", cfg.synth.per_class);
    r.read("cls_loss_weight", cfg.synth.cls_loss_weight);
    r.read("final_train_epochs", cfg.synth.final_train_epochs);
    r.finish();
  }
  if (const Json* s = top.child("classifier")) {
    ObjectReader r(*s, "classifier");
    r.read("epochs", cfg.classifier.epochs);
    r.read("learning_rate", cfg.classifier.learning_rate);
    r.read("batch_size", cfg.classifier.batch_size);
    r.read("beta1", cfg.classifier.beta1);
    r.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["dataset"] = cfg.dataset;
  j["out_dir"] = cfg.out_dir;
  j["synthetic"] = {{"seen", cfg.synthetic.seen},
                    {"unseen", cfg.synthetic.unseen},
                    {"attr_dim", cfg.synthetic.attr_dim},
                    {"feature_dim", cfg.synthetic.feature_dim},
                    {"samples_per_class", cfg.synthetic.samples_per_class},
                    {"noise_sigma", cfg.synthetic.noise_sigma},
                    {"seed", cfg.synthetic.seed}};
  j["search"] = {{"population_size", cfg.search.population_size},
                 {"rounds", cfg.search.rounds},
                 {"epochs_per_round", cfg.search.epochs_per_round},
                 {"eval_batches", cfg.search.eval_batches},
                 {"lambda_g", cfg.search.lambda_g},
                 {"lambda_d", cfg.search.lambda_d},
                 {"warmup_epochs", cfg.search.warmup_epochs},
                 {"none_bias", cfg.search.none_bias},
                 {"batch_size", cfg.search.batch_size},
                 {"d_complexity_sign", sign_name(cfg.search.d_complexity_sign)}};
  j["critic"] = {{"n_critic", cfg.critic.n_critic}, {"gp_weight", cfg.critic.gp_weight}};
  j["optim"] = {{"learning_rate", cfg.hyper.learning_rate},
                {"beta1", cfg.hyper.beta1},
                {"beta2", cfg.hyper.beta2},
                {"epsilon", cfg.hyper.epsilon}};
  j["activation"] = {{"leaky_slope", cfg.activation.leaky_slope},
                     {"dropout_rate", cfg.activation.dropout_rate}};
  j["synth"] = {{"per_class", cfg.synth.per_class},
                {"cls_loss_weight", cfg.synth.cls_loss_weight},
                {"final_train_epochs", cfg.synth.final_train_epochs}};
  j["classifier"] = {{"epochs", cfg.classifier.epochs},
                     {"learning_rate", cfg.classifier.learning_rate},
                     {"batch_size", cfg.classifier.batch_size},
                     {"beta1", cfg.classifier.beta1}};
  j["generator_dims"] = cfg.generator_dims;
  j["discriminator_dims"] = cfg.discriminator_dims;
  j["init_scale"] = cfg.init_scale;
  j["reuse_supernet_weights"] = cfg.reuse_supernet_weights;
  return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ParameterError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

ZslDataset load_or_generate(const RunConfig& cfg) {
  return cfg.dataset.empty() ? gen_synthetic(cfg.synthetic) : load_dataset(cfg.dataset);
}

SpacePair make_spaces(const RunConfig& cfg, const ZslDataset& ds) {
  const std::size_t a = ds.attr_dim();
  const std::size_t d = ds.feature_dim();
  auto gdims = cfg.generator_dims.empty() ? SearchSpace::scaled_node_dims(Role::kGenerator, d)
                                          : cfg.generator_dims;
  auto ddims = cfg.discriminator_dims.empty()
                   ? SearchSpace::scaled_node_dims(Role::kDiscriminator, d)
                   : cfg.discriminator_dims;
  if (gdims.empty() || gdims.back() != d)
    throw ParameterError("generator_dims must end with the feature dimension");
  return {SearchSpace::generator(a, a, std::move(gdims)),
          SearchSpace::discriminator(a, d, std::move(ddims))};
}

SearchConfig effective_search_config(const RunConfig& cfg) {
  SearchConfig s = cfg.search;
  s.critic = cfg.critic;
  s.hyper = cfg.hyper;
  s.seed = cfg.seed;
  return s;
}

FinalTrainConfig effective_final_config(const RunConfig& cfg) {
  FinalTrainConfig f;
  f.synth = cfg.synth;
  f.critic = cfg.critic;
  f.hyper = cfg.hyper;
  f.activation = cfg.activation;
  f.batch_size = cfg.search.batch_size;
  f.pretrain = cfg.classifier;
  f.pretrain.seed = derived_seed(cfg.seed, kStreamClassifier);
  f.seed = derived_seed(cfg.seed, kStreamFinalTrain);
  return f;
}

ZslEvalConfig effective_eval_config(const RunConfig& cfg) {
  ZslEvalConfig e;
  e.per_class = cfg.synth.per_class;
  e.classifier = cfg.classifier;
  e.classifier.seed = derived_seed(cfg.seed, kStreamClassifier);
  e.seed = derived_seed(cfg.seed, kStreamEval);
  return e;
}

StageSelect stage_from_name(const std::string& name) {
  if (name == "all") return StageSelect::kAll;
  if (name == "generator") return StageSelect::kGenerator;
  if (name == "discriminator") return StageSelect::kDiscriminator;
  throw ParameterError("stage must be all, generator or discriminator");
}

SearchRunOutcome run_search(const RunConfig& cfg, const ZslDataset& ds, StageSelect stage) {
  cfg.validate();
  const std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  write_text(out / kConfigEcho, dump(run_config_to_json(cfg)));

  const SearchConfig scfg = effective_search_config(cfg);
  const SpacePair spaces = make_spaces(cfg, ds);
  const SeenBatchSampler sampler(ds, scfg.batch_size, ds.attr_dim());
  ds.reset_access_counts();

  SearchRunOutcome outcome;
  nlohmann::ordered_json timing;
  Rng root(cfg.seed);

  std::ofstream train_log_file(out / kTrainLog,
                               stage == StageSelect::kDiscriminator ? std::ios::app : std::ios::trunc);
  TrainingLog train_log(&train_log_file);

  std::optional<SupernetParams> gen_super;
  std::optional<SupernetParams> critic_super;
  Genome best_generator;

  if (stage != StageSelect::kDiscriminator) {
    Rng init_rng = root.split(kStreamSupernetInit);
    gen_super = init_supernet(spaces.generator, init_rng, cfg.init_scale, cfg.activation);
    critic_super = init_supernet(spaces.discriminator, init_rng, cfg.init_scale, cfg.activation);

    auto t0 = std::chrono::steady_clock::now();
    Rng warm_rng = root.split(kStreamWarmup);
    outcome.warmup = warmup(*gen_super, *critic_super, sampler, scfg.warmup_epochs, scfg.critic,
                            scfg.hyper, warm_rng, &train_log);
    timing["warmup_seconds"] = seconds_since(t0);
    save_checkpoint(out / kWarmupCheckpoint, {&*gen_super, &*critic_super});

    std::ofstream rounds(out / kGeneratorRounds, std::ios::trunc);
    Rng g_rng = root.split(kStreamGeneratorSearch);
    auto result = search_generator(scfg, sampler, *gen_super, *critic_super,
                                   fixed_clswgan_discriminator(spaces.discriminator), g_rng,
                                   &train_log);
    for (const auto& r : result.rounds) rounds << r.to_json().dump() << "\n";
    write_text(out / kGeneratorResult, result.to_json().dump(2) + "\n");
    write_text(out / kGeneratorDot, result.report.dot);
    timing["generator_search_seconds"] = result.wall_seconds;
    best_generator = result.best.genome;
    outcome.generator = std::move(result);
    if (stage == StageSelect::kGenerator)
      save_checkpoint(out / kGeneratorStageCheckpoint, {&*gen_super, &*critic_super});
  } else {
    auto nets = load_checkpoint(out / kGeneratorStageCheckpoint);
    if (nets.size() != 2 || !(nets[0].space() == spaces.generator) ||
        !(nets[1].space() == spaces.discriminator))
      throw FormatError("generator-stage checkpoint does not match the configured spaces");
    gen_super = std::move(nets[0]);
    critic_super = std::move(nets[1]);
    const auto j = Json::parse(read_text(out / kGeneratorResult));
    best_generator = genome_from_json(j.at("genome"), spaces.generator);
  }

  if (stage != StageSelect::kGenerator) {
    std::ofstream rounds(out / kDiscriminatorRounds, std::ios::trunc);
    Rng d_rng = root.split(kStreamDiscriminatorSearch);
    auto result = search_discriminator(scfg, sampler, *gen_super, *critic_super, best_generator,
                                       d_rng, &train_log);
    for (const auto& r : result.rounds) rounds << r.to_json().dump() << "\n";
    write_text(out / kDiscriminatorResult, result.to_json().dump(2) + "\n");
    write_text(out / kDiscriminatorDot, result.report.dot);
    timing["discriminator_search_seconds"] = result.wall_seconds;
    outcome.discriminator = std::move(result);
    if (cfg.reuse_supernet_weights)
      save_checkpoint(out / kFinalSupernetCheckpoint, {&*gen_super, &*critic_super});
  }

  outcome.access = ds.access_counts();
  timing["unseen_rows_read"] = outcome.access.unseen_rows;
  write_text(out / kTiming, dump(timing));
  if (outcome.access.unseen_rows != 0)
    throw ContractViolation("search read unseen-class feature rows");
  return outcome;
}

std::pair<SearchSpace, Genome> load_genome_file(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("genome")) return genome_and_space_from_json(j.at("genome"));
  return genome_and_space_from_json(j);
}

nlohmann::ordered_json TrainEvalOutcome::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = mode == EvalMode::kSearched ? "searched" : mode == EvalMode::kBaseline ? "baseline" : "oracle";
  j["czsl_acc"] = metrics.czsl_acc;
  if (mode != EvalMode::kOracle) {
    j["gzsl_u"] = metrics.gzsl_u;
    j["gzsl_s"] = metrics.gzsl_s;
    j["gzsl_h"] = metrics.gzsl_h;
    j["generator"] = generator_hash;
    j["discriminator"] = discriminator_hash;
    j["unseen_rows_read_before_eval"] = before_eval.unseen_rows;
  }
  return j;
}

std::string TrainEvalOutcome::table() const {
  char buf[256];
  std::string s;
  std::snprintf(buf, sizeof buf, "%-10s %8s %8s %8s %8s\n", "mode", "CZSL", "U", "S", "H");
  s += buf;
  const char* name = mode == EvalMode::kSearched ? "searched" : mode == EvalMode::kBaseline ? "baseline" : "oracle";
  if (mode == EvalMode::kOracle) {
    std::snprintf(buf, sizeof buf, "%-10s %8.2f %8s %8s %8s\n", name, 100.0 * metrics.czsl_acc, "-", "-", "-");
  } else {
    std::snprintf(buf, sizeof buf, "%-10s %8.2f %8.2f %8.2f %8.2f\n", name, 100.0 * metrics.czsl_acc,
                  100.0 * metrics.gzsl_u, 100.0 * metrics.gzsl_s, 100.0 * metrics.gzsl_h);
  }
  s += buf;
  return s;
}

TrainEvalOutcome run_train_eval(const RunConfig& cfg, const ZslDataset& ds, EvalMode mode) {
  cfg.validate();
  const std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);

  TrainEvalOutcome outcome;
  outcome.mode = mode;
  if (mode == EvalMode::kOracle) {
    ClassifierConfig cc = cfg.classifier;
    cc.seed = derived_seed(cfg.seed, kStreamClassifier);
    outcome.metrics.czsl_acc = oracle_czsl_accuracy(ds, cc);
  } else {
    const SpacePair spaces = make_spaces(cfg, ds);
    Genome g;
    Genome d;
    if (mode == EvalMode::kBaseline) {
      g = fixed_clswgan_generator(spaces.generator);
      d = fixed_clswgan_discriminator(spaces.discriminator);
    } else {
      g = genome_from_json(Json::parse(read_text(out / kGeneratorResult)).at("genome"), spaces.generator);
      d = genome_from_json(Json::parse(read_text(out / kDiscriminatorResult)).at("genome"),
                           spaces.discriminator);
    }
    std::vector<SupernetParams> init;
    if (cfg.reuse_supernet_weights && mode == EvalMode::kSearched) {
      init = load_checkpoint(out / kFinalSupernetCheckpoint);
      if (init.size() != 2) throw FormatError("supernet checkpoint must hold two networks");
    }
    ds.reset_access_counts();
    const auto t0 = std::chrono::steady_clock::now();
    auto gan = train_final_gan(spaces.generator, g, spaces.discriminator, d, ds,
                               effective_final_config(cfg), init.empty() ? nullptr : &init[0],
                               init.empty() ? nullptr : &init[1]);
    outcome.train_seconds = seconds_since(t0);
    outcome.before_eval = ds.access_counts();
    if (outcome.before_eval.unseen_rows != 0)
      throw ContractViolation("final training read unseen-class feature rows");
    outcome.metrics = synthesize_and_evaluate(gan.generator, ds, effective_eval_config(cfg));
    outcome.generator_hash = g.hash_hex();
    outcome.discriminator_hash = d.hash_hex();
  }
  write_text(out / kMetrics, dump(outcome.to_json()));
  write_text(out / kMetricsTable, outcome.table());
  return outcome;
}

}  // namespace gansearch
