#include "gansearch/evolution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "gansearch/errors.hpp"

namespace gansearch {

void SearchConfig::validate() const {
  if (population_size < 1) throw ParameterError("population_size must be at least 1");
  if (population_size != 1 && population_size % 2 != 0)
    throw ParameterError("population_size must be even");
  if (rounds < 1 || epochs_per_round < 1 || eval_batches < 1)
    throw ParameterError("rounds, epochs_per_round and eval_batches must be at least 1");
  if (rounds > 1 && population_size != 1 && population_size < 4)
    throw ParameterError("multi-round search needs population_size >= 4 (two parents)");
  if (warmup_epochs < 0) throw ParameterError("warmup_epochs must be nonnegative");
  if (!(none_bias >= 0.0 && none_bias <= 1.0)) throw ParameterError("none_bias must lie in [0,1]");
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  if (threads < 1) throw ParameterError("threads must be at least 1");
  critic.validate();
  hyper.validate();
}

double generator_fitness(double quality, double complexity, double lambda_g) {
  return quality - lambda_g * complexity;
}

double discriminator_fitness(double quality, double complexity, double lambda_d,
                             ComplexitySign sign) {
  return sign == ComplexitySign::kReward ? quality - lambda_d * complexity
                                        : quality + lambda_d * complexity;
}

FitnessParts fitness_generator(const Subnet& critic, const Subnet& candidate,
                               const std::vector<GanBatch>& batches, double lambda_g) {
  FitnessParts parts;
  parts.complexity = complexity(candidate.space(), candidate.genome);
  Rng unused(0);
  double total = 0.0;
  for (const auto& b : batches) {
    const auto fake = subnet_forward(*candidate.params, candidate.genome, b.attrs, b.noise,
                                     Mode::kEval, unused);
    const auto score = subnet_forward(*critic.params, critic.genome, b.attrs, fake.output,
                                      Mode::kEval, unused);
    total += mean(score.output);
  }
  parts.quality = batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
  if (!std::isfinite(parts.quality)) parts.quality = kWorstGeneratorFitness;
  parts.fitness = generator_fitness(parts.quality, parts.complexity, lambda_g);
  return parts;
}

FitnessParts fitness_discriminator(const Subnet& candidate, const Subnet& generator,
                                   const std::vector<GanBatch>& batches, double lambda_d,
                                   ComplexitySign sign) {
  FitnessParts parts;
  parts.complexity = complexity(candidate.space(), candidate.genome);
  Rng unused(0);
  double total = 0.0;
  for (const auto& b : batches) {
    const auto fake = subnet_forward(*generator.params, generator.genome, b.attrs, b.noise,
                                     Mode::kEval, unused);
    const auto real_score = subnet_forward(*candidate.params, candidate.genome, b.attrs, b.real,
                                           Mode::kEval, unused);
    const auto fake_score = subnet_forward(*candidate.params, candidate.genome, b.attrs,
                                           fake.output, Mode::kEval, unused);
    total += -mean(real_score.output) + mean(fake_score.output);
  }
  parts.quality = batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
  if (!std::isfinite(parts.quality)) parts.quality = kWorstDiscriminatorFitness;
  parts.fitness = discriminator_fitness(parts.quality, parts.complexity, lambda_d, sign);
  return parts;
}

std::vector<std::size_t> selection_order(const std::vector<Individual>& population, Role role) {
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint64_t> hashes(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) hashes[i] = population[i].genome.hash();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = population[a].fitness;
    const double fb = population[b].fitness;
    if (fa != fb) return role == Role::kGenerator ? fa > fb : fa < fb;
    if (hashes[a] != hashes[b]) return hashes[a] < hashes[b];
    return a < b;
  });
  return order;
}

std::vector<Individual> select_parents(const std::vector<Individual>& population, Role role) {
  const auto order = selection_order(population, role);
  std::vector<Individual> parents;
  for (std::size_t k = 0; k < population.size() / 2; ++k) parents.push_back(population[order[k]]);
  return parents;
}

Offspring reproduce(const SearchSpace& space, const std::vector<Individual>& parents, Rng& rng) {
  if (parents.size() < 2) throw ParameterError("reproduce needs at least two parents");
  Offspring out;
  const std::size_t n = parents.size();
  while (out.genomes.size() < n) {
    if (rng.bernoulli(0.5)) {
      const std::size_t i = rng.uniform_index(n);
      std::size_t j = rng.uniform_index(n - 1);
      if (j >= i) ++j;
      out.genomes.push_back(crossover(space, parents[i].genome, parents[j].genome, rng));
      ++out.crossovers;
    } else {
      out.genomes.push_back(mutate(space, parents[rng.uniform_index(n)].genome, rng));
      ++out.mutations;
    }
  }
  return out;
}

namespace {

Genome sample_connected_uniform(const SearchSpace& space, Rng& rng, long& resampled) {
  for (;;) {
    Genome g = canonicalize(space, sample_uniform_genome(space, rng));
    if (g.active_edge_count() > 0) return g;
    ++resampled;
  }
}

void observed_step(const StepObserver* observer, const Subnet& trained,
                   const std::function<void()>& step) {
  if (observer != nullptr && observer->before) observer->before(*trained.params, trained.genome);
  step();
  if (observer != nullptr && observer->after) observer->after(*trained.params, trained.genome);
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

WarmupStats warmup(SupernetParams& generator, SupernetParams& critic,
                   const SeenBatchSampler& sampler, int epochs, const CriticConfig& critic_cfg,
                   const OptimHyper& hyper, Rng& rng, TrainingLog* log) {
  WarmupStats stats;
  const std::size_t per_epoch = sampler.batches_per_epoch();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const Subnet g{&generator, sample_connected_uniform(generator.space(), rng, stats.resampled)};
      const Subnet d{&critic, sample_connected_uniform(critic.space(), rng, stats.resampled)};
      const auto batch = sampler.sample(rng);
      ++stats.batches;
      try {
        const auto dm = gan_step(d, g, batch.gan, critic_cfg, Side::kTrainD, hyper, rng);
        const auto gm = gan_step(d, g, batch.gan, critic_cfg, Side::kTrainG, hyper, rng);
        if (log != nullptr) {
          log->append(-1, stats.batches, "warmup", dm);
          log->append(-1, stats.batches, "warmup", gm);
        }
      } catch (const NumericError&) {
        // An unstable draw is skipped; its updates were never applied.
      }
    }
  }
  return stats;
}

nlohmann::json RoundRecord::to_json() const {
  nlohmann::ordered_json j;
  j["round"] = round;
  j["best"] = finite_or_null(best);
  j["mean"] = finite_or_null(mean);
  j["worst"] = finite_or_null(worst);
  j["crossovers"] = crossovers;
  j["mutations"] = mutations;
  nlohmann::ordered_json people = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < population.size(); ++i) {
    const auto& ind = population[i];
    nlohmann::ordered_json p;
    p["hash"] = ind.genome.hash_hex();
    p["quality"] = finite_or_null(ind.quality);
    p["complexity"] = ind.complexity;
    p["fitness"] = finite_or_null(ind.fitness);
    p["selected"] = static_cast<bool>(selected[i]);
    p["train_slots"] = train_slots[i];
    p["unstable"] = static_cast<bool>(unstable[i]);
    people.push_back(std::move(p));
  }
  j["individuals"] = std::move(people);
  return j;
}

nlohmann::json SearchResult::to_json() const {
  nlohmann::ordered_json j;
  j["role"] = role_name(role);
  j["best"] = {{"hash", best.genome.hash_hex()},
               {"quality", finite_or_null(best.quality)},
               {"complexity", best.complexity},
               {"fitness", finite_or_null(best.fitness)},
               {"eval_round", best.eval_round}};
  j["genome"] = report.json;
  nlohmann::ordered_json traj = nlohmann::ordered_json::array();
  for (const auto& r : rounds)
    traj.push_back({{"round", r.round},
                    {"best", finite_or_null(r.best)},
                    {"mean", finite_or_null(r.mean)},
                    {"worst", finite_or_null(r.worst)}});
  j["trajectory"] = std::move(traj);
  j["dot"] = report.dot;
  return j;
}

namespace {

struct Stage {
  Role role;
  SupernetParams* generator;
  SupernetParams* critic;
  Genome opponent;  // the fixed-architecture side
};

template <typename F>
void parallel_for(std::size_t n, int threads, F&& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  for (auto& t : pool) t.join();
}

SearchResult run_stage(const SearchConfig& cfg, const SeenBatchSampler& sampler, const Stage& stage,
                       Rng& rng, TrainingLog* log, const StepObserver* observer,
                       std::vector<Genome> population) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const bool searching_g = stage.role == Role::kGenerator;
  const SearchSpace& space = searching_g ? stage.generator->space() : stage.critic->space();
  const auto n = static_cast<std::size_t>(cfg.population_size);

  Rng init_rng = rng.split(1);
  const Rng train_root = rng.split(2);
  const Rng eval_root = rng.split(3);
  const Rng repro_root = rng.split(4);
  rng();

  if (population.empty()) {
    for (std::size_t i = 0; i < n; ++i) population.push_back(random_genome(space, cfg.none_bias, init_rng));
  }
  if (population.size() != n) throw ParameterError("initial population size differs from N");
  for (const auto& g : population) {
    require_compatible(space, g);
    if (g.active_edge_count() == 0 || !is_canonical(space, g))
      throw ContractViolation("initial population must hold canonical connected genomes");
  }

  const std::size_t slots_per_epoch = std::max<std::size_t>(
      1, sampler.batches_per_epoch() / static_cast<std::size_t>(cfg.critic.n_critic));
  const char* tag = searching_g ? "G" : "D";

  SearchResult result;
  result.role = stage.role;
  long step = 0;
  for (int round = 0; round < cfg.rounds; ++round) {
    RoundRecord rec;
    rec.round = round;
    rec.train_slots.assign(n, 0);
    rec.unstable.assign(n, false);

    Rng train_rng = train_root.split(static_cast<std::uint64_t>(round));
    for (int epoch = 0; epoch < cfg.epochs_per_round; ++epoch) {
      for (std::size_t slot = 0; slot < slots_per_epoch; ++slot) {
        const std::size_t i = train_rng.uniform_index(n);
        ++rec.train_slots[i];
        if (rec.unstable[i]) continue;
        const Subnet g{stage.generator, searching_g ? population[i] : stage.opponent};
        const Subnet d{stage.critic, searching_g ? stage.opponent : population[i]};
        const std::string id = std::string(tag) + std::to_string(i);
        try {
          for (int k = 0; k < cfg.critic.n_critic; ++k) {
            const auto batch = sampler.sample(train_rng);
            observed_step(observer, d, [&] {
              const auto m = gan_step(d, g, batch.gan, cfg.critic, Side::kTrainD, cfg.hyper, train_rng);
              if (log != nullptr) log->append(round, ++step, id, m);
            });
          }
          const auto batch = sampler.sample(train_rng);
          observed_step(observer, g, [&] {
            const auto m = gan_step(d, g, batch.gan, cfg.critic, Side::kTrainG, cfg.hyper, train_rng);
            if (log != nullptr) log->append(round, ++step, id, m);
          });
        } catch (const NumericError&) {
          rec.unstable[i] = true;
        }
      }
    }

    // Every candidate sees the same evaluation batches.
    Rng eval_rng = eval_root.split(static_cast<std::uint64_t>(round));
    std::vector<GanBatch> batches;
    for (int b = 0; b < cfg.eval_batches; ++b)
      batches.push_back(searching_g ? sampler.sample_conditioning(eval_rng)
                                    : sampler.sample(eval_rng).gan);

    rec.population.resize(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      Individual ind{population[i]};
      ind.eval_round = round;
      FitnessParts parts;
      if (searching_g) {
        parts = fitness_generator(Subnet{stage.critic, stage.opponent},
                                  Subnet{stage.generator, population[i]}, batches, cfg.lambda_g);
        if (rec.unstable[i]) parts.quality = kWorstGeneratorFitness;
        parts.fitness = generator_fitness(parts.quality, parts.complexity, cfg.lambda_g);
      } else {
        parts = fitness_discriminator(Subnet{stage.critic, population[i]},
                                      Subnet{stage.generator, stage.opponent}, batches,
                                      cfg.lambda_d, cfg.d_complexity_sign);
        if (rec.unstable[i]) parts.quality = kWorstDiscriminatorFitness;
        parts.fitness = discriminator_fitness(parts.quality, parts.complexity, cfg.lambda_d,
                                              cfg.d_complexity_sign);
      }
      ind.quality = parts.quality;
      ind.complexity = parts.complexity;
      ind.fitness = parts.fitness;
      rec.population[i] = std::move(ind);
    });

    const auto order = selection_order(rec.population, stage.role);
    rec.best = rec.population[order.front()].fitness;
    rec.worst = rec.population[order.back()].fitness;
    rec.mean = 0.0;
    for (const auto& ind : rec.population) rec.mean += ind.fitness / static_cast<double>(n);
    rec.selected.assign(n, false);
    const std::size_t keep = std::max<std::size_t>(1, n / 2);
    std::vector<Individual> parents;
    for (std::size_t k = 0; k < keep; ++k) {
      rec.selected[order[k]] = true;
      parents.push_back(rec.population[order[k]]);
    }

    if (round + 1 < cfg.rounds && n >= 4) {
      Rng repro_rng = repro_root.split(static_cast<std::uint64_t>(round));
      auto offspring = reproduce(space, parents, repro_rng);
      rec.crossovers = offspring.crossovers;
      rec.mutations = offspring.mutations;
      population.clear();
      for (const auto& p : parents) population.push_back(p.genome);
      for (auto& g : offspring.genomes) population.push_back(std::move(g));
    }
    result.rounds.push_back(std::move(rec));
  }

  const auto& last = result.rounds.back();
  result.best = last.population[selection_order(last.population, stage.role).front()];
  result.report = export_arch(space, result.best.genome);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace

SearchResult search_generator(const SearchConfig& cfg, const SeenBatchSampler& sampler,
                              SupernetParams& generator_supernet,
                              SupernetParams& critic_supernet, const Genome& fixed_critic,
                              Rng& rng, TrainingLog* log, const StepObserver* observer,
                              std::vector<Genome> initial_population) {
  require_compatible(critic_supernet.space(), fixed_critic);
  return run_stage(cfg, sampler,
                   Stage{Role::kGenerator, &generator_supernet, &critic_supernet, fixed_critic},
                   rng, log, observer, std::move(initial_population));
}

SearchResult search_discriminator(const SearchConfig& cfg, const SeenBatchSampler& sampler,
                                  SupernetParams& generator_supernet,
                                  SupernetParams& critic_supernet, const Genome& best_generator,
                                  Rng& rng, TrainingLog* log, const StepObserver* observer,
                                  std::vector<Genome> initial_population) {
  require_compatible(generator_supernet.space(), best_generator);
  return run_stage(cfg, sampler,
                   Stage{Role::kDiscriminator, &generator_supernet, &critic_supernet, best_generator},
                   rng, log, observer, std::move(initial_population));
}

}  // namespace gansearch
