#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "gansearch/arch_export.hpp"
#include "gansearch/dataset.hpp"
#include "gansearch/genome.hpp"
#include "gansearch/supernet.hpp"
#include "gansearch/wgan.hpp"

namespace gansearch {

// How the critic's complexity term enters its (minimized) fitness:
// kReward   F_D = F_Dq - lambda_D * F_Dc  (default; favors denser critics)
// kPenalize F_D = F_Dq + lambda_D * F_Dc
enum class ComplexitySign { kReward, kPenalize };

struct SearchConfig {
  int population_size = 8;
  int rounds = 10;
  int epochs_per_round = 1;
  int eval_batches = 8;
  double lambda_g = 0.1;
  double lambda_d = 1.5;
  int warmup_epochs = 5;
  double none_bias = 0.5;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  ComplexitySign d_complexity_sign = ComplexitySign::kReward;
  CriticConfig critic;
  OptimHyper hyper;
  int threads = 1;  // fitness evaluation only; never changes results

  // N must be even (N = 1 is accepted as a degenerate no-evolution run);
  // multi-round runs need N >= 4 so reproduction has two parents.
  void validate() const;
};

inline constexpr double kWorstGeneratorFitness = -std::numeric_limits<double>::infinity();
inline constexpr double kWorstDiscriminatorFitness = std::numeric_limits<double>::infinity();

struct Individual {
  Genome genome;
  double quality = 0.0;
  double complexity = 0.0;
  double fitness = 0.0;
  int eval_round = -1;
};

double generator_fitness(double quality, double complexity, double lambda_g);
double discriminator_fitness(double quality, double complexity, double lambda_d,
                             ComplexitySign sign = ComplexitySign::kReward);

struct FitnessParts {
  double quality = 0.0;
  double complexity = 0.0;
  double fitness = 0.0;
};

// quality = mean critic score of the candidate's fakes over the batches (eval
// mode). Non-finite quality becomes the -inf sentinel.
FitnessParts fitness_generator(const Subnet& critic, const Subnet& candidate,
                               const std::vector<GanBatch>& batches, double lambda_g);

// quality = -mean D(a, x) + mean D(a, G*(a, z)) over the batches (eval mode).
// Non-finite quality becomes the +inf sentinel.
FitnessParts fitness_discriminator(const Subnet& candidate, const Subnet& generator,
                                   const std::vector<GanBatch>& batches, double lambda_d,
                                   ComplexitySign sign = ComplexitySign::kReward);

// Generators keep the N/2 largest fitnesses, discriminators the N/2
// smallest. Ties fall back to genome hash, then population index.
std::vector<std::size_t> selection_order(const std::vector<Individual>& population, Role role);
std::vector<Individual> select_parents(const std::vector<Individual>& population, Role role);

struct Offspring {
  std::vector<Genome> genomes;
  int crossovers = 0;
  int mutations = 0;
};

// parents.size() children: each is, with probability 1/2, the crossover of
// two distinct random parents, else a mutation of one random parent.
Offspring reproduce(const SearchSpace& space, const std::vector<Individual>& parents, Rng& rng);

// Hooks around every optimizer step of the search loops. `trained` is the
// store about to be (or just) updated and `genome` the subnet it trains.
struct StepObserver {
  std::function<void(const SupernetParams& trained, const Genome& genome)> before;
  std::function<void(const SupernetParams& trained, const Genome& genome)> after;
};

struct WarmupStats {
  long batches = 0;
  long resampled = 0;  // disconnected draws thrown away
};

// Each batch trains one critic step and one generator step on subnets whose
// edges draw uniformly from all five ops.
WarmupStats warmup(SupernetParams& generator, SupernetParams& critic,
                   const SeenBatchSampler& sampler, int epochs, const CriticConfig& critic_cfg,
                   const OptimHyper& hyper, Rng& rng, TrainingLog* log = nullptr);

struct RoundRecord {
  int round = 0;
  std::vector<Individual> population;
  std::vector<bool> selected;
  std::vector<int> train_slots;  // per candidate, update slots this round
  std::vector<bool> unstable;
  double best = 0.0;
  double mean = 0.0;
  double worst = 0.0;
  int crossovers = 0;
  int mutations = 0;

  nlohmann::json to_json() const;
};

struct SearchResult {
  Role role = Role::kGenerator;
  Individual best;
  std::vector<RoundRecord> rounds;
  double wall_seconds = 0.0;
  ArchReport report;

  // Deterministic summary (no timing).
  nlohmann::json to_json() const;
};

// Stage one: N candidate generators trained many-to-one against the critic
// subnet `fixed_critic`, selected by maximal F_G.
SearchResult search_generator(const SearchConfig& cfg, const SeenBatchSampler& sampler,
                              SupernetParams& generator_supernet,
                              SupernetParams& critic_supernet, const Genome& fixed_critic,
                              Rng& rng, TrainingLog* log = nullptr,
                              const StepObserver* observer = nullptr,
                              std::vector<Genome> initial_population = {});

// Stage two: N candidate critics trained many-to-one against the generator
// subnet `best_generator`, selected by minimal F_D.
SearchResult search_discriminator(const SearchConfig& cfg, const SeenBatchSampler& sampler,
                                  SupernetParams& generator_supernet,
                                  SupernetParams& critic_supernet, const Genome& best_generator,
                                  Rng& rng, TrainingLog* log = nullptr,
                                  const StepObserver* observer = nullptr,
                                  std::vector<Genome> initial_population = {});

}  // namespace gansearch
