#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gansearch/classifier.hpp"
#include "gansearch/dataset.hpp"
#include "gansearch/supernet.hpp"
#include "gansearch/wgan.hpp"

namespace gansearch {

struct ZslMetrics {
  double czsl_acc = 0.0;
  double gzsl_u = 0.0;
  double gzsl_s = 0.0;
  double gzsl_h = 0.0;
};

// 2us/(u+s), or 0 when u+s = 0. Negative inputs are a ParameterError.
double harmonic_mean(double u, double s);

// Mean over the classes present in `truth` of the per-class hit rate.
double per_class_accuracy(std::span<const int> truth, std::span<const int> predicted);

enum class Setting { kCzsl, kGzsl };

// CZSL: the classifier's label space must be exactly the unseen classes and
// only czsl_acc is filled. GZSL: label space must be seen and unseen classes;
// fills gzsl_u, gzsl_s and gzsl_h.
ZslMetrics evaluate(const ZslDataset& ds, const SoftmaxClassifier& classifier, Setting setting);

struct SynthConfig {
  std::size_t per_class = 300;
  double cls_loss_weight = 0.01;
  int final_train_epochs = 1000;

  void validate() const;
};

struct FinalTrainConfig {
  SynthConfig synth;
  CriticConfig critic;
  OptimHyper hyper;
  ActivationConfig activation;
  std::size_t batch_size = 64;
  std::size_t noise_dim = 0;  // 0 means |A|
  ClassifierConfig pretrain;  // auxiliary classifier on seen classes
  std::uint64_t seed = 0;
};

struct TrainedGan {
  StandaloneNet generator;
  StandaloneNet critic;
  long generator_steps = 0;
  long critic_steps = 0;
  StepMetrics last_critic;
  StepMetrics last_generator;
};

// Trains the chosen pair on train_seen with WGAN-GP plus, when
// cls_loss_weight > 0, the NLL of a seen-class softmax classifier on the fakes.
// Networks start from a fresh init unless `generator_init` / `critic_init`
// supply starting weights (they must contain the active pairs).
TrainedGan train_final_gan(const SearchSpace& generator_space, const Genome& generator_genome,
                           const SearchSpace& critic_space, const Genome& critic_genome,
                           const ZslDataset& ds, const FinalTrainConfig& cfg,
                           const SupernetParams* generator_init = nullptr,
                           const SupernetParams* critic_init = nullptr,
                           TrainingLog* log = nullptr);

struct LabeledFeatures {
  Matrix features;
  std::vector<int> labels;
};

// per_class rows G(a^c, z) per class, eval mode, z ~ N(0, I).
LabeledFeatures synthesize(const Subnet& generator, const Matrix& class_attributes,
                           std::span<const int> classes, std::size_t per_class, Rng& rng);

struct ZslEvalConfig {
  std::size_t per_class = 300;
  ClassifierConfig classifier;
  std::uint64_t seed = 0;
};

// Synthesize unseen features, fit the CZSL and GZSL classifiers, evaluate.
ZslMetrics synthesize_and_evaluate(StandaloneNet& generator, const ZslDataset& ds,
                                   const ZslEvalConfig& cfg);

// Diagnostic upper bound: a classifier fitted on real unseen features. Reads
// unseen rows and is never part of the inductive pipeline.
double oracle_czsl_accuracy(const ZslDataset& ds, const ClassifierConfig& cfg,
                            double train_fraction = 0.8);

}  // namespace gansearch
