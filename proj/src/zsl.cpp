#include "gansearch/zsl.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "gansearch/errors.hpp"

namespace gansearch {

double harmonic_mean(double u, double s) {
  if (u < 0.0 || s < 0.0) throw ParameterError("harmonic_mean: inputs must be nonnegative");
  if (u + s == 0.0) return 0.0;
  return 2.0 * u * s / (u + s);
}

double per_class_accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw DimensionError("per_class_accuracy: length mismatch");
  if (truth.empty()) throw ParameterError("per_class_accuracy: empty test partition");
  std::map<int, std::pair<double, double>> tally;  // class -> (hits, count)
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& t = tally[truth[i]];
    t.second += 1.0;
    if (predicted[i] == truth[i]) t.first += 1.0;
  }
  double acc = 0.0;
  for (const auto& [cls, t] : tally) acc += t.first / t.second;
  return acc / static_cast<double>(tally.size());
}

namespace {

bool same_set(std::vector<int> a, std::vector<int> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

double accuracy_on(const ZslDataset& ds, const SoftmaxClassifier& clf,
                   const std::vector<std::size_t>& partition) {
  if (partition.empty()) throw ParameterError("evaluate: empty test partition");
  const Matrix x = ds.feature_rows(partition);
  const auto truth = ds.labels_of(partition);
  return per_class_accuracy(truth, clf.predict(x));
}

}  // namespace

ZslMetrics evaluate(const ZslDataset& ds, const SoftmaxClassifier& classifier, Setting setting) {
  ZslMetrics m;
  if (setting == Setting::kCzsl) {
    if (!same_set(classifier.label_space(), ds.unseen_classes()))
      throw ParameterError("evaluate: CZSL needs a classifier over the unseen classes");
    m.czsl_acc = accuracy_on(ds, classifier, ds.test_unseen());
    return m;
  }
  std::vector<int> joint = ds.seen_classes();
  joint.insert(joint.end(), ds.unseen_classes().begin(), ds.unseen_classes().end());
  if (!same_set(classifier.label_space(), joint))
    throw ParameterError("evaluate: GZSL needs a classifier over seen and unseen classes");
  m.gzsl_u = accuracy_on(ds, classifier, ds.test_unseen());
  m.gzsl_s = accuracy_on(ds, classifier, ds.test_seen());
  m.gzsl_h = harmonic_mean(m.gzsl_u, m.gzsl_s);
  return m;
}

void SynthConfig::validate() const {
  if (per_class < 1) throw ParameterError("synth per_class must be at least 1");
  if (!(cls_loss_weight >= 0.0)) throw ParameterError("cls_loss_weight must be nonnegative");
  if (final_train_epochs < 0) throw ParameterError("final_train_epochs must be nonnegative");
}

namespace {

StandaloneNet starting_net(const SearchSpace& space, const Genome& genome, const SupernetParams* init,
                           Rng& rng, const ActivationConfig& act) {
  if (init == nullptr) return init_standalone(space, genome, rng, 1.0, act);
  if (!(init->space() == space)) throw ParameterError("initial weights belong to a different space");
  StandaloneNet net = extract_standalone(*init, genome);
  // Optimizer state restarts with the new training run.
  for (auto& layer : net.params.layers()) {
    if (!layer.materialized()) continue;
    layer.weight_state = AdamState::zeros_like(layer.weight);
    layer.bias_state = AdamState::zeros_like(layer.bias);
  }
  return net;
}

}  // namespace

TrainedGan train_final_gan(const SearchSpace& generator_space, const Genome& generator_genome,
                           const SearchSpace& critic_space, const Genome& critic_genome,
                           const ZslDataset& ds, const FinalTrainConfig& cfg,
                           const SupernetParams* generator_init, const SupernetParams* critic_init,
                           TrainingLog* log) {
  cfg.synth.validate();
  cfg.critic.validate();
  cfg.hyper.validate();
  const std::size_t noise_dim = cfg.noise_dim == 0 ? ds.attr_dim() : cfg.noise_dim;
  if (generator_space.attr_dim() != ds.attr_dim() || critic_space.attr_dim() != ds.attr_dim() ||
      generator_space.second_dim() != noise_dim || critic_space.second_dim() != ds.feature_dim() ||
      generator_space.output_dim() != ds.feature_dim())
    throw DimensionError("train_final_gan: search spaces do not match the dataset dimensions");

  Rng root(cfg.seed);
  Rng init_rng = root.split(1);
  Rng data_rng = root.split(2);
  Rng step_rng = root.split(3);

  TrainedGan out{starting_net(generator_space, generator_genome, generator_init, init_rng, cfg.activation),
                 starting_net(critic_space, critic_genome, critic_init, init_rng, cfg.activation),
                 0, 0, StepMetrics{}, StepMetrics{}};

  const SeenBatchSampler sampler(ds, cfg.batch_size, noise_dim);

  std::optional<SoftmaxClassifier> seen_clf;
  if (cfg.synth.cls_loss_weight > 0.0) {
    const Matrix x = ds.feature_rows(ds.train_seen());
    ClassifierConfig pre = cfg.pretrain;
    pre.seed = root.split(4).key();
    seen_clf.emplace(train_classifier(x, ds.labels_of(ds.train_seen()), ds.seen_classes(), pre));
  }

  const Subnet g = out.generator.view();
  const Subnet d = out.critic.view();
  const std::size_t slots = std::max<std::size_t>(
      1, sampler.batches_per_epoch() / static_cast<std::size_t>(cfg.critic.n_critic));
  for (int epoch = 0; epoch < cfg.synth.final_train_epochs; ++epoch) {
    for (std::size_t slot = 0; slot < slots; ++slot) {
      for (int k = 0; k < cfg.critic.n_critic; ++k) {
        const auto batch = sampler.sample(data_rng);
        out.last_critic = gan_step(d, g, batch.gan, cfg.critic, Side::kTrainD, cfg.hyper, step_rng);
        ++out.critic_steps;
        if (log != nullptr) log->append(epoch, out.critic_steps, "final", out.last_critic);
      }
      const auto batch = sampler.sample(data_rng);
      AuxLoss aux;
      if (seen_clf) {
        aux = [&, labels = batch.labels](const Matrix& fake, Matrix* grad) {
          const double w = cfg.synth.cls_loss_weight;
          const double loss = seen_clf->nll(fake, labels, grad);
          if (grad != nullptr) *grad = scaled(*grad, w);
          return w * loss;
        };
      }
      out.last_generator =
          gan_step(d, g, batch.gan, cfg.critic, Side::kTrainG, cfg.hyper, step_rng, &aux);
      ++out.generator_steps;
      if (log != nullptr) log->append(epoch, out.critic_steps, "final", out.last_generator);
    }
  }
  return out;
}

LabeledFeatures synthesize(const Subnet& generator, const Matrix& class_attributes,
                           std::span<const int> classes, std::size_t per_class, Rng& rng) {
  if (per_class < 1) throw ParameterError("synthesize: per_class must be at least 1");
  const auto& space = generator.space();
  LabeledFeatures out{Matrix(classes.size() * per_class, space.output_dim()), {}};
  out.labels.reserve(classes.size() * per_class);
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto cls = static_cast<std::size_t>(classes[k]);
    if (cls >= class_attributes.rows()) throw ParameterError("synthesize: unknown class");
    Matrix attrs(per_class, class_attributes.cols());
    for (std::size_t r = 0; r < per_class; ++r) {
      auto src = class_attributes.row(cls);
      std::copy(src.begin(), src.end(), attrs.row(r).begin());
    }
    const Matrix noise = standard_normal(per_class, space.second_dim(), rng);
    const auto fwd = subnet_forward(*generator.params, generator.genome, attrs, noise, Mode::kEval, rng);
    for (std::size_t r = 0; r < per_class; ++r) {
      auto src = fwd.output.row(r);
      std::copy(src.begin(), src.end(), out.features.row(k * per_class + r).begin());
      out.labels.push_back(classes[k]);
    }
  }
  return out;
}

ZslMetrics synthesize_and_evaluate(StandaloneNet& generator, const ZslDataset& ds,
                                   const ZslEvalConfig& cfg) {
  Rng root(cfg.seed);
  Rng synth_rng = root.split(1);
  const auto fake = synthesize(generator.view(), ds.attributes(), ds.unseen_classes(),
                               cfg.per_class, synth_rng);

  ClassifierConfig czsl_cfg = cfg.classifier;
  czsl_cfg.seed = root.split(2).key();
  const auto czsl = train_classifier(fake.features, fake.labels, ds.unseen_classes(), czsl_cfg);

  // GZSL trains on synthesized unseen plus real seen training features.
  Matrix real_seen = ds.feature_rows(ds.train_seen());
  Matrix joint_x(fake.features.rows() + real_seen.rows(), ds.feature_dim());
  std::copy(fake.features.values().begin(), fake.features.values().end(), joint_x.values().begin());
  std::copy(real_seen.values().begin(), real_seen.values().end(),
            joint_x.values().begin() + static_cast<std::ptrdiff_t>(fake.features.size()));
  std::vector<int> joint_y = fake.labels;
  const auto seen_y = ds.labels_of(ds.train_seen());
  joint_y.insert(joint_y.end(), seen_y.begin(), seen_y.end());
  std::vector<int> joint_space = ds.seen_classes();
  joint_space.insert(joint_space.end(), ds.unseen_classes().begin(), ds.unseen_classes().end());
  ClassifierConfig gzsl_cfg = cfg.classifier;
  gzsl_cfg.seed = root.split(3).key();
  const auto gzsl = train_classifier(joint_x, joint_y, joint_space, gzsl_cfg);

  ZslMetrics m = evaluate(ds, gzsl, Setting::kGzsl);
  m.czsl_acc = evaluate(ds, czsl, Setting::kCzsl).czsl_acc;
  return m;
}

double oracle_czsl_accuracy(const ZslDataset& ds, const ClassifierConfig& cfg,
                            double train_fraction) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (auto i : ds.test_unseen()) by_class[ds.labels()[i]].push_back(i);
  std::vector<std::size_t> fit, held;
  for (const auto& [cls, rows] : by_class) {
    const auto n_fit = std::max<std::size_t>(
        1, static_cast<std::size_t>(train_fraction * static_cast<double>(rows.size())));
    for (std::size_t k = 0; k < rows.size(); ++k) (k < n_fit ? fit : held).push_back(rows[k]);
  }
  if (held.empty()) held = fit;
  const auto clf = train_classifier(ds.feature_rows(fit), ds.labels_of(fit), ds.unseen_classes(), cfg);
  return per_class_accuracy(ds.labels_of(held), clf.predict(ds.feature_rows(held)));
}

}  // namespace gansearch
