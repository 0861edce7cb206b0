#include "gansearch/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gansearch/errors.hpp"
#include "gansearch/layers.hpp"
#include "gansearch/rng.hpp"

namespace gansearch {

SoftmaxClassifier::SoftmaxClassifier(std::vector<int> label_space, std::size_t feature_dim)
    : label_space_(std::move(label_space)),
      weight_(label_space_.size(), feature_dim),
      bias_(1, label_space_.size()) {
  if (label_space_.empty()) throw ParameterError("classifier: empty label space");
  const int max_id = *std::max_element(label_space_.begin(), label_space_.end());
  if (*std::min_element(label_space_.begin(), label_space_.end()) < 0)
    throw ParameterError("classifier: negative class id");
  index_of_.assign(static_cast<std::size_t>(max_id) + 1, -1);
  for (std::size_t i = 0; i < label_space_.size(); ++i) {
    auto& slot = index_of_[static_cast<std::size_t>(label_space_[i])];
    if (slot != -1) throw ParameterError("classifier: duplicate class in label space");
    slot = static_cast<int>(i);
  }
}

std::size_t SoftmaxClassifier::local_index(int cls) const {
  if (cls < 0 || static_cast<std::size_t>(cls) >= index_of_.size() ||
      index_of_[static_cast<std::size_t>(cls)] < 0)
    throw ParameterError("classifier: class " + std::to_string(cls) + " not in label space");
  return static_cast<std::size_t>(index_of_[static_cast<std::size_t>(cls)]);
}

Matrix SoftmaxClassifier::logits(const Matrix& x) const {
  return affine_forward(weight_, bias_, x);
}

std::vector<int> SoftmaxClassifier::predict(const Matrix& x) const {
  const Matrix z = logits(x);
  std::vector<int> out(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    out[r] = label_space_[static_cast<std::size_t>(best)];
  }
  return out;
}

double SoftmaxClassifier::nll(const Matrix& x, std::span<const int> labels, Matrix* grad_x,
                              Matrix* grad_w, Matrix* grad_b) const {
  if (labels.size() != x.rows()) throw DimensionError("classifier nll: label count mismatch");
  Matrix probs = logits(x);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  double loss = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto row = probs.row(r);
    const double top = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) {
      v = std::exp(v - top);
      z += v;
    }
    for (double& v : row) v /= z;
    const auto target = local_index(labels[r]);
    loss -= std::log(std::max(row[target], 1e-300)) * inv_n;
    row[target] -= 1.0;  // probs now hold d(loss)/d(logits) * n
  }
  if (grad_x != nullptr || grad_w != nullptr || grad_b != nullptr) {
    const Matrix dlogits = scaled(probs, inv_n);
    auto g = affine_backward(weight_, x, dlogits);
    if (grad_x != nullptr) *grad_x = std::move(g.input);
    if (grad_w != nullptr) *grad_w = std::move(g.weight);
    if (grad_b != nullptr) *grad_b = std::move(g.bias);
  }
  return loss;
}

SoftmaxClassifier train_classifier(const Matrix& features, std::span<const int> labels,
                                   std::vector<int> label_space, const ClassifierConfig& cfg,
                                   std::vector<double>* epoch_losses) {
  if (labels.size() != features.rows()) throw DimensionError("train_classifier: label count mismatch");
  if (cfg.epochs < 0 || cfg.batch_size == 0) throw ParameterError("train_classifier: bad config");
  SoftmaxClassifier clf(std::move(label_space), features.cols());
  std::vector<std::size_t> per_class(clf.label_space().size(), 0);
  for (int l : labels) ++per_class[clf.local_index(l)];
  for (std::size_t i = 0; i < per_class.size(); ++i)
    if (per_class[i] == 0)
      throw ParameterError("train_classifier: class " + std::to_string(clf.label_space()[i]) +
                           " has no samples");

  OptimHyper hyper;
  hyper.learning_rate = cfg.learning_rate;
  hyper.beta1 = cfg.beta1;
  hyper.validate();
  AdamState w_state = AdamState::zeros_like(clf.weight());
  AdamState b_state = AdamState::zeros_like(clf.bias());

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(features.rows());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng.uniform_index(i + 1)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const Matrix xb = gather_rows(features, idx);
      batch_labels.clear();
      for (auto i : idx) batch_labels.push_back(labels[i]);
      Matrix gw, gb;
      clf.nll(xb, batch_labels, nullptr, &gw, &gb);
      adam_step(clf.weight(), gw, w_state, hyper);
      adam_step(clf.bias(), gb, b_state, hyper);
    }
    if (epoch_losses != nullptr) epoch_losses->push_back(clf.nll(features, labels));
  }
  return clf;
}

}  // namespace gansearch
