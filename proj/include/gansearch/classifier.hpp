#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gansearch/adam.hpp"
#include "gansearch/matrix.hpp"

namespace gansearch {

struct ClassifierConfig {
  int epochs = 25;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  double beta1 = 0.5;
  std::uint64_t seed = 0;
};

// Single affine layer + softmax over an explicit label space. Predictions are
// returned as dataset class ids, not local indices.
class SoftmaxClassifier {
 public:
  SoftmaxClassifier(std::vector<int> label_space, std::size_t feature_dim);

  const std::vector<int>& label_space() const { return label_space_; }
  std::size_t feature_dim() const { return weight_.cols(); }
  // Local index of a class id in the label space; throws ParameterError if absent.
  std::size_t local_index(int cls) const;

  Matrix logits(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;

  // Mean negative log-likelihood of `labels` (class ids). Optionally writes
  // gradients w.r.t. the inputs, weights and bias.
  double nll(const Matrix& x, std::span<const int> labels, Matrix* grad_x = nullptr,
             Matrix* grad_w = nullptr, Matrix* grad_b = nullptr) const;

  Matrix& weight() { return weight_; }
  Matrix& bias() { return bias_; }
  const Matrix& weight() const { return weight_; }
  const Matrix& bias() const { return bias_; }

 private:
  std::vector<int> label_space_;
  std::vector<int> index_of_;  // class id -> local index or -1
  Matrix weight_;              // [C x d]
  Matrix bias_;                // [1 x C]
};

// Cross-entropy with Adam over shuffled minibatches. Every class in
// `label_space` needs at least one sample. When `epoch_losses` is non-null it
// receives the full-data loss after each epoch.
SoftmaxClassifier train_classifier(const Matrix& features, std::span<const int> labels,
                                   std::vector<int> label_space, const ClassifierConfig& cfg,
                                   std::vector<double>* epoch_losses = nullptr);

}  // namespace gansearch
