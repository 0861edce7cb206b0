#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "gansearch/matrix.hpp"
#include "gansearch/rng.hpp"
#include "gansearch/wgan.hpp"

namespace gansearch {

// Feature-row reads split by the visibility of the row's class. Training code
// must never move `unseen_rows` off zero.
struct AccessCounts {
  long seen_rows = 0;
  long unseen_rows = 0;
};

// Zero-shot dataset: class attribute vectors, per-sample features and labels,
// a seen/unseen class split and three sample partitions. Feature rows are only
// reachable through feature_rows(), which counts every read.
class ZslDataset {
 public:
  ZslDataset(Matrix attributes, Matrix features, std::vector<int> labels,
             std::vector<int> seen_classes, std::vector<int> unseen_classes,
             std::vector<std::size_t> train_seen, std::vector<std::size_t> test_seen,
             std::vector<std::size_t> test_unseen);

  std::size_t num_classes() const { return attributes_.rows(); }
  std::size_t attr_dim() const { return attributes_.cols(); }
  std::size_t feature_dim() const { return features_.cols(); }
  std::size_t num_samples() const { return features_.rows(); }

  const Matrix& attributes() const { return attributes_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& seen_classes() const { return seen_; }
  const std::vector<int>& unseen_classes() const { return unseen_; }
  const std::vector<std::size_t>& train_seen() const { return train_seen_; }
  const std::vector<std::size_t>& test_seen() const { return test_seen_; }
  const std::vector<std::size_t>& test_unseen() const { return test_unseen_; }
  bool is_unseen(int cls) const { return unseen_mask_.at(static_cast<std::size_t>(cls)); }

  Matrix feature_rows(std::span<const std::size_t> indices) const;
  std::vector<int> labels_of(std::span<const std::size_t> indices) const;
  // Attribute rows for the given classes, in order.
  Matrix class_attributes(std::span<const int> classes) const;

  AccessCounts access_counts() const;
  void reset_access_counts() const;

  // Bypasses the audit; for serialization only.
  const Matrix& features_unaudited() const { return features_; }

  friend bool operator==(const ZslDataset& a, const ZslDataset& b);

 private:
  struct Audit {
    std::atomic<long> seen{0};
    std::atomic<long> unseen{0};
  };

  Matrix attributes_;
  Matrix features_;
  std::vector<int> labels_;
  std::vector<int> seen_;
  std::vector<int> unseen_;
  std::vector<std::size_t> train_seen_;
  std::vector<std::size_t> test_seen_;
  std::vector<std::size_t> test_unseen_;
  std::vector<bool> unseen_mask_;
  std::shared_ptr<Audit> audit_ = std::make_shared<Audit>();
};

struct SyntheticSpec {
  int seen = 12;
  int unseen = 4;
  std::size_t attr_dim = 16;
  std::size_t feature_dim = 32;
  int samples_per_class = 200;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

// Attributes uniform in [0,1]^|A|; class mean relu(T a) for a fixed Gaussian
// T; samples are the mean plus sigma-scaled Gaussian noise. Seen samples are
// split 80/20 into train/test, unseen samples all go to test_unseen. Values are
// rounded to float precision so bundles round-trip exactly.
ZslDataset gen_synthetic(const SyntheticSpec& spec);

// Per-class feature means computed from all samples (test oracle helper;
// audited like any other read).
Matrix class_means(const ZslDataset& ds);

// Bundle directory: meta (JSON text), features.bin / attributes.bin
// (little-endian float32, row-major) and labels.bin (little-endian int32).
void save_dataset(const ZslDataset& ds, const std::filesystem::path& dir);
ZslDataset load_dataset(const std::filesystem::path& dir);

// Uniform minibatches over train_seen with fresh standard-normal noise.
struct TrainBatch {
  GanBatch gan;
  std::vector<int> labels;
};

class SeenBatchSampler {
 public:
  SeenBatchSampler(const ZslDataset& ds, std::size_t batch_size, std::size_t noise_dim);

  TrainBatch sample(Rng& rng) const;
  // Attribute rows for uniformly drawn train_seen labels plus noise; reads no
  // feature rows.
  GanBatch sample_conditioning(Rng& rng) const;

  std::size_t batches_per_epoch() const;
  std::size_t batch_size() const { return batch_size_; }
  std::size_t noise_dim() const { return noise_dim_; }
  const ZslDataset& dataset() const { return *ds_; }

 private:
  const ZslDataset* ds_;
  std::size_t batch_size_;
  std::size_t noise_dim_;
};

Matrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace gansearch
