#include "gansearch/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "gansearch/errors.hpp"
#include "gansearch/layers.hpp"

namespace gansearch {

namespace {

void check_indices(const std::vector<std::size_t>& idx, std::size_t n, const char* name) {
  for (auto i : idx)
    if (i >= n) throw ParameterError(std::string(name) + " references sample " + std::to_string(i));
}

}  // namespace

ZslDataset::ZslDataset(Matrix attributes, Matrix features, std::vector<int> labels,
                       std::vector<int> seen_classes, std::vector<int> unseen_classes,
                       std::vector<std::size_t> train_seen, std::vector<std::size_t> test_seen,
                       std::vector<std::size_t> test_unseen)
    : attributes_(std::move(attributes)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      seen_(std::move(seen_classes)),
      unseen_(std::move(unseen_classes)),
      train_seen_(std::move(train_seen)),
      test_seen_(std::move(test_seen)),
      test_unseen_(std::move(test_unseen)) {
  const std::size_t n_classes = attributes_.rows();
  if (labels_.size() != features_.rows())
    throw ParameterError("dataset: " + std::to_string(labels_.size()) + " labels for " +
                         std::to_string(features_.rows()) + " feature rows");
  unseen_mask_.assign(n_classes, false);
  std::vector<int> role(n_classes, 0);  // 1 seen, 2 unseen
  for (int c : seen_) {
    if (c < 0 || static_cast<std::size_t>(c) >= n_classes) throw ParameterError("dataset: bad seen class");
    role[static_cast<std::size_t>(c)] = 1;
  }
  for (int c : unseen_) {
    if (c < 0 || static_cast<std::size_t>(c) >= n_classes) throw ParameterError("dataset: bad unseen class");
    if (role[static_cast<std::size_t>(c)] == 1)
      throw ParameterError("dataset: class " + std::to_string(c) + " is both seen and unseen");
    role[static_cast<std::size_t>(c)] = 2;
    unseen_mask_[static_cast<std::size_t>(c)] = true;
  }
  for (int l : labels_)
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) throw ParameterError("dataset: label out of range");
  check_indices(train_seen_, labels_.size(), "train_seen");
  check_indices(test_seen_, labels_.size(), "test_seen");
  check_indices(test_unseen_, labels_.size(), "test_unseen");
  for (auto i : train_seen_)
    if (role[static_cast<std::size_t>(labels_[i])] != 1) throw ParameterError("dataset: train_seen holds a non-seen label");
  for (auto i : test_seen_)
    if (role[static_cast<std::size_t>(labels_[i])] != 1) throw ParameterError("dataset: test_seen holds a non-seen label");
  for (auto i : test_unseen_)
    if (role[static_cast<std::size_t>(labels_[i])] != 2) throw ParameterError("dataset: test_unseen holds a non-unseen label");
}

Matrix ZslDataset::feature_rows(std::span<const std::size_t> indices) const {
  long seen = 0;
  long unseen = 0;
  for (auto i : indices) {
    if (i >= labels_.size()) throw ParameterError("feature_rows: index out of range");
    if (unseen_mask_[static_cast<std::size_t>(labels_[i])]) ++unseen; else ++seen;
  }
  audit_->seen += seen;
  audit_->unseen += unseen;
  return gather_rows(features_, indices);
}

std::vector<int> ZslDataset::labels_of(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels_.at(i));
  return out;
}

Matrix ZslDataset::class_attributes(std::span<const int> classes) const {
  std::vector<std::size_t> rows(classes.begin(), classes.end());
  return gather_rows(attributes_, rows);
}

AccessCounts ZslDataset::access_counts() const {
  return {audit_->seen.load(), audit_->unseen.load()};
}

void ZslDataset::reset_access_counts() const {
  audit_->seen = 0;
  audit_->unseen = 0;
}

bool operator==(const ZslDataset& a, const ZslDataset& b) {
  return a.attributes_ == b.attributes_ && a.features_ == b.features_ && a.labels_ == b.labels_ &&
         a.seen_ == b.seen_ && a.unseen_ == b.unseen_ && a.train_seen_ == b.train_seen_ &&
         a.test_seen_ == b.test_seen_ && a.test_unseen_ == b.test_unseen_;
}

void SyntheticSpec::validate() const {
  if (seen < 2) throw ParameterError("synthetic spec: need at least 2 seen classes");
  if (unseen < 1) throw ParameterError("synthetic spec: need at least 1 unseen class");
  if (attr_dim == 0 || feature_dim == 0) throw ParameterError("synthetic spec: dimensions must be positive");
  if (samples_per_class < 2) throw ParameterError("synthetic spec: need at least 2 samples per class");
  if (!(noise_sigma >= 0.0)) throw ParameterError("synthetic spec: noise_sigma must be nonnegative");
}

namespace {

double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

ZslDataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Rng attr_rng = rng.split(1);
  Rng map_rng = rng.split(2);
  Rng noise_rng = rng.split(3);
  Rng split_rng = rng.split(4);

  const auto n_classes = static_cast<std::size_t>(spec.seen + spec.unseen);
  Matrix attrs(n_classes, spec.attr_dim);
  for (double& v : attrs.values()) v = to_float_precision(attr_rng.uniform());

  Matrix projection(spec.feature_dim, spec.attr_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.attr_dim));
  for (double& v : projection.values()) v = scale * map_rng.normal();
  const Matrix means = activate(matmul_nt(attrs, projection), Activation::kRelu);

  std::vector<int> order(n_classes);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n_classes; i-- > 1;) std::swap(order[i], order[split_rng.uniform_index(i + 1)]);
  std::vector<int> seen(order.begin(), order.begin() + spec.seen);
  std::vector<int> unseen(order.begin() + spec.seen, order.end());
  std::sort(seen.begin(), seen.end());
  std::sort(unseen.begin(), unseen.end());
  std::vector<bool> is_unseen(n_classes, false);
  for (int c : unseen) is_unseen[static_cast<std::size_t>(c)] = true;

  const auto per_class = static_cast<std::size_t>(spec.samples_per_class);
  Matrix features(n_classes * per_class, spec.feature_dim);
  std::vector<int> labels(features.rows());
  std::vector<std::size_t> train_seen, test_seen, test_unseen;
  const std::size_t n_train = (per_class * 4) / 5;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<std::size_t> rows(per_class);
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t r = c * per_class + k;
      rows[k] = r;
      labels[r] = static_cast<int>(c);
      for (std::size_t j = 0; j < spec.feature_dim; ++j)
        features(r, j) = to_float_precision(means(c, j) + spec.noise_sigma * noise_rng.normal());
    }
    if (is_unseen[c]) {
      test_unseen.insert(test_unseen.end(), rows.begin(), rows.end());
      continue;
    }
    for (std::size_t i = per_class; i-- > 1;) std::swap(rows[i], rows[split_rng.uniform_index(i + 1)]);
    std::sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
    train_seen.insert(train_seen.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_seen.insert(test_seen.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  return ZslDataset(std::move(attrs), std::move(features), std::move(labels), std::move(seen),
                    std::move(unseen), std::move(train_seen), std::move(test_seen),
                    std::move(test_unseen));
}

Matrix class_means(const ZslDataset& ds) {
  Matrix sums(ds.num_classes(), ds.feature_dim());
  std::vector<double> counts(ds.num_classes(), 0.0);
  std::vector<std::size_t> all(ds.num_samples());
  std::iota(all.begin(), all.end(), 0);
  const Matrix x = ds.feature_rows(all);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto c = static_cast<std::size_t>(ds.labels()[r]);
    counts[c] += 1.0;
    for (std::size_t j = 0; j < x.cols(); ++j) sums(c, j) += x(r, j);
  }
  for (std::size_t c = 0; c < sums.rows(); ++c)
    for (std::size_t j = 0; j < sums.cols(); ++j)
      if (counts[c] > 0) sums(c, j) /= counts[c];
  return sums;
}

namespace {

constexpr const char* kBundleFormat = "gansearch-zsl-bundle";
constexpr int kBundleVersion = 1;

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

std::string float_blob(const Matrix& m) {
  std::string out(m.size() * sizeof(float), '\0');
  for (std::size_t i = 0; i < m.size(); ++i) {
    const float f = to_little_endian(static_cast<float>(m.values()[i]));
    std::memcpy(out.data() + i * sizeof(float), &f, sizeof(float));
  }
  return out;
}

Matrix matrix_from_blob(const std::string& blob, std::size_t rows, std::size_t cols,
                        const char* field) {
  if (blob.size() != rows * cols * sizeof(float))
    throw FormatError(std::string("dataset bundle: ") + field + " holds " +
                      std::to_string(blob.size()) + " bytes, expected " +
                      std::to_string(rows * cols * sizeof(float)));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) {
    float f;
    std::memcpy(&f, blob.data() + i * sizeof(float), sizeof(float));
    m.values()[i] = static_cast<double>(to_little_endian(f));
  }
  return m;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("dataset bundle: missing " + path.filename().string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_dataset(const ZslDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string features = float_blob(ds.features_unaudited());
  const std::string attributes = float_blob(ds.attributes());
  std::string labels(ds.labels().size() * sizeof(std::int32_t), '\0');
  for (std::size_t i = 0; i < ds.labels().size(); ++i) {
    const std::int32_t v = to_little_endian(static_cast<std::int32_t>(ds.labels()[i]));
    std::memcpy(labels.data() + i * sizeof v, &v, sizeof v);
  }

  nlohmann::ordered_json meta;
  meta["format"] = kBundleFormat;
  meta["version"] = kBundleVersion;
  meta["num_classes"] = ds.num_classes();
  meta["attr_dim"] = ds.attr_dim();
  meta["feature_dim"] = ds.feature_dim();
  meta["num_samples"] = ds.num_samples();
  meta["seen_classes"] = ds.seen_classes();
  meta["unseen_classes"] = ds.unseen_classes();
  meta["train_seen"] = ds.train_seen();
  meta["test_seen"] = ds.test_seen();
  meta["test_unseen"] = ds.test_unseen();
  meta["checksums"] = {{"features.bin", fnv1a_hex(features)},
                       {"attributes.bin", fnv1a_hex(attributes)},
                       {"labels.bin", fnv1a_hex(labels)}};

  write_file(dir / "features.bin", features);
  write_file(dir / "attributes.bin", attributes);
  write_file(dir / "labels.bin", labels);
  write_file(dir / "meta", meta.dump(1) + "\n");
}

ZslDataset load_dataset(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(dir / "meta"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset bundle: meta is not valid JSON: ") + e.what());
  }

  auto field = [&meta](const char* name) -> const nlohmann::json& {
    if (!meta.contains(name)) throw FormatError(std::string("dataset bundle: meta lacks ") + name);
    return meta.at(name);
  };
  try {
    if (field("format").get<std::string>() != kBundleFormat)
      throw FormatError("dataset bundle: unknown format tag");
    if (field("version").get<int>() != kBundleVersion)
      throw FormatError("dataset bundle: unsupported version");
    const auto n_classes = field("num_classes").get<std::size_t>();
    const auto attr_dim = field("attr_dim").get<std::size_t>();
    const auto feature_dim = field("feature_dim").get<std::size_t>();
    const auto n_samples = field("num_samples").get<std::size_t>();

    const std::string features = read_file(dir / "features.bin");
    const std::string attributes = read_file(dir / "attributes.bin");
    const std::string labels_blob = read_file(dir / "labels.bin");
    const auto& sums = field("checksums");
    for (const auto& [name, blob] : {std::pair{"features.bin", &features},
                                     std::pair{"attributes.bin", &attributes},
                                     std::pair{"labels.bin", &labels_blob}}) {
      if (!sums.contains(name) || sums.at(name).get<std::string>() != fnv1a_hex(*blob)) {
        // Report size problems first; they are the common corruption.
        const std::size_t expected =
            std::string(name) == "features.bin"     ? n_samples * feature_dim * sizeof(float)
            : std::string(name) == "attributes.bin" ? n_classes * attr_dim * sizeof(float)
                                                    : n_samples * sizeof(std::int32_t);
        if (blob->size() != expected)
          throw FormatError(std::string("dataset bundle: ") + name + " has " +
                            std::to_string(blob->size()) + " bytes, expected " +
                            std::to_string(expected));
        throw FormatError(std::string("dataset bundle: checksum mismatch in ") + name);
      }
    }

    Matrix feat = matrix_from_blob(features, n_samples, feature_dim, "features.bin");
    Matrix attr = matrix_from_blob(attributes, n_classes, attr_dim, "attributes.bin");
    if (labels_blob.size() != n_samples * sizeof(std::int32_t))
      throw FormatError("dataset bundle: labels.bin size mismatch");
    std::vector<int> labels(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
      std::int32_t v;
      std::memcpy(&v, labels_blob.data() + i * sizeof v, sizeof v);
      labels[i] = to_little_endian(v);
    }
    return ZslDataset(std::move(attr), std::move(feat),
                      std::move(labels), field("seen_classes").get<std::vector<int>>(),
                      field("unseen_classes").get<std::vector<int>>(),
                      field("train_seen").get<std::vector<std::size_t>>(),
                      field("test_seen").get<std::vector<std::size_t>>(),
                      field("test_unseen").get<std::vector<std::size_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset bundle: malformed meta field: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("dataset bundle: invalid contents: ") + e.what());
  }
}

SeenBatchSampler::SeenBatchSampler(const ZslDataset& ds, std::size_t batch_size,
                                   std::size_t noise_dim)
    : ds_(&ds), batch_size_(batch_size), noise_dim_(noise_dim) {
  if (ds.train_seen().empty()) throw ParameterError("training data is empty (no train_seen rows)");
  if (batch_size == 0 || noise_dim == 0) throw ParameterError("batch size and noise dim must be positive");
}

Matrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

TrainBatch SeenBatchSampler::sample(Rng& rng) const {
  std::vector<std::size_t> idx(batch_size_);
  const auto& pool = ds_->train_seen();
  for (auto& i : idx) i = pool[rng.uniform_index(pool.size())];
  TrainBatch b;
  b.labels = ds_->labels_of(idx);
  b.gan.real = ds_->feature_rows(idx);
  b.gan.attrs = ds_->class_attributes(b.labels);
  b.gan.noise = standard_normal(batch_size_, noise_dim_, rng);
  return b;
}

GanBatch SeenBatchSampler::sample_conditioning(Rng& rng) const {
  std::vector<std::size_t> idx(batch_size_);
  const auto& pool = ds_->train_seen();
  for (auto& i : idx) i = pool[rng.uniform_index(pool.size())];
  GanBatch b;
  b.attrs = ds_->class_attributes(ds_->labels_of(idx));
  b.noise = standard_normal(batch_size_, noise_dim_, rng);
  return b;
}

std::size_t SeenBatchSampler::batches_per_epoch() const {
  return (ds_->train_seen().size() + batch_size_ - 1) / batch_size_;
}

}  // namespace gansearch
