#include "gansearch/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "gansearch/errors.hpp"

namespace gansearch {

namespace {

constexpr char kMagic[8] = {'G', 'S', 'N', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    out_.append(p, sizeof(T));
  }
  void put_matrix(const Matrix& m) {
    put<std::uint64_t>(m.rows());
    put<std::uint64_t>(m.cols());
    out_.append(reinterpret_cast<const char*>(m.data()), m.size() * sizeof(double));
  }
  void put_adam(const AdamState& s) {
    put_matrix(s.first_moment);
    put_matrix(s.second_moment);
    put<std::int64_t>(s.step_count);
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* field) {
    need(sizeof(T), field);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  Matrix get_matrix(const char* field) {
    const auto rows = get<std::uint64_t>(field);
    const auto cols = get<std::uint64_t>(field);
    if (cols != 0 && rows > (bytes_.size() / sizeof(double)) / cols)
      throw FormatError(std::string("checkpoint: implausible shape for ") + field);
    Matrix m(rows, cols);
    need(m.size() * sizeof(double), field);
    std::memcpy(m.data(), bytes_.data() + pos_, m.size() * sizeof(double));
    pos_ += m.size() * sizeof(double);
    return m;
  }
  AdamState get_adam(const char* field) {
    AdamState s;
    s.first_moment = get_matrix(field);
    s.second_moment = get_matrix(field);
    s.step_count = get<std::int64_t>(field);
    return s;
  }
  void expect_magic() {
    need(sizeof kMagic, "magic");
    if (std::memcmp(bytes_.data(), kMagic, sizeof kMagic) != 0)
      throw FormatError("checkpoint: bad magic");
    pos_ += sizeof kMagic;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string("checkpoint: truncated while reading ") + field);
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const std::vector<const SupernetParams*>& nets) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(nets.size()));
  for (const SupernetParams* net : nets) {
    const auto& space = net->space();
    w.put<std::uint8_t>(static_cast<std::uint8_t>(space.role()));
    w.put<std::uint64_t>(space.attr_dim());
    w.put<std::uint64_t>(space.second_dim());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(space.node_dims().size()));
    for (auto d : space.node_dims()) w.put<std::uint64_t>(d);
    w.put<double>(net->activation().leaky_slope);
    w.put<double>(net->activation().dropout_rate);
    w.put<std::uint64_t>(net->version());
    for (const auto& layer : net->layers()) {
      w.put<std::uint8_t>(layer.materialized() ? 1 : 0);
      if (!layer.materialized()) continue;
      w.put_matrix(layer.weight);
      w.put_matrix(layer.bias);
      w.put_adam(layer.weight_state);
      w.put_adam(layer.bias_state);
    }
  }
  return w.take();
}

std::vector<SupernetParams> deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.expect_magic();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>("net count");
  std::vector<SupernetParams> nets;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto role_byte = r.get<std::uint8_t>("role");
    if (role_byte > 1) throw FormatError("checkpoint: bad role");
    const auto attr = r.get<std::uint64_t>("attr_dim");
    const auto second = r.get<std::uint64_t>("second_dim");
    const auto n_nodes = r.get<std::uint32_t>("node count");
    if (n_nodes == 0 || n_nodes > 64) throw FormatError("checkpoint: bad node count");
    std::vector<std::size_t> dims(n_nodes);
    for (auto& d : dims) d = r.get<std::uint64_t>("node dim");
    ActivationConfig act;
    act.leaky_slope = r.get<double>("leaky slope");
    act.dropout_rate = r.get<double>("dropout rate");
    const auto params_version = r.get<std::uint64_t>("params version");

    std::optional<SupernetParams> net;
    try {
      net.emplace(SearchSpace(static_cast<Role>(role_byte), attr, second, dims), act);
    } catch (const ParameterError& e) {
      throw FormatError(std::string("checkpoint: invalid space: ") + e.what());
    }
    const auto& space = net->space();
    const auto& edges = space.edges();
    for (std::size_t s = 0; s < net->num_slots(); ++s) {
      if (r.get<std::uint8_t>("layer flag") == 0) continue;
      LayerParams layer;
      layer.weight = r.get_matrix("weight");
      layer.bias = r.get_matrix("bias");
      layer.weight_state = r.get_adam("weight adam state");
      layer.bias_state = r.get_adam("bias adam state");
      const auto& edge = edges[s / kNumParamOps];
      const auto dt = space.node_dim(edge.target);
      const auto ds = space.node_dim(edge.source);
      if (layer.weight.rows() != dt || layer.weight.cols() != ds || layer.bias.rows() != 1 ||
          layer.bias.cols() != dt || layer.weight_state.first_moment.size() != dt * ds ||
          layer.weight_state.second_moment.size() != dt * ds ||
          layer.bias_state.first_moment.size() != dt ||
          layer.bias_state.second_moment.size() != dt)
        throw FormatError("checkpoint: layer shape disagrees with the search space");
      net->layers()[s] = std::move(layer);
    }
    net->set_version(params_version);
    nets.push_back(std::move(*net));
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  return nets;
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<const SupernetParams*>& nets) {
  const std::string bytes = serialize_checkpoint(nets);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

std::vector<SupernetParams> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace gansearch
