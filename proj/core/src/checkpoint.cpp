#include "tinyshape/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string_view>

namespace tinyshape {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'T', 'S', 'C', 'K'};
constexpr std::uint32_t kMaxDim = 1u << 20;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_f32s(const RVec& v) {
    for (double x : v) put(static_cast<float>(x));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw std::runtime_error("checkpoint: unexpected end of file");
    return v;
  }
  RVec get_f32s(std::size_t n) {
    RVec v(n);
    for (auto& x : v) x = static_cast<double>(get<float>());
    return v;
  }
  std::uint32_t get_dim(const char* what) {
    const auto v = get<std::uint32_t>();
    if (v > kMaxDim) throw std::runtime_error(std::string("checkpoint: implausible ") + what);
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& layers = ckpt.params.layers;
  if (layers.empty()) throw std::invalid_argument("checkpoint: empty network");
  if (ckpt.qnet.layers.size() != layers.size() || ckpt.opt.m_weights.size() != layers.size()) {
    throw std::invalid_argument("checkpoint: quantized twin or optimizer state does not match the network");
  }
  Writer w(out);
  out.write(kMagic, 4);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(ckpt.params.hidden_width()));
  w.put(static_cast<std::uint32_t>(layers.back().rows));
  w.put(static_cast<std::uint32_t>(layers.front().cols));
  w.put(static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    w.put(static_cast<std::uint32_t>(l.rows));
    w.put(static_cast<std::uint32_t>(l.cols));
    w.put_f32s(l.weights);
    w.put_f32s(l.bias);
    std::vector<std::uint8_t> bits((l.mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < l.mask.size(); ++i) {
      if (l.mask[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  }
  for (const auto& q : ckpt.qnet.layers) {
    w.put(static_cast<float>(q.w_max));
    out.write(reinterpret_cast<const char*>(q.weights.data()), static_cast<std::streamsize>(q.weights.size()));
    w.put(static_cast<float>(q.bias_scale));
    for (auto b : q.bias) w.put(b);
  }
  const auto& c = ckpt.opt.config;
  w.put(static_cast<float>(c.lr));
  w.put(static_cast<float>(c.weight_decay));
  w.put(static_cast<float>(c.beta1));
  w.put(static_cast<float>(c.beta2));
  w.put(static_cast<float>(c.eps));
  w.put(ckpt.opt.step);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    w.put_f32s(ckpt.opt.m_weights[l]);
    w.put_f32s(ckpt.opt.v_weights[l]);
    w.put_f32s(ckpt.opt.m_bias[l]);
    w.put_f32s(ckpt.opt.v_bias[l]);
  }
  w.put(ckpt.config_hash);
  w.put(ckpt.epoch);
  w.put(static_cast<std::uint32_t>(ckpt.history.size()));
  for (const auto& h : ckpt.history) {
    w.put(static_cast<double>(h.epoch));
    w.put(h.mean_loss);
    w.put(h.mse_term);
    w.put(h.tail_term);
    w.put(h.sparsity);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("checkpoint: bad magic");
  Reader r(in);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto hidden = r.get_dim("hidden width");
  const auto n_coeffs = r.get_dim("coefficient count");
  const auto input_dim = r.get_dim("input dimension");
  const auto n_layers = r.get_dim("layer count");
  if (n_layers == 0 || n_layers > 2) throw std::runtime_error("checkpoint: unsupported layer count");

  Checkpoint ckpt;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const auto rows = r.get_dim("rows");
    const auto cols = r.get_dim("cols");
    DenseLayer layer(rows, cols);
    layer.weights = r.get_f32s(static_cast<std::size_t>(rows) * cols);
    layer.bias = r.get_f32s(rows);
    std::vector<std::uint8_t> bits((layer.mask.size() + 7) / 8);
    in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
    if (!in) throw std::runtime_error("checkpoint: unexpected end of file");
    for (std::size_t i = 0; i < layer.mask.size(); ++i) layer.mask[i] = (bits[i / 8] >> (i % 8)) & 1U;
    ckpt.params.layers.push_back(std::move(layer));
  }
  const auto shape = ckpt.params.shape();
  if (shape.hidden != hidden || shape.output != n_coeffs || shape.input != input_dim) {
    throw std::runtime_error("checkpoint: header does not match layer shapes");
  }
  for (const auto& l : ckpt.params.layers) {
    QuantizedLayer q;
    q.rows = l.rows;
    q.cols = l.cols;
    q.w_max = r.get<float>();
    q.weights.resize(l.weights.size());
    in.read(reinterpret_cast<char*>(q.weights.data()), static_cast<std::streamsize>(q.weights.size()));
    if (!in) throw std::runtime_error("checkpoint: unexpected end of file");
    q.bias_scale = r.get<float>();
    q.bias.resize(l.rows);
    for (auto& b : q.bias) b = r.get<std::int32_t>();
    ckpt.qnet.layers.push_back(std::move(q));
  }
  AdamWConfig c;
  c.lr = r.get<float>();
  c.weight_decay = r.get<float>();
  c.beta1 = r.get<float>();
  c.beta2 = r.get<float>();
  c.eps = r.get<float>();
  ckpt.opt = OptState::for_params(ckpt.params, c);
  ckpt.opt.step = r.get<std::uint64_t>();
  for (std::size_t l = 0; l < ckpt.params.layers.size(); ++l) {
    const auto nw = ckpt.params.layers[l].weights.size();
    const auto nb = ckpt.params.layers[l].bias.size();
    ckpt.opt.m_weights[l] = r.get_f32s(nw);
    ckpt.opt.v_weights[l] = r.get_f32s(nw);
    ckpt.opt.m_bias[l] = r.get_f32s(nb);
    ckpt.opt.v_bias[l] = r.get_f32s(nb);
  }
  ckpt.config_hash = r.get<std::uint64_t>();
  ckpt.epoch = r.get<std::uint32_t>();
  const auto n_hist = r.get_dim("history length");
  for (std::uint32_t i = 0; i < n_hist; ++i) {
    HistoryRow h;
    h.epoch = static_cast<std::uint32_t>(r.get<double>());
    h.mean_loss = r.get<double>();
    h.mse_term = r.get<double>();
    h.tail_term = r.get<double>();
    h.sparsity = r.get<double>();
    ckpt.history.push_back(h);
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace tinyshape
