#include "icad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace icad {
namespace {

constexpr char kMagic[4] = {'I', 'C', 'A', 'D'};

void push_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v & 0xff));
  out.push_back(uint8_t((v >> 8) & 0xff));
  out.push_back(uint8_t((v >> 16) & 0xff));
  out.push_back(uint8_t((v >> 24) & 0xff));
}

void push_u64(std::vector<uint8_t>& out, uint64_t v) {
  push_u32(out, uint32_t(v & 0xffffffffu));
  push_u32(out, uint32_t(v >> 32));
}

void push_f32(std::vector<uint8_t>& out, float v) { push_u32(out, std::bit_cast<uint32_t>(v)); }

void push_bytes(std::vector<uint8_t>& out, const std::string& s) {
  push_u32(out, uint32_t(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

// Cursor over the file image; every read checks the remaining length.
struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw data_error("checkpoint: file truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = uint32_t(buf[pos]) | uint32_t(buf[pos + 1]) << 8 | uint32_t(buf[pos + 2]) << 16 |
                 uint32_t(buf[pos + 3]) << 24;
    pos += 4;
    return v;
  }
  uint64_t u64() {
    uint64_t lo = u32();
    uint64_t hi = u32();
    return lo | hi << 32;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes() {
    uint32_t n = u32();
    need(n);
    std::string s(buf.begin() + ptrdiff_t(pos), buf.begin() + ptrdiff_t(pos + n));
    pos += n;
    return s;
  }
};

std::vector<float> read_f32_array(Reader& r, size_t count) {
  r.need(count * 4);
  std::vector<float> out(count);
  for (size_t i = 0; i < count; ++i) out[i] = r.f32();
  return out;
}

// Sanity cap: no tensor in any model here comes near 2^28 elements.
constexpr uint64_t kMaxTensorElems = uint64_t(1) << 28;

Checkpoint make_checkpoint_impl(Checkpoint::ModelKind kind, std::vector<LayerSpec> layers,
                                std::vector<std::pair<std::string, Tensor>> named,
                                const AdamT<float>* optimizer, const std::string& config_text) {
  Checkpoint c;
  c.kind = kind;
  c.layers = std::move(layers);
  for (auto& [name, t] : named) {
    auto vals = t.values();
    c.tensors.push_back({name, t.shape(), {vals.begin(), vals.end()}});
  }
  if (optimizer) {
    if (optimizer->moment1().size() != c.tensors.size())
      throw std::invalid_argument(
          "make_checkpoint: optimizer state count does not match the parameter list");
    OptimizerState st;
    st.steps = optimizer->steps();
    st.hyper = optimizer->hyper();
    st.m = optimizer->moment1();
    st.v = optimizer->moment2();
    c.optimizer = std::move(st);
  }
  c.config_text = config_text;
  return c;
}

}  // namespace

Checkpoint make_checkpoint(const CompletionNet& net, const AdamT<float>* optimizer,
                           const std::string& config_text) {
  if (!net.built()) throw std::invalid_argument("make_checkpoint: model is not built");
  return make_checkpoint_impl(Checkpoint::ModelKind::Completion, net.layers(),
                              net.named_parameters(), optimizer, config_text);
}

Checkpoint make_checkpoint(const Autoencoder& net, const AdamT<float>* optimizer,
                           const std::string& config_text) {
  if (!net.built()) throw std::invalid_argument("make_checkpoint: model is not built");
  return make_checkpoint_impl(Checkpoint::ModelKind::Autoencoder, {}, net.named_parameters(),
                              optimizer, config_text);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  push_u32(out, kCheckpointVersion);
  push_u32(out, uint32_t(ckpt.kind));

  push_u32(out, uint32_t(ckpt.layers.size()));
  for (const auto& l : ckpt.layers) {
    push_u32(out, uint32_t(l.kind));
    push_u32(out, uint32_t(l.kernel));
    push_u32(out, uint32_t(l.dilation));
    push_u32(out, uint32_t(l.stride));
    push_u32(out, uint32_t(l.out_channels));
    push_u32(out, l.activation ? 1 : 0);
    push_f32(out, l.clip_lo);
    push_f32(out, l.clip_hi);
  }

  push_u32(out, uint32_t(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    push_bytes(out, t.name);
    push_u32(out, uint32_t(t.shape.size()));
    uint64_t n = 1;
    for (int d : t.shape) {
      if (d <= 0) throw std::invalid_argument("save_checkpoint: non-positive tensor dimension");
      push_u32(out, uint32_t(d));
      n *= uint64_t(d);
    }
    if (n != t.values.size())
      throw std::invalid_argument("save_checkpoint: tensor value count does not match its shape");
    for (float v : t.values) push_f32(out, v);
  }

  push_u32(out, ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const auto& st = *ckpt.optimizer;
    if (st.m.size() != ckpt.tensors.size() || st.v.size() != ckpt.tensors.size())
      throw std::invalid_argument("save_checkpoint: optimizer state count mismatch");
    push_u64(out, uint64_t(st.steps));
    push_f32(out, st.hyper.alpha);
    push_f32(out, st.hyper.beta1);
    push_f32(out, st.hyper.beta2);
    push_f32(out, st.hyper.eps);
    for (size_t i = 0; i < ckpt.tensors.size(); ++i) {
      if (st.m[i].size() != ckpt.tensors[i].values.size() ||
          st.v[i].size() != ckpt.tensors[i].values.size())
        throw std::invalid_argument("save_checkpoint: optimizer state shape mismatch");
      for (float v : st.m[i]) push_f32(out, v);
      for (float v : st.v[i]) push_f32(out, v);
    }
  }

  push_bytes(out, ckpt.config_text);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("checkpoint: cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  f.flush();
  if (!f) throw data_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("checkpoint: cannot open " + path.string());
  std::vector<uint8_t> buf{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};

  Reader r{buf};
  r.need(4);
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw data_error("checkpoint: bad magic in " + path.string());
  r.pos = 4;
  uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw data_error("checkpoint: unsupported format version " + std::to_string(version));

  Checkpoint c;
  uint32_t kind = r.u32();
  if (kind > uint32_t(Checkpoint::ModelKind::Autoencoder))
    throw data_error("checkpoint: unknown model kind " + std::to_string(kind));
  c.kind = Checkpoint::ModelKind(kind);

  uint32_t layer_count = r.u32();
  for (uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec l;
    uint32_t lk = r.u32();
    if (lk > uint32_t(LayerSpec::Kind::Clip))
      throw data_error("checkpoint: unknown layer kind " + std::to_string(lk));
    l.kind = LayerSpec::Kind(lk);
    l.kernel = int(r.u32());
    l.dilation = int(r.u32());
    l.stride = int(r.u32());
    l.out_channels = int(r.u32());
    l.activation = r.u32() != 0;
    l.clip_lo = r.f32();
    l.clip_hi = r.f32();
    c.layers.push_back(l);
  }

  uint32_t tensor_count = r.u32();
  for (uint32_t i = 0; i < tensor_count; ++i) {
    NamedTensor t;
    t.name = r.bytes();
    uint32_t ndim = r.u32();
    if (ndim > 8) throw data_error("checkpoint: implausible tensor rank");
    uint64_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      uint32_t dim = r.u32();
      if (dim == 0) throw data_error("checkpoint: zero tensor dimension");
      t.shape.push_back(int(dim));
      n *= dim;
      if (n > kMaxTensorElems) throw data_error("checkpoint: implausible tensor size");
    }
    t.values = read_f32_array(r, size_t(n));
    c.tensors.push_back(std::move(t));
  }

  if (r.u32() != 0) {
    OptimizerState st;
    st.steps = int64_t(r.u64());
    st.hyper.alpha = r.f32();
    st.hyper.beta1 = r.f32();
    st.hyper.beta2 = r.f32();
    st.hyper.eps = r.f32();
    for (const auto& t : c.tensors) {
      st.m.push_back(read_f32_array(r, t.values.size()));
      st.v.push_back(read_f32_array(r, t.values.size()));
    }
    c.optimizer = std::move(st);
  }

  c.config_text = r.bytes();
  if (r.pos != buf.size()) throw data_error("checkpoint: trailing bytes in " + path.string());
  return c;
}

namespace {

// Copies checkpoint tensors into a freshly built model; names and shapes must
// line up with the model's own parameter order.
template <typename Net>
void overwrite_parameters(Net& net, const Checkpoint& ckpt) {
  auto named = net.named_parameters();
  if (named.size() != ckpt.tensors.size())
    throw data_error("checkpoint: expected " + std::to_string(named.size()) +
                     " tensors, file has " + std::to_string(ckpt.tensors.size()));
  for (size_t i = 0; i < named.size(); ++i) {
    const auto& stored = ckpt.tensors[i];
    auto& [name, tensor] = named[i];
    if (stored.name != name)
      throw data_error("checkpoint: tensor " + std::to_string(i) + " is named '" + stored.name +
                       "', expected '" + name + "'");
    if (stored.shape != tensor.shape())
      throw data_error("checkpoint: shape mismatch for tensor '" + name + "'");
    auto dst = tensor.values();
    std::memcpy(dst.data(), stored.values.data(), stored.values.size() * sizeof(float));
  }
}

}  // namespace

CompletionNet restore_completion(const Checkpoint& ckpt) {
  if (ckpt.kind != Checkpoint::ModelKind::Completion)
    throw data_error("checkpoint: not a completion-model checkpoint");
  Rng rng(0);
  CompletionNet net = CompletionNet::build(ckpt.layers, rng, 0.02f);
  overwrite_parameters(net, ckpt);
  return net;
}

Autoencoder restore_autoencoder(const Checkpoint& ckpt) {
  if (ckpt.kind != Checkpoint::ModelKind::Autoencoder)
    throw data_error("checkpoint: not an autoencoder checkpoint");
  Rng rng(0);
  Autoencoder net = Autoencoder::build(rng, 0.02f);
  overwrite_parameters(net, ckpt);
  return net;
}

AdamT<float> restore_adam(const Checkpoint& ckpt, std::vector<Tensor> params) {
  if (!ckpt.optimizer) throw data_error("checkpoint: no optimizer state stored");
  const auto& st = *ckpt.optimizer;
  AdamT<float> adam(std::move(params), st.hyper);
  try {
    adam.restore(st.steps, st.m, st.v);
  } catch (const std::invalid_argument& e) {
    throw data_error(std::string("checkpoint: ") + e.what());
  }
  return adam;
}

}  // namespace icad
