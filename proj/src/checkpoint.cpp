#include "dcmcl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dcmcl {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'M', 'C', 'L', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void u8(std::uint8_t x) { os_.put(static_cast<char>(x)); }
  void u32(std::uint32_t x) { le(x); }
  void u64(std::uint64_t x) { le(x); }
  void i64(std::int64_t x) { le(static_cast<std::uint64_t>(x)); }
  void f64(double x) { le(std::bit_cast<std::uint64_t>(x)); }
  void str(const std::string& s) {
    u64(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void tensor(const NamedTensor& t) {
    str(t.name);
    u32(2);
    u64(static_cast<std::uint64_t>(t.rows));
    u64(static_cast<std::uint64_t>(t.cols));
    for (double x : t.values) f64(x);
  }

 private:
  template <typename U>
  void le(U x) {
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xff);
    os_.write(buf, sizeof(U));
  }
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le<std::uint8_t>()); }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  std::int64_t i64() { return static_cast<std::int64_t>(le<std::uint64_t>()); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1u << 26)) fail("string too long");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  NamedTensor tensor() {
    NamedTensor t;
    t.name = str();
    if (u32() != 2) fail("tensor '" + t.name + "' is not 2-d");
    const std::uint64_t r = u64();
    const std::uint64_t c = u64();
    if (r * c > (1u << 28)) fail("tensor '" + t.name + "' too large");
    t.rows = static_cast<Index>(r);
    t.cols = static_cast<Index>(c);
    t.values.resize(r * c);
    for (double& x : t.values) x = f64();
    return t;
  }
  void read(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& what) { throw std::runtime_error("checkpoint " + path_ + ": " + what); }

 private:
  template <typename U>
  U le() {
    unsigned char buf[sizeof(U)];
    read(reinterpret_cast<char*>(buf), sizeof(U));
    U x = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) x |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    return x;
  }
  std::istream& is_;
  std::string path_;
};

void write_config(Writer& w, const ModelConfig& c) {
  w.i64(c.vocab_size);
  w.i64(c.d_model);
  w.i64(c.d_hidden);
  w.i64(c.n_heads);
  w.i64(c.n_enc_layers);
  w.i64(c.n_dec_layers);
  w.i64(c.max_len);
  w.f64(c.dropout);
  w.u8(static_cast<std::uint8_t>(c.enc_pe));
  w.u8(static_cast<std::uint8_t>(c.ar_pe));
  w.u8(static_cast<std::uint8_t>(c.nar_pe));
  w.u8(c.share_encoder ? 1 : 0);
  w.u8(c.hybrid_enabled ? 1 : 0);
}

ModelConfig read_config(Reader& r) {
  ModelConfig c;
  c.vocab_size = static_cast<int>(r.i64());
  c.d_model = static_cast<int>(r.i64());
  c.d_hidden = static_cast<int>(r.i64());
  c.n_heads = static_cast<int>(r.i64());
  c.n_enc_layers = static_cast<int>(r.i64());
  c.n_dec_layers = static_cast<int>(r.i64());
  c.max_len = static_cast<int>(r.i64());
  c.dropout = r.f64();
  auto pe = [&r]() {
    const std::uint8_t v = r.u8();
    if (v > 1) r.fail("bad position-encoding tag");
    return static_cast<PositionEncoding>(v);
  };
  c.enc_pe = pe();
  c.ar_pe = pe();
  c.nar_pe = pe();
  c.share_encoder = r.u8() != 0;
  c.hybrid_enabled = r.u8() != 0;
  return c;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : params)
    if (t.name == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    Writer w(os);
    os.write(kMagic, sizeof(kMagic));
    w.u32(kVersion);
    write_config(w, ckpt.config);
    w.str(ckpt.run_config);
    w.f64(ckpt.score);
    w.u64(ckpt.params.size());
    for (const auto& t : ckpt.params) w.tensor(t);
    w.u8(ckpt.optimizer ? 1 : 0);
    if (ckpt.optimizer) {
      if (ckpt.optimizer->m.size() != ckpt.params.size() || ckpt.optimizer->v.size() != ckpt.params.size()) {
        throw std::logic_error("checkpoint: optimizer moments must match the parameter list");
      }
      w.i64(ckpt.optimizer->step);
      for (const auto& t : ckpt.optimizer->m) w.tensor(t);
      for (const auto& t : ckpt.optimizer->v) w.tensor(t);
    }
    w.str(ckpt.rng_state);
    if (!os) throw std::runtime_error("error writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  Reader r(is, path.string());
  char magic[sizeof(kMagic)];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("bad magic");
  if (const std::uint32_t v = r.u32(); v != kVersion) r.fail("unsupported version " + std::to_string(v));
  Checkpoint ckpt;
  ckpt.config = read_config(r);
  ckpt.run_config = r.str();
  ckpt.score = r.f64();
  const std::uint64_t n = r.u64();
  if (n > 100000) r.fail("implausible parameter count");
  for (std::uint64_t i = 0; i < n; ++i) ckpt.params.push_back(r.tensor());
  if (r.u8() != 0) {
    OptimizerState opt;
    opt.step = r.i64();
    for (std::uint64_t i = 0; i < n; ++i) opt.m.push_back(r.tensor());
    for (std::uint64_t i = 0; i < n; ++i) opt.v.push_back(r.tensor());
    ckpt.optimizer = std::move(opt);
  }
  ckpt.rng_state = r.str();
  return ckpt;
}

template <typename S>
NamedTensor to_named(const std::string& name, const Mat<S>& m) {
  NamedTensor t{name, m.rows(), m.cols(), {}};
  t.values.resize(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.size(); ++i) t.values[static_cast<std::size_t>(i)] = static_cast<double>(m.data()[i]);
  return t;
}

template <typename S>
Mat<S> from_named(const NamedTensor& t) {
  Mat<S> m(t.rows, t.cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(t.values[static_cast<std::size_t>(i)]);
  return m;
}

template <typename S>
std::vector<NamedTensor> snapshot_parameters(const Model<S>& model) {
  std::vector<NamedTensor> out;
  for (const Parameter<S>* p : model.parameters()) out.push_back(to_named(p->name, p->value));
  return out;
}

template <typename S>
void restore_parameters(Model<S>& model, const Checkpoint& ckpt) {
  if (!(ckpt.config == model.config())) throw std::runtime_error("checkpoint: model config differs from checkpoint");
  auto params = model.parameters();
  if (params.size() != ckpt.params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedTensor& t = ckpt.params[i];
    Parameter<S>& p = *params[i];
    if (t.name != p.name) throw std::runtime_error("checkpoint: expected parameter '" + p.name + "', found '" + t.name + "'");
    if (t.rows != p.value.rows() || t.cols != p.value.cols()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + p.name + "'");
    }
    p.value = from_named<S>(t);
  }
}

Checkpoint average_checkpoints(std::span<const Checkpoint> ckpts) {
  if (ckpts.empty()) throw std::invalid_argument("average_checkpoints: no checkpoints");
  Checkpoint out = ckpts.back();
  out.optimizer.reset();
  for (auto& t : out.params) std::fill(t.values.begin(), t.values.end(), 0.0);
  for (const Checkpoint& c : ckpts) {
    if (!(c.config == out.config)) throw std::invalid_argument("average_checkpoints: model configs differ");
    if (c.params.size() != out.params.size()) throw std::invalid_argument("average_checkpoints: parameter lists differ");
    for (std::size_t i = 0; i < out.params.size(); ++i) {
      const NamedTensor& src = c.params[i];
      NamedTensor& dst = out.params[i];
      if (src.name != dst.name || src.rows != dst.rows || src.cols != dst.cols) {
        throw std::invalid_argument("average_checkpoints: parameter '" + dst.name + "' differs");
      }
      for (std::size_t k = 0; k < dst.values.size(); ++k) dst.values[k] += src.values[k];
    }
  }
  const double n = static_cast<double>(ckpts.size());
  for (std::size_t i = 0; i < out.params.size(); ++i) {
    // Entries that agree everywhere are copied, so averaging copies is exact.
    NamedTensor& dst = out.params[i];
    for (std::size_t k = 0; k < dst.values.size(); ++k) {
      const double first = ckpts.front().params[i].values[k];
      bool same = true;
      for (const Checkpoint& c : ckpts) same = same && c.params[i].values[k] == first;
      dst.values[k] = same ? first : dst.values[k] / n;
    }
  }
  return out;
}

Checkpoint average_checkpoints(std::span<const std::filesystem::path> paths) {
  std::vector<Checkpoint> loaded;
  for (const auto& p : paths) loaded.push_back(load_checkpoint(p));
  return average_checkpoints(std::span<const Checkpoint>(loaded));
}

template NamedTensor to_named(const std::string&, const Mat<float>&);
template NamedTensor to_named(const std::string&, const Mat<double>&);
template Mat<float> from_named<float>(const NamedTensor&);
template Mat<double> from_named<double>(const NamedTensor&);
template std::vector<NamedTensor> snapshot_parameters(const Model<float>&);
template std::vector<NamedTensor> snapshot_parameters(const Model<double>&);
template void restore_parameters(Model<float>&, const Checkpoint&);
template void restore_parameters(Model<double>&, const Checkpoint&);

}  // namespace dcmcl
