#include "canet/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "canet/errors.hpp"
#include "canet/image_io.hpp"

namespace canet {
namespace {

constexpr char kMagic[4] = {'C', 'A', 'N', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw ParseError(std::string("truncated checkpoint: ") + what, pos_);
    }
  }
  template <typename T>
  T uint(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>("value")); }
  std::string str(const char* what) {
    const auto n = uint<std::uint32_t>(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

Tensor from_vector(const std::vector<double>& v) {
  Tensor t(Shape{1, static_cast<int>(v.size()), 1, 1});
  std::copy(v.begin(), v.end(), t.ptr());
  return t;
}

const CheckpointRecord& require(const Checkpoint& ckpt, const std::string& name,
                                const Shape& shape) {
  const CheckpointRecord* r = ckpt.find(name);
  if (r == nullptr) throw ShapeError("checkpoint has no record '" + name + "'");
  if (r->value.shape() != shape) {
    throw ShapeError("checkpoint record '" + name + "' has shape " +
                     r->value.shape().str() + ", model expects " + shape.str());
  }
  return *r;
}

}  // namespace

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

Checkpoint capture_checkpoint(const CanetModel& model,
                              const SgdOptimizer* optimizer,
                              std::uint64_t iteration,
                              std::string config_text) {
  Checkpoint ckpt;
  ckpt.iteration = iteration;
  ckpt.config_text = std::move(config_text);
  const ModelGraph& g = model.graph();
  for (const Parameter& p : g.parameters()) {
    ckpt.records.push_back({"param/" + p.name, p.value});
  }
  for (const Parameter& p : g.parameters()) {
    Tensor v(p.value.shape());
    if (optimizer != nullptr) {
      const auto it = optimizer->velocities().find(p.name);
      if (it != optimizer->velocities().end()) v = it->second;
    }
    ckpt.records.push_back({"momentum/" + p.name, std::move(v)});
  }
  for (const BatchNormState& s : g.batch_norm_states()) {
    ckpt.records.push_back({"bn_mean/" + s.name, from_vector(s.running_mean)});
    ckpt.records.push_back({"bn_var/" + s.name, from_vector(s.running_var)});
  }
  return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, CanetModel& model,
                        SgdOptimizer* optimizer) {
  ModelGraph& g = model.graph();
  // Validate everything before touching the model.
  for (const Parameter& p : g.parameters()) {
    require(ckpt, "param/" + p.name, p.value.shape());
    if (optimizer != nullptr) {
      require(ckpt, "momentum/" + p.name, p.value.shape());
    }
  }
  for (const BatchNormState& s : g.batch_norm_states()) {
    const Shape shape{1, static_cast<int>(s.running_mean.size()), 1, 1};
    require(ckpt, "bn_mean/" + s.name, shape);
    require(ckpt, "bn_var/" + s.name, shape);
  }
  for (Parameter& p : g.parameters()) {
    p.value = ckpt.find("param/" + p.name)->value;
    if (optimizer != nullptr) {
      optimizer->velocities()[p.name] = ckpt.find("momentum/" + p.name)->value;
    }
  }
  for (BatchNormState& s : g.batch_norm_states()) {
    const Tensor& m = ckpt.find("bn_mean/" + s.name)->value;
    const Tensor& v = ckpt.find("bn_var/" + s.name)->value;
    s.running_mean.assign(m.ptr(), m.ptr() + m.size());
    s.running_var.assign(v.ptr(), v.ptr() + v.size());
  }
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.uint(Checkpoint::kVersion);
  w.uint(ckpt.iteration);
  w.str(ckpt.config_text);
  w.uint(static_cast<std::uint32_t>(ckpt.records.size()));
  for (const auto& r : ckpt.records) {
    w.str(r.name);
    const Shape s = r.value.shape();
    for (int d : {s.n, s.c, s.h, s.w}) w.uint(static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < r.value.size(); ++i) w.f64(r.value[i]);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(sizeof(kMagic), "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not a checkpoint (bad magic)", 0);
  }
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.uint<std::uint8_t>("magic");
  const auto version = r.uint<std::uint16_t>("version");
  if (version != Checkpoint::kVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version),
                     r.pos() - 2);
  }
  Checkpoint ckpt;
  ckpt.iteration = r.uint<std::uint64_t>("iteration");
  ckpt.config_text = r.str("config text");
  const auto count = r.uint<std::uint32_t>("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointRecord rec;
    rec.name = r.str("record name");
    int dims[4];
    for (int& d : dims) {
      const auto v = r.uint<std::uint32_t>("record shape");
      if (v > (1u << 30)) throw ParseError("implausible tensor extent", r.pos() - 4);
      d = static_cast<int>(v);
    }
    const Shape shape{dims[0], dims[1], dims[2], dims[3]};
    const double elems = static_cast<double>(dims[0]) * dims[1] * dims[2] * dims[3];
    if (elems * 8.0 > static_cast<double>(bytes.size())) {
      throw ParseError("truncated checkpoint: record values", r.pos());
    }
    r.need(shape.numel() * 8, "record values");
    rec.value = Tensor(shape);
    for (std::size_t k = 0; k < shape.numel(); ++k) rec.value[k] = r.f64();
    ckpt.records.push_back(std::move(rec));
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint", r.pos());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace canet
