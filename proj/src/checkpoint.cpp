#include "emoseq/checkpoint.hpp"

#include <cstring>

#include "emoseq/error.hpp"
#include "io_util.hpp"

namespace emoseq {
namespace {

constexpr char kMagic[8] = {'E', 'M', 'S', 'Q', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void u32(std::uint32_t v) { detail::put_u32(bytes, v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void tensor(const std::string& name, std::span<const double> values) {
    str(name);
    u32(static_cast<std::uint32_t>(values.size()));
    for (double v : values) detail::put_f32(bytes, static_cast<float>(v));
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint32_t u32() {
    const auto v = detail::get_u32(bytes_, pos_);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (pos_ + n > bytes_.size()) throw Error(ErrorKind::Format, "truncated checkpoint string");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void tensor(const std::string& expected, std::span<double> out) {
    const std::string name = str();
    if (name != expected) throw Error(ErrorKind::Format, "checkpoint tensor '" + name + "', expected '" + expected + "'");
    const std::uint32_t n = u32();
    if (n != out.size()) throw Error(ErrorKind::Format, "checkpoint tensor '" + name + "' has wrong size");
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = detail::get_f32(bytes_, pos_);
      pos_ += 4;
    }
  }
  bool done() const { return pos_ == bytes_.size(); }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_shape(Writer& w, const model::ModelShape& s) {
  w.u32(s.use_encoder ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(s.conv1_channels));
  w.u32(static_cast<std::uint32_t>(s.conv2_channels));
  w.u32(static_cast<std::uint32_t>(s.embed_dim));
  w.u32(static_cast<std::uint32_t>(s.hidden));
  w.u32(static_cast<std::uint32_t>(s.num_classes));
  w.u32(s.loss_mode == model::LossMode::Ctc ? 1 : 0);
}

model::ModelShape read_shape(Reader& r) {
  model::ModelShape s;
  s.use_encoder = r.u32() != 0;
  s.conv1_channels = r.u32();
  s.conv2_channels = r.u32();
  s.embed_dim = r.u32();
  s.hidden = r.u32();
  s.num_classes = r.u32();
  s.loss_mode = r.u32() != 0 ? model::LossMode::Ctc : model::LossMode::FramewiseCe;
  if (s.embed_dim == 0 || s.hidden == 0 || s.num_classes == 0 || s.hidden > 4096 || s.embed_dim > 65536 ||
      s.num_classes > 1024 || s.conv1_channels > 1024 || s.conv2_channels > 1024) {
    throw Error(ErrorKind::Format, "implausible model shape in checkpoint");
  }
  return s;
}

void write_params(Writer& w, const model::SeqParams& p) {
  write_shape(w, p.shape);
  const auto ts = model::tensors(p);
  w.u32(static_cast<std::uint32_t>(ts.size()));
  for (const auto& t : ts) w.tensor(t.name, t.values);
}

model::SeqParams read_params(Reader& r) {
  model::SeqParams p = model::zero_params(read_shape(r));
  auto ts = model::tensors(p);
  if (r.u32() != ts.size()) throw Error(ErrorKind::Format, "checkpoint tensor count mismatch");
  for (auto& t : ts) r.tensor(t.name, t.values);
  return p;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes.assign(kMagic, kMagic + 8);
  w.u32(kCheckpointVersion);
  if (const auto* seq = std::get_if<model::SeqParams>(&c.model)) {
    w.u32(0);
    w.str(c.modality);
    write_params(w, *seq);
  } else {
    const auto& f = std::get<fusion::FusionModel>(c.model);
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(f.num_classes));
    w.u32(static_cast<std::uint32_t>(f.branches.size()));
    for (std::size_t b = 0; b < f.branches.size(); ++b) {
      w.str(f.modalities[b]);
      write_params(w, f.branches[b]);
    }
    w.tensor("fusion.class_w", f.head.class_w);
    w.tensor("fusion.class_b", f.head.class_b);
    w.tensor("fusion.reg_w", f.head.reg_w);
    w.tensor("fusion.reg_b", f.head.reg_b);
  }
  return w.bytes;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw Error(ErrorKind::Format, "not an emoseq checkpoint");
  }
  Reader r(bytes);
  r.skip(8);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const std::uint32_t kind = r.u32();
  if (kind == 0) {
    c.modality = r.str();
    c.model = read_params(r);
  } else if (kind == 1) {
    fusion::FusionModel f;
    f.num_classes = r.u32();
    const std::uint32_t branches = r.u32();
    if (branches == 0 || branches > 16) throw Error(ErrorKind::Format, "implausible branch count");
    for (std::uint32_t b = 0; b < branches; ++b) {
      f.modalities.push_back(r.str());
      f.branches.push_back(read_params(r));
    }
    const std::size_t dim = f.fused_dim();
    f.head.class_w.resize(f.num_classes * dim);
    f.head.class_b.resize(f.num_classes);
    f.head.reg_w.resize(2 * dim);
    f.head.reg_b.resize(2);
    r.tensor("fusion.class_w", f.head.class_w);
    r.tensor("fusion.class_b", f.head.class_b);
    r.tensor("fusion.reg_w", f.head.reg_w);
    r.tensor("fusion.reg_b", f.head.reg_b);
    c.model = std::move(f);
  } else {
    throw Error(ErrorKind::Format, "unknown checkpoint kind");
  }
  if (!r.done()) throw Error(ErrorKind::Format, "trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  detail::write_file_atomic(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(detail::read_file(path)); }

}  // namespace emoseq
