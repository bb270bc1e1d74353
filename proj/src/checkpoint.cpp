// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "arsl/errors.hpp"

namespace arsl {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'S', 'L', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string& data() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& in, std::size_t end) : in_(in), end_(end) {}
  void need(std::size_t n) {
    if (pos_ + n > end_) throw FormatError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * k);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& in_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

void write_model(Writer& w, const std::string& prefix, const ModelParams& p) {
  for (const ParamBlock& b : param_layout(p.config)) {
    w.str(prefix + b.name);
    w.u32(static_cast<std::uint32_t>(b.shape.size()));
    for (int d : b.shape) w.u32(static_cast<std::uint32_t>(d));
    for (std::size_t k = 0; k < b.size; ++k) w.f64(p.values[b.offset + k]);
  }
}

void read_model(Reader& r, const std::string& prefix, ModelParams& p) {
  for (const ParamBlock& b : param_layout(p.config)) {
    const std::string name = r.str();
    if (name != prefix + b.name) {
      throw FormatError("checkpoint: expected array '" + prefix + b.name + "', found '" + name + "'");
    }
    const std::uint32_t ndims = r.u32();
    if (ndims != b.shape.size()) throw FormatError("checkpoint: rank mismatch for " + name);
    for (int d : b.shape) {
      if (r.u32() != static_cast<std::uint32_t>(d)) throw FormatError("checkpoint: shape mismatch for " + name);
    }
    for (std::size_t k = 0; k < b.size; ++k) p.values[b.offset + k] = r.f64();
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  if (!(ckpt.student.config == ckpt.teacher.config)) {
    throw ConfigError("checkpoint: student and teacher configs differ");
  }
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u64(ckpt.iteration);
  const ModelConfig& cfg = ckpt.student.config;
  w.i32(cfg.num_classes);
  for (int c : cfg.channels) w.i32(c);
  for (int s : cfg.strides) w.i32(s);
  write_model(w, "student/", ckpt.student);
  write_model(w, "teacher/", ckpt.teacher);
  w.str("momentum");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(ckpt.momentum.size()));
  for (double v : ckpt.momentum) w.f64(v);
  const std::uint64_t sum = fnv1a(w.data().data(), w.data().size());
  w.u64(sum);
  return std::move(w.data());
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8 + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("checkpoint: bad magic (not an arsl checkpoint)");
  }
  std::uint32_t version = 0;
  {
    Reader rv(bytes, bytes.size());
    rv.u64();  // magic
    version = rv.u32();
  }
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int k = 0; k < 8; ++k) stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[body + k])) << (8 * k);
  if (stored != fnv1a(bytes.data(), body)) throw FormatError("checkpoint: checksum mismatch (corrupt file)");

  Reader r(bytes, body);
  r.u64();
  r.u32();
  Checkpoint ckpt;
  ckpt.iteration = r.u64();
  ModelConfig cfg;
  cfg.num_classes = r.i32();
  for (int& c : cfg.channels) c = r.i32();
  for (int& s : cfg.strides) s = r.i32();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid model config: ") + e.what());
  }
  ckpt.student = zero_params(cfg);
  ckpt.teacher = zero_params(cfg);
  read_model(r, "student/", ckpt.student);
  read_model(r, "teacher/", ckpt.teacher);
  if (r.str() != "momentum" || r.u32() != 1) throw FormatError("checkpoint: missing momentum array");
  const std::uint32_t n = r.u32();
  if (n != 0 && n != ckpt.student.values.size()) throw FormatError("checkpoint: momentum size mismatch");
  ckpt.momentum.resize(n);
  for (double& v : ckpt.momentum) v = r.f64();
  if (r.pos() != body) throw FormatError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint: cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace arsl
