// Model checkpoint file: 8-byte magic "MILMINE1", a version integer,
// the ModelConfig, then every parameter tensor in declaration order.
// Binary little-endian; save -> load round-trips bit exactly.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "milmine/common.hpp"
#include "milmine/model.hpp"

namespace milmine {

inline constexpr char kCheckpointMagic[8] = {'M', 'I', 'L', 'M',
                                            'I', 'N', 'E', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw CheckpointError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i)
    buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

inline double read_f64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw CheckpointError("checkpoint truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace detail

inline void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 8);
  detail::write_u32(out, kCheckpointVersion);
  const auto& c = params.config;
  detail::write_u32(out, static_cast<std::uint32_t>(c.vocab_size));
  detail::write_u32(out, static_cast<std::uint32_t>(c.window_width));
  detail::write_u32(out, static_cast<std::uint32_t>(c.token_embed_dim));
  detail::write_u32(out, static_cast<std::uint32_t>(c.instance_feature_dim));
  detail::write_u32(out, static_cast<std::uint32_t>(c.attention_dim));
  detail::write_u32(out, static_cast<std::uint32_t>(c.pooling));
  detail::write_u32(out, static_cast<std::uint32_t>(c.head));
  detail::write_u32(out, static_cast<std::uint32_t>(c.hidden1));
  detail::write_u32(out, static_cast<std::uint32_t>(c.hidden2));
  detail::write_u32(out, c.svm_on_pooled ? 1 : 0);
  detail::write_u32(out, static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    detail::write_string(out, t.name);
    detail::write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape)
      detail::write_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data) detail::write_f64(out, v);
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw CheckpointError("bad checkpoint magic: " + path);
  const std::uint32_t version = detail::read_u32(in);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  ModelConfig c;
  c.vocab_size = static_cast<int>(detail::read_u32(in));
  c.window_width = static_cast<int>(detail::read_u32(in));
  c.token_embed_dim = static_cast<int>(detail::read_u32(in));
  c.instance_feature_dim = static_cast<int>(detail::read_u32(in));
  c.attention_dim = static_cast<int>(detail::read_u32(in));
  c.pooling = static_cast<Pooling>(detail::read_u32(in));
  c.head = static_cast<Head>(detail::read_u32(in));
  c.hidden1 = static_cast<int>(detail::read_u32(in));
  c.hidden2 = static_cast<int>(detail::read_u32(in));
  c.svm_on_pooled = detail::read_u32(in) != 0;
  ModelParams expected = make_params(c);
  const std::uint32_t count = detail::read_u32(in);
  if (count != expected.tensors.size())
    throw CheckpointError("checkpoint tensor count does not match config");
  for (auto& t : expected.tensors) {
    const std::string name = detail::read_string(in);
    if (name != t.name)
      throw CheckpointError("checkpoint tensor order mismatch: expected " +
                            t.name + ", got " + name);
    const std::uint32_t ndims = detail::read_u32(in);
    if (ndims != t.shape.size())
      throw CheckpointError("checkpoint tensor rank mismatch for " + name);
    for (std::size_t i = 0; i < t.shape.size(); ++i)
      if (detail::read_u32(in) != t.shape[i])
        throw CheckpointError("checkpoint tensor shape mismatch for " + name);
    for (double& v : t.data) v = detail::read_f64(in);
  }
  return expected;
}

}  // namespace milmine
