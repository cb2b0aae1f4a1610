#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "diffnet/errors.hpp"
#include "diffnet/model.hpp"
#include "diffnet/params.hpp"

namespace diffnet {

// Binary checkpoint: fixed header followed by the named parameter arrays in
// declaration order, values as little-endian float32. Loading quantizes to
// 32-bit, so save -> load -> save is byte-stable and loaded predictions are
// reproducible bit-exactly.
struct Checkpoint {
  ModelConfig config;
  ModelDims dims;
  std::uint64_t seed = 0;
  ParameterSet params;
};

namespace ckpt_detail {

constexpr char kMagic[8] = {'D', 'N', 'P', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<unsigned char, 4> b{static_cast<unsigned char>(v & 0xff),
                                 static_cast<unsigned char>((v >> 8) & 0xff),
                                 static_cast<unsigned char>((v >> 16) & 0xff),
                                 static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffULL));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

inline std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw DataError("checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

inline float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace ckpt_detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  using namespace ckpt_detail;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path);
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.dims.M));
  put_u32(out, static_cast<std::uint32_t>(ckpt.dims.N));
  put_u32(out, static_cast<std::uint32_t>(ckpt.config.D));
  put_u32(out, static_cast<std::uint32_t>(ckpt.config.K));
  put_u32(out, static_cast<std::uint32_t>(ckpt.dims.d1));
  put_u32(out, static_cast<std::uint32_t>(ckpt.dims.d2));
  put_u32(out, static_cast<std::uint32_t>(ckpt.config.hidden()));
  put_u32(out, static_cast<std::uint32_t>(ckpt.config.variant));
  put_u32(out, ckpt.config.node_attention == AttentionMode::Att ? 1 : 0);
  put_u32(out, ckpt.config.graph_attention == AttentionMode::Att ? 1 : 0);
  put_u32(out, ckpt.config.share_attention_mlps ? 1 : 0);
  put_u32(out, ckpt.config.gamma_input == GammaInput::Previous ? 1 : 0);
  put_u32(out, ckpt.config.use_user_features ? 1 : 0);
  put_u32(out, ckpt.config.use_item_features ? 1 : 0);
  put_u64(out, ckpt.seed);
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.count()));
  for (std::size_t i = 0; i < ckpt.params.count(); ++i) {
    const std::string& name = ckpt.params.name(i);
    const Tensor& t = ckpt.params.tensor(i);
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    put_u64(out, t.rows());
    if (t.rank() == 2) put_u64(out, t.cols());
    for (std::size_t j = 0; j < t.numel(); ++j) put_f32(out, static_cast<float>(t[j]));
  }
  if (!out) throw DataError("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  using namespace ckpt_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  if (get_u32(in) != kVersion) throw DataError("checkpoint: unsupported version in " + path);

  Checkpoint ckpt;
  ckpt.dims.M = static_cast<int>(get_u32(in));
  ckpt.dims.N = static_cast<int>(get_u32(in));
  ckpt.config.D = static_cast<int>(get_u32(in));
  ckpt.config.K = static_cast<int>(get_u32(in));
  ckpt.dims.d1 = static_cast<int>(get_u32(in));
  ckpt.dims.d2 = static_cast<int>(get_u32(in));
  ckpt.config.H = static_cast<int>(get_u32(in));
  const std::uint32_t variant = get_u32(in);
  if (variant > 2) throw DataError("checkpoint: unknown variant code in " + path);
  ckpt.config.variant = static_cast<Variant>(variant);
  ckpt.config.node_attention = get_u32(in) ? AttentionMode::Att : AttentionMode::Avg;
  ckpt.config.graph_attention = get_u32(in) ? AttentionMode::Att : AttentionMode::Avg;
  ckpt.config.share_attention_mlps = get_u32(in) != 0;
  ckpt.config.gamma_input = get_u32(in) ? GammaInput::Previous : GammaInput::Current;
  ckpt.config.use_user_features = get_u32(in) != 0;
  ckpt.config.use_item_features = get_u32(in) != 0;
  ckpt.seed = get_u64(in);

  const std::uint32_t n_arrays = get_u32(in);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = get_u32(in);
    const std::uint64_t rows = get_u64(in);
    const std::uint64_t cols = rank == 2 ? get_u64(in) : 1;
    Tensor t = rank == 2 ? Tensor::zeros(rows, cols) : Tensor::zeros(rows);
    for (std::size_t j = 0; j < t.numel(); ++j) t[j] = static_cast<double>(get_f32(in));
    ckpt.params.add(name, std::move(t));
  }
  if (!in) throw DataError("checkpoint: truncated file " + path);
  return ckpt;
}

}  // namespace diffnet
