#pragma once

// Parameter checkpoint container (all integers little-endian):
//
//   offset  size  field
//   0       4     magic "TLCK"
//   4       4     u32 format version (= 1)
//   8       4     u32 tensor count
//   then per tensor:
//           4     u32 name length L
//           L     name bytes (UTF-8, no terminator)
//           4     u32 rank R
//           4*R   u32 extents, outermost first
//           4*N   f32 data, row-major, N = product of extents
//
// Tensors are matched by name on load; order in the file is the order of
// the parameter list at save time.

#include <map>
#include <string>
#include <vector>

#include "towerlab/core/binio.hpp"
#include "towerlab/core/errors.hpp"
#include "towerlab/nn/tensor.hpp"

namespace towerlab::nn {

inline constexpr char kCheckpointMagic[4] = {'T', 'L', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
std::vector<std::uint8_t> encode_checkpoint(const std::vector<Parameter<T>*>& params) {
  ByteWriter w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.str(p->name);
    w.u32(static_cast<std::uint32_t>(p->value.rank()));
    for (auto e : p->value.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (auto v : p->value.data()) w.f32(static_cast<float>(v));
  }
  return w.buffer();
}

struct CheckpointTensor {
  Shape shape;
  std::vector<float> data;
};

inline std::map<std::string, CheckpointTensor> decode_checkpoint(ByteReader r) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != std::string(kCheckpointMagic, 4)) r.fail("bad checkpoint magic", 0);
  const auto version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version), 4);
  const auto count = r.u32();
  std::map<std::string, CheckpointTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto at = r.offset();
    auto name = r.str(4096);
    const auto rank = r.u32();
    if (rank == 0 || rank > 8) r.fail("tensor '" + name + "' has invalid rank " + std::to_string(rank), at);
    CheckpointTensor t;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto e = r.u32();
      if (e == 0) r.fail("tensor '" + name + "' has a zero extent", at);
      t.shape.push_back(e);
    }
    const auto n = shape_numel(t.shape);
    if (n * 4 > r.remaining()) r.fail("tensor '" + name + "' data truncated", r.offset());
    t.data.resize(n);
    for (auto& v : t.data) v = r.f32();
    if (!out.emplace(std::move(name), std::move(t)).second) r.fail("duplicate tensor name", at);
  }
  if (!r.at_end()) r.fail("trailing bytes after last tensor");
  return out;
}

template <class T>
void save_checkpoint(const std::string& path, const std::vector<Parameter<T>*>& params) {
  ByteWriter w;
  const auto bytes = encode_checkpoint(params);
  w.bytes(bytes.data(), bytes.size());
  w.write_file(path);
}

// Loads into an existing parameter list. Every parameter must be present
// with an identical shape; a mismatch is a configuration error.
template <class T>
void apply_checkpoint(const std::map<std::string, CheckpointTensor>& tensors, const std::vector<Parameter<T>*>& params) {
  if (tensors.size() != params.size())
    throw ConfigError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                      std::to_string(params.size()));
  for (auto* p : params) {
    auto it = tensors.find(p->name);
    if (it == tensors.end()) throw ConfigError("checkpoint is missing tensor '" + p->name + "'");
    if (it->second.shape != p->value.shape())
      throw ConfigError("checkpoint tensor '" + p->name + "' has shape " + shape_str(it->second.shape) +
                        ", model expects " + shape_str(p->value.shape()));
    auto dst = p->value.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second.data[i]);
  }
}

template <class T>
void load_checkpoint(const std::string& path, const std::vector<Parameter<T>*>& params) {
  apply_checkpoint(decode_checkpoint(ByteReader::from_file(path)), params);
}

}  // namespace towerlab::nn
