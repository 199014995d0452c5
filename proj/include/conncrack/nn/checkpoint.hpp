#pragma once

#include "conncrack/nn/layers.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace conncrack::nn {

/// Named float tensors, serialized as CKPT1:
///   "CKPT1" | u32 count | per entry: u32 name_len, name, u32 rank,
///   u32 extents[rank], f32 payload.  All integers and floats little-endian.
struct Checkpoint {
    std::map<std::string, Tensor<float>> entries;

    bool contains(const std::string& name) const { return entries.count(name) != 0; }
    const Tensor<float>& at(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames, so readers never see a
/// half-written file.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

template <typename T>
Checkpoint snapshot(const ParamList<T>& params);

/// Copy matching entries into `params`. Every parameter must be present
/// with an identical shape.
template <typename T>
void restore(const Checkpoint& ckpt, const ParamList<T>& params);

} // namespace conncrack::nn
