#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "mgvae/tensor.hpp"

namespace mgvae {

// Named-tensor container stored as a single file:
//
//   magic      8 bytes  "MGVAEv01"
//   count      u64      number of records
//   record*    u32 name length, UTF-8 name bytes,
//              u32 axis count, u64 axis size per axis,
//              float64 values in row-major order
//
// All integers and floats are little-endian.
inline constexpr char kCheckpointMagic[9] = "MGVAEv01";

using TensorMap = std::map<std::string, Tensor>;

void save_checkpoint(const std::filesystem::path& path, const TensorMap& tensors);
// Throws FormatError on a bad magic header or truncated records, IoError when
// the file cannot be opened.
TensorMap load_checkpoint(const std::filesystem::path& path);

}  // namespace mgvae
