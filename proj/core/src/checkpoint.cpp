#include "mgvae/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mgvae/error.hpp"

namespace mgvae {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& is, const char* what) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TensorMap& tensors) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kCheckpointMagic, 8);
  put<std::uint64_t>(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dim()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

TensorMap load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw FormatError("bad checkpoint magic in " + path.string());
  }
  const auto count = take<std::uint64_t>(is, "record count");
  TensorMap out;
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto name_len = take<std::uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw FormatError("checkpoint truncated in tensor name");
    const auto axes = take<std::uint32_t>(is, "axis count");
    if (axes > 16) throw FormatError("implausible axis count for tensor " + name);
    Shape shape(axes);
    for (auto& d : shape) d = take<std::uint64_t>(is, "axis size");
    std::vector<double> data(shape_numel(shape));
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw FormatError("checkpoint truncated in data of tensor " + name);
    }
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace mgvae
