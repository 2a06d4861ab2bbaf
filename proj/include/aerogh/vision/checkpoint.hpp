#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "aerogh/vision/network.hpp"

namespace aerogh::vision {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'A', 'G', 'H', 'N', 'E', 'T', '\0', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CheckpointError("checkpoint truncated");
  return v;
}

}  // namespace detail

/// Layout (all integers little-endian):
///   8 bytes  magic "AGHNET\0\0"
///   u32      version (1)
///   i32 x5   width, height, channels_in, hidden, classes
///   u32      number of conv blocks, then i32 channels per block
///   u8       frozen_backbone
///   u64      parameter count
///   f32 x n  parameters in network layout order
inline void save_checkpoint(const ConvNet<float>& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  const auto& a = model.architecture();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  for (int v : {a.width, a.height, a.channels_in, a.hidden, a.classes}) detail::put_le<std::int32_t>(out, v);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.conv_channels.size()));
  for (int c : a.conv_channels) detail::put_le<std::int32_t>(out, c);
  detail::put_le<std::uint8_t>(out, model.frozen_backbone ? 1 : 0);
  const auto p = model.parameters();
  detail::put_le<std::uint64_t>(out, p.size());
  out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(float)));
  if (!out) throw CheckpointError("write failed on " + path.string());
}

inline ConvNet<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw CheckpointError(path.string() + " is not a model checkpoint");
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Architecture a;
  a.width = detail::get_le<std::int32_t>(in);
  a.height = detail::get_le<std::int32_t>(in);
  a.channels_in = detail::get_le<std::int32_t>(in);
  a.hidden = detail::get_le<std::int32_t>(in);
  a.classes = detail::get_le<std::int32_t>(in);
  const auto blocks = detail::get_le<std::uint32_t>(in);
  if (blocks > 16) throw CheckpointError("implausible block count");
  a.conv_channels.clear();
  for (std::uint32_t i = 0; i < blocks; ++i) a.conv_channels.push_back(detail::get_le<std::int32_t>(in));
  const bool frozen = detail::get_le<std::uint8_t>(in) != 0;
  const auto n = detail::get_le<std::uint64_t>(in);

  ConvNet<float> model(a);
  if (n != model.parameter_count())
    throw CheckpointError("parameter count " + std::to_string(n) + " does not match architecture (" +
                          std::to_string(model.parameter_count()) + ")");
  model.frozen_backbone = frozen;
  auto p = model.parameters();
  in.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(float))) throw CheckpointError("checkpoint truncated");
  for (float v : p)
    if (!std::isfinite(v)) throw CheckpointError("checkpoint contains non-finite weights");
  return model;
}

}  // namespace aerogh::vision
