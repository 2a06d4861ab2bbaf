#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aerogh/common.hpp"
#include "aerogh/sim/greenhouse.hpp"

namespace aerogh::vision {

using sim::LeafClass;
using sim::kNumLeafClasses;
namespace fs = std::filesystem;

inline constexpr LeafClass kAllClasses[] = {LeafClass::healthy, LeafClass::drought,
                                            LeafClass::rust};

/// 8-bit RGB image, row-major, interleaved channels.
struct LabeledImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  LeafClass label = LeafClass::healthy;
  std::string source_id;

  LabeledImage() = default;
  LabeledImage(int w, int h, LeafClass l, std::string id)
      : width(w), height(h), pixels(static_cast<std::size_t>(3 * w * h), 0), label(l),
        source_id(std::move(id)) {}

  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool valid() const { return width > 0 && height > 0 && pixels.size() == 3u * width * height; }
};

inline std::array<std::size_t, kNumLeafClasses> class_counts(const std::vector<LabeledImage>& images) {
  std::array<std::size_t, kNumLeafClasses> counts{};
  for (const auto& im : images) counts[static_cast<int>(im.label)] += 1;
  return counts;
}

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary PPM (P6, maxval 255).
inline void write_ppm(const LabeledImage& im, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out << "P6\n" << im.width << ' ' << im.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(im.pixels.data()),
            static_cast<std::streamsize>(im.pixels.size()));
  if (!out) throw ImageIoError("write failed on " + path.string());
}

inline LabeledImage read_ppm(const fs::path& path, LeafClass label, std::string source_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
      } else {
        t.push_back(c);
      }
    }
    return t;
  };
  if (token() != "P6") throw ImageIoError(path.string() + ": not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw ImageIoError(path.string() + ": bad PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw ImageIoError(path.string() + ": unsupported PPM");
  LabeledImage im(w, h, label, std::move(source_id));
  in.read(reinterpret_cast<char*>(im.pixels.data()), static_cast<std::streamsize>(im.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(im.pixels.size()))
    throw ImageIoError(path.string() + ": truncated pixel data");
  return im;
}

/// Loads `<root>/<class>/<id>.ppm` for the three leaf classes, sorted by id.
inline std::vector<LabeledImage> load_directory(const fs::path& root) {
  if (!fs::is_directory(root)) throw ImageIoError(root.string() + " is not a directory");
  std::vector<LabeledImage> out;
  for (LeafClass c : kAllClasses) {
    const fs::path dir = root / std::string(sim::to_string(c));
    if (!fs::is_directory(dir)) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      out.push_back(read_ppm(f, c, std::string(sim::to_string(c)) + "/" + f.stem().string()));
  }
  return out;
}

inline void save_directory(const std::vector<LabeledImage>& images, const fs::path& root) {
  for (LeafClass c : kAllClasses) fs::create_directories(root / std::string(sim::to_string(c)));
  for (const auto& im : images) {
    std::string id = im.source_id;
    std::replace(id.begin(), id.end(), '/', '_');
    std::replace(id.begin(), id.end(), '#', '_');
    write_ppm(im, root / std::string(sim::to_string(im.label)) / (id + ".ppm"));
  }
}

}  // namespace aerogh::vision
