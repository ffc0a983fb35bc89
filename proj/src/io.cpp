#include "mcmil/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mcmil {

namespace {

void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

std::vector<std::uint8_t> quantize(const Image& image) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(image.size()));
  std::size_t k = 0;
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      const float v = std::clamp(image(r, c), 0.0f, 1.0f);
      bytes[k++] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  return bytes;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  const auto bytes = quantize(image);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(path, "write failed");
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open for reading");
  std::string magic;
  in >> magic;
  if (magic != "P5") fail(path, "bad magic '" + magic + "', expected P5");
  int width = 0, height = 0, maxval = 0;
  in >> width >> height >> maxval;
  if (!in || width <= 0 || height <= 0) fail(path, "bad dimensions");
  if (maxval != 255) fail(path, "unsupported maxval " + std::to_string(maxval));
  in.get();  // single whitespace after header
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) fail(path, "truncated pixel data");
  Image image(height, width);
  std::size_t k = 0;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) image(r, c) = static_cast<float>(bytes[k++]) / 255.0f;
  return image;
}

namespace {

void save_split(const std::filesystem::path& dir, const std::vector<ImageBag>& bags,
                const std::string& split, std::ostream& manifest) {
  for (const auto& bag : bags) {
    write_pgm(dir / (bag.id + ".pgm"), bag.pixels);
    if (bag.truth_mask) {
      write_pgm(dir / (bag.id + ".mask.pgm"),
                bag.truth_mask->cast<float>());
    }
    manifest << bag.id << ',' << bag.label << ',' << split << '\n';
  }
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const std::vector<ImageBag>& train,
                  const std::vector<ImageBag>& test) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) fail(dir / "manifest.csv", "cannot open for writing");
  manifest << "id,label,split\n";
  save_split(dir, train, "train", manifest);
  save_split(dir, test, "test", manifest);
  if (!manifest) fail(dir / "manifest.csv", "write failed");
}

std::pair<std::vector<ImageBag>, std::vector<ImageBag>> load_dataset(
    const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) fail(dir / "manifest.csv", "cannot open for reading");
  std::string line;
  if (!std::getline(manifest, line) || line != "id,label,split")
    fail(dir / "manifest.csv", "bad header line '" + line + "'");
  std::vector<ImageBag> train, test;
  int lineno = 1;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, label_str, split;
    if (!std::getline(row, id, ',') || !std::getline(row, label_str, ',') ||
        !std::getline(row, split)) {
      fail(dir / "manifest.csv", "malformed row at line " + std::to_string(lineno));
    }
    ImageBag bag;
    bag.id = id;
    bag.label = std::stoi(label_str);
    bag.pixels = read_pgm(dir / (id + ".pgm"));
    const auto mask_path = dir / (id + ".mask.pgm");
    if (std::filesystem::exists(mask_path)) {
      Image m = read_pgm(mask_path);
      bag.truth_mask = (m.array() > 0.5f).cast<std::uint8_t>().matrix();
    }
    if (split == "train") {
      train.push_back(std::move(bag));
    } else if (split == "test") {
      test.push_back(std::move(bag));
    } else {
      fail(dir / "manifest.csv", "unknown split '" + split + "' at line " + std::to_string(lineno));
    }
  }
  return {std::move(train), std::move(test)};
}

}  // namespace mcmil
