#pragma once

#include "mcmil/bag.hpp"

#include <filesystem>
#include <utility>
#include <vector>

namespace mcmil {

/// Writes an intensity grid as binary PGM (P5, maxval 255). Values are
/// clamped to [0,1] and scaled by 255 with round-to-nearest.
void write_pgm(const std::filesystem::path& path, const Image& image);

/// Reads a binary P5 PGM with maxval 255 back into intensities in [0,1].
/// Throws std::runtime_error on malformed headers or short data.
Image read_pgm(const std::filesystem::path& path);

/// Saves both splits as PGM files plus a `manifest.csv` with header
/// `id,label,split`. Truth masks, when present, go to `<id>.mask.pgm`.
void save_dataset(const std::filesystem::path& dir, const std::vector<ImageBag>& train,
                  const std::vector<ImageBag>& test);

/// Loads a dataset directory written by save_dataset.
std::pair<std::vector<ImageBag>, std::vector<ImageBag>> load_dataset(
    const std::filesystem::path& dir);

}  // namespace mcmil
