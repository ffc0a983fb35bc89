#pragma once

#include "mcmil/bag.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <utility>
#include <vector>

namespace mcmil {

enum class GlyphSource { idx, procedural };

/// A pool of small square intensity tiles with digit class labels.
struct GlyphSet {
  std::vector<Image> glyphs;   // each g x g, intensities in [0,1]
  std::vector<int> classes;    // per-glyph label in 0..9
  GlyphSource source = GlyphSource::procedural;

  int glyph_size() const { return glyphs.empty() ? 0 : static_cast<int>(glyphs[0].rows()); }
};

enum class Layout { sparse, clustered };

struct SynthConfig {
  int bag_size = 256;
  int glyph_count_per_bag = 12;
  int target_class = 9;
  int positive_target_count_min = 1;
  Layout layout = Layout::sparse;
  double cluster_radius = 32.0;  // used when layout == clustered
  std::uint64_t seed = 0;
  int n_train = 200;
  int n_test = 80;
};

/// Reads an IDX image/label file pair (big-endian magic 0x00000803 for
/// images, 0x00000801 for labels). Byte intensities are rescaled to [0,1]
/// by dividing by 255. Throws std::runtime_error naming the byte offset on
/// malformed input or an image/label count mismatch.
GlyphSet load_idx(const std::filesystem::path& images_path,
                  const std::filesystem::path& labels_path);

/// Deterministic procedural glyph pool: several 28x28 variants per class
/// 0..9, each class a distinct shape. A hermetic stand-in for IDX digits.
GlyphSet procedural_glyphs(std::uint64_t seed);

/// Composites one bag: black background, glyph_count_per_bag glyphs pasted
/// at non-overlapping positions. Positive bags contain a random count of
/// target-class glyphs in [min, 3*min]; negative bags contain none. The
/// truth mask is 1 exactly on target-glyph bounding boxes.
/// placed_targets, when given, receives the target-glyph bounding boxes.
ImageBag generate_bag(const SynthConfig& cfg, const GlyphSet& glyphs, int label,
                      std::mt19937_64& rng, std::string id = "bag",
                      std::vector<PatchCoord>* placed_targets = nullptr);

/// Generates class-balanced train/test splits, deterministic per cfg.seed.
/// Each bag consumes an independent rng stream keyed by (seed, split, index).
std::pair<std::vector<ImageBag>, std::vector<ImageBag>> generate_dataset(const SynthConfig& cfg,
                                                                         const GlyphSet& glyphs);

}  // namespace mcmil
