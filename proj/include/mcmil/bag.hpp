#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>

namespace mcmil {

using Image = Eigen::MatrixXf;
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Top-left corner plus side length of a square patch window, in pixels.
struct PatchCoord {
  int row = 0;
  int col = 0;
  int size = 0;

  bool operator==(const PatchCoord&) const = default;
};

/// One bag: a single grayscale image with one binary label.
/// truth_mask marks discriminative regions on synthetic data; it is
/// diagnostics-only and never consulted during training.
struct ImageBag {
  std::string id;
  Image pixels;  // intensities in [0,1], indexed (row, col)
  int label = 0;
  std::optional<Mask> truth_mask;

  int height() const { return static_cast<int>(pixels.rows()); }
  int width() const { return static_cast<int>(pixels.cols()); }
};

/// One instance: a size x size window copied out of a bag.
struct Patch {
  PatchCoord coord;
  Image pixels;
};

/// Copies the sub-grid at coord out of the bag.
/// Throws std::out_of_range if the window does not fit.
Patch extract_patch(const ImageBag& bag, PatchCoord coord);

/// Maps a real-valued center point to the top-left coord of the size x size
/// patch nearest to it, clamped so the patch lies fully inside an H x W
/// image. Rounding is floor(center - size/2) before clamping. Total for all
/// finite inputs.
PatchCoord clamp_center(double center_row, double center_col, int size, int height, int width);

}  // namespace mcmil
