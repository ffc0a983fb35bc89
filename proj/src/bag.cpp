#include "mcmil/bag.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mcmil {

Patch extract_patch(const ImageBag& bag, PatchCoord coord) {
  const int h = bag.height();
  const int w = bag.width();
  if (coord.size <= 0 || coord.row < 0 || coord.col < 0 || coord.row + coord.size > h ||
      coord.col + coord.size > w) {
    throw std::out_of_range("extract_patch: coord (row=" + std::to_string(coord.row) +
                            ", col=" + std::to_string(coord.col) +
                            ", size=" + std::to_string(coord.size) + ") out of bounds for " +
                            std::to_string(h) + "x" + std::to_string(w) + " bag");
  }
  return Patch{coord, bag.pixels.block(coord.row, coord.col, coord.size, coord.size)};
}

PatchCoord clamp_center(double center_row, double center_col, int size, int height, int width) {
  auto clamp_axis = [size](double center, int extent) {
    double top_left = std::floor(center - size / 2.0);
    top_left = std::clamp(top_left, 0.0, static_cast<double>(extent - size));
    return static_cast<int>(top_left);
  };
  return PatchCoord{clamp_axis(center_row, height), clamp_axis(center_col, width), size};
}

}  // namespace mcmil
