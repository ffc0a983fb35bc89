#pragma once

#include "mcmil/bag.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace mcmil {

struct GridConfig {
  int patch_size = 32;
  double overlap = 0.0;  // fraction in [0,1)

  int stride() const {
    const int s = static_cast<int>(patch_size * (1.0 - overlap));
    return s < 1 ? 1 : s;
  }
};

/// Regular-grid patch positions: rows {0, stride, 2*stride, ...} while
/// row+size <= H, same for cols, full cross product in row-major order.
std::vector<PatchCoord> grid_positions(int height, int width, const GridConfig& cfg);

/// `count` independent top-left coords uniform over the legal range.
/// Duplicates permitted.
std::vector<PatchCoord> uniform_positions(int height, int width, int patch_size, int count,
                                          std::mt19937_64& rng);

/// One sampled image point with the classifier score of the patch centered
/// on it. Scores are unset until the first evaluation.
struct Particle {
  double row = 0.0;
  double col = 0.0;
  double raw_score = 0.0;
  double norm_score = 0.0;
  bool scored = false;
  bool fresh = false;  // replaced in the last resample, not yet displaced
};

struct ParticleSet {
  std::vector<Particle> particles;
  std::string bag_id;
  int iteration = 0;
};

enum class ResampleMode { deterministic, stochastic };

struct MCConfig {
  int n = 64;          // particles per bag
  int l = 16;          // particles replaced per iteration, 1 <= l < n
  int k = 1;           // iterations per training visit
  double sigma = 16.0; // displacement std dev, px
  int patch_size = 32;
  ResampleMode mode = ResampleMode::deterministic;
};

/// Particle centers uniform over the legal center range; scores unset.
ParticleSet mc_init(int height, int width, const MCConfig& cfg, std::mt19937_64& rng);

/// Min-max rescale to [0,1]. All-equal input maps to all 0.5.
/// Throws std::invalid_argument on empty or non-finite input.
std::vector<double> mc_normalize(const std::vector<double>& scores);

/// Replaces exactly l particles. Victims are the l lowest norm_score
/// (deterministic) or drawn without replacement with probability
/// proportional to 1 - norm_score (stochastic). Each victim moves onto a
/// survivor drawn proportional to norm_score; its scores reset to unset.
void mc_resample(ParticleSet& ps, const MCConfig& cfg, std::mt19937_64& rng);

/// Adds N(0, sigma^2) per axis to every freshly resampled particle, then
/// clamps all centers to the legal center range.
void mc_displace(ParticleSet& ps, const MCConfig& cfg, std::mt19937_64& rng, int height,
                 int width);

/// Marks every particle's score unset, forcing re-evaluation on the next
/// step. Called between training visits because the network has changed.
void mc_invalidate_scores(ParticleSet& ps);

struct McEvaluation {
  PatchCoord coord;
  double raw_score;
};

using PatchScorer = std::function<double(const Patch&)>;

/// One full cycle: evaluate unscored particles via the scorer, normalize,
/// resample, displace. Returns the (coord, raw_score) pairs evaluated this
/// cycle. Call k times per visit to realize the k-iteration loop.
std::vector<McEvaluation> mc_step(ParticleSet& ps, const PatchScorer& scorer, const MCConfig& cfg,
                                  std::mt19937_64& rng, const ImageBag& bag);

}  // namespace mcmil
