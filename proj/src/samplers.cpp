#include "mcmil/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mcmil {

std::vector<PatchCoord> grid_positions(int height, int width, const GridConfig& cfg) {
  const int size = cfg.patch_size;
  if (height < size || width < size)
    throw std::invalid_argument("grid_positions: image smaller than patch");
  const int stride = cfg.stride();
  std::vector<PatchCoord> coords;
  for (int r = 0; r + size <= height; r += stride)
    for (int c = 0; c + size <= width; c += stride) coords.push_back({r, c, size});
  return coords;
}

std::vector<PatchCoord> uniform_positions(int height, int width, int patch_size, int count,
                                          std::mt19937_64& rng) {
  if (height < patch_size || width < patch_size)
    throw std::invalid_argument("uniform_positions: image smaller than patch");
  std::uniform_int_distribution<int> row(0, height - patch_size);
  std::uniform_int_distribution<int> col(0, width - patch_size);
  std::vector<PatchCoord> coords;
  coords.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) {
    const int r = row(rng);
    coords.push_back({r, col(rng), patch_size});
  }
  return coords;
}

namespace {

void validate(const MCConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("MCConfig: n must be >= 1");
  if (cfg.l < 1 || cfg.l >= cfg.n) throw std::invalid_argument("MCConfig: need 1 <= l < n");
  if (cfg.k < 1) throw std::invalid_argument("MCConfig: k must be >= 1");
  if (!(cfg.sigma > 0.0)) throw std::invalid_argument("MCConfig: sigma must be > 0");
}

double clamp_center_axis(double center, int size, int extent) {
  return std::clamp(center, size / 2.0, extent - size / 2.0);
}

// Weighted draw over indices; falls back to uniform when all weights vanish.
std::size_t weighted_pick(const std::vector<double>& weights, std::mt19937_64& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total <= 0.0) {
    std::uniform_int_distribution<std::size_t> u(0, weights.size() - 1);
    return u(rng);
  }
  std::uniform_real_distribution<double> u(0.0, total);
  double ticket = u(rng);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    ticket -= weights[i];
    if (ticket <= 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace

ParticleSet mc_init(int height, int width, const MCConfig& cfg, std::mt19937_64& rng) {
  validate(cfg);
  if (height < cfg.patch_size || width < cfg.patch_size)
    throw std::invalid_argument("mc_init: image smaller than patch");
  std::uniform_real_distribution<double> row(cfg.patch_size / 2.0, height - cfg.patch_size / 2.0);
  std::uniform_real_distribution<double> col(cfg.patch_size / 2.0, width - cfg.patch_size / 2.0);
  ParticleSet ps;
  ps.particles.reserve(std::size_t(cfg.n));
  for (int i = 0; i < cfg.n; ++i) {
    const double r = row(rng);
    ps.particles.push_back(Particle{r, col(rng)});
  }
  return ps;
}

std::vector<double> mc_normalize(const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("mc_normalize: empty score list");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("mc_normalize: non-finite score");
  }
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(scores.size());
  if (hi == lo) {
    std::fill(out.begin(), out.end(), 0.5);
  } else {
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / (hi - lo);
  }
  return out;
}

void mc_resample(ParticleSet& ps, const MCConfig& cfg, std::mt19937_64& rng) {
  validate(cfg);
  const std::size_t n = ps.particles.size();
  for (const Particle& p : ps.particles) {
    if (!p.scored) throw std::invalid_argument("mc_resample: particle without norm_score");
  }

  std::vector<std::size_t> victims;
  if (cfg.mode == ResampleMode::deterministic) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ps.particles[a].norm_score < ps.particles[b].norm_score;
    });
    victims.assign(order.begin(), order.begin() + cfg.l);
  } else {
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = 1.0 - ps.particles[i].norm_score;
    for (int drawn = 0; drawn < cfg.l; ++drawn) {
      const std::size_t v = weighted_pick(weights, rng);
      victims.push_back(v);
      weights[v] = 0.0;  // without replacement
    }
  }

  std::vector<bool> is_victim(n, false);
  for (std::size_t v : victims) is_victim[v] = true;
  std::vector<std::size_t> survivors;
  std::vector<double> donor_weights;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_victim[i]) {
      survivors.push_back(i);
      donor_weights.push_back(ps.particles[i].norm_score);
    }
  }

  for (std::size_t v : victims) {
    const std::size_t donor = survivors[weighted_pick(donor_weights, rng)];
    Particle& p = ps.particles[v];
    p.row = ps.particles[donor].row;
    p.col = ps.particles[donor].col;
    p.raw_score = 0.0;
    p.norm_score = 0.0;
    p.scored = false;
    p.fresh = true;
  }
}

void mc_displace(ParticleSet& ps, const MCConfig& cfg, std::mt19937_64& rng, int height,
                 int width) {
  std::normal_distribution<double> gauss(0.0, cfg.sigma);
  for (Particle& p : ps.particles) {
    if (p.fresh) {
      p.row += gauss(rng);
      p.col += gauss(rng);
      p.fresh = false;
    }
    p.row = clamp_center_axis(p.row, cfg.patch_size, height);
    p.col = clamp_center_axis(p.col, cfg.patch_size, width);
  }
}

void mc_invalidate_scores(ParticleSet& ps) {
  for (Particle& p : ps.particles) {
    p.scored = false;
    p.fresh = false;
  }
}

std::vector<McEvaluation> mc_step(ParticleSet& ps, const PatchScorer& scorer, const MCConfig& cfg,
                                  std::mt19937_64& rng, const ImageBag& bag) {
  validate(cfg);
  const int h = bag.height();
  const int w = bag.width();

  std::vector<McEvaluation> evaluated;
  for (Particle& p : ps.particles) {
    if (p.scored) continue;
    const PatchCoord coord = clamp_center(p.row, p.col, cfg.patch_size, h, w);
    const double score = scorer(extract_patch(bag, coord));
    p.raw_score = score;
    p.scored = true;
    evaluated.push_back({coord, score});
  }

  std::vector<double> raw(ps.particles.size());
  for (std::size_t i = 0; i < ps.particles.size(); ++i) raw[i] = ps.particles[i].raw_score;
  const std::vector<double> norm = mc_normalize(raw);
  for (std::size_t i = 0; i < ps.particles.size(); ++i) ps.particles[i].norm_score = norm[i];

  mc_resample(ps, cfg, rng);
  mc_displace(ps, cfg, rng, h, w);
  ps.iteration += 1;
  return evaluated;
}

}  // namespace mcmil
