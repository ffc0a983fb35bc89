#include "mcmil/harness.hpp"

#include "mcmil/io.hpp"
#include "mcmil/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace mcmil {

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::grid: return "grid";
    case Strategy::uniform: return "uniform";
    case Strategy::monte_carlo: return "monte_carlo";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "grid") return Strategy::grid;
  if (name == "uniform") return Strategy::uniform;
  if (name == "monte_carlo" || name == "mc") return Strategy::monte_carlo;
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

namespace {

// Flattened patches as columns, ready for forward_batch.
MatrixXd patch_matrix(const ImageBag& bag, const std::vector<PatchCoord>& coords) {
  if (coords.empty()) return MatrixXd(0, 0);
  const int size = coords[0].size;
  MatrixXd inputs(size * size, Eigen::Index(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const Patch patch = extract_patch(bag, coords[i]);
    inputs.col(Eigen::Index(i)) = flatten_patch(patch);
  }
  return inputs;
}

BagPrediction aggregate(const ExperimentConfig& cfg, const std::vector<double>& scores) {
  return cfg.aggregator == Aggregator::max ? aggregate_max(scores)
                                           : aggregate_topk(scores, cfg.topk);
}

double mask_hit_rate(const ParticleSet& ps, const ImageBag& bag) {
  const Mask& mask = *bag.truth_mask;
  int hits = 0;
  for (const Particle& p : ps.particles) {
    const int r = std::clamp(int(std::lround(p.row)), 0, bag.height() - 1);
    const int c = std::clamp(int(std::lround(p.col)), 0, bag.width() - 1);
    if (mask(r, c) != 0) ++hits;
  }
  return double(hits) / double(ps.particles.size());
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg, const std::vector<ImageBag>& train_bags,
                  const std::vector<ImageBag>& test_bags) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.patch_budget < 1) throw std::invalid_argument("train: patch_budget must be >= 1");
  if (train_bags.empty()) throw std::invalid_argument("train: empty training set");

  TrainResult result;
  result.state = init_classifier(cfg.patch_size, cfg.hidden, mix_seed(cfg.seed), cfg.opt);
  ClassifierState& state = result.state;

  std::mt19937_64 shuffle_rng = make_stream(cfg.seed, 1);
  std::vector<std::mt19937_64> bag_rngs;
  bag_rngs.reserve(train_bags.size());
  for (std::size_t i = 0; i < train_bags.size(); ++i)
    bag_rngs.push_back(make_stream(cfg.seed, 0x5000000000ULL + i));

  // Grid positions are computed once and reused every epoch.
  std::vector<std::vector<PatchCoord>> grid_cache(train_bags.size());
  if (cfg.strategy == Strategy::grid) {
    for (std::size_t i = 0; i < train_bags.size(); ++i)
      grid_cache[i] = grid_positions(train_bags[i].height(), train_bags[i].width(), cfg.grid);
  }
  std::vector<ParticleSet> particles;
  if (cfg.strategy == Strategy::monte_carlo) {
    particles.resize(train_bags.size());
    for (std::size_t i = 0; i < train_bags.size(); ++i) {
      particles[i] = mc_init(train_bags[i].height(), train_bags[i].width(), cfg.mc, bag_rngs[i]);
      particles[i].bag_id = train_bags[i].id;
    }
  }

  std::vector<std::size_t> order(train_bags.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    if (cfg.strategy == Strategy::monte_carlo && cfg.reinit_particles_each_epoch && epoch > 1) {
      for (std::size_t i = 0; i < train_bags.size(); ++i) {
        particles[i] = mc_init(train_bags[i].height(), train_bags[i].width(), cfg.mc, bag_rngs[i]);
        particles[i].bag_id = train_bags[i].id;
      }
    }

    double loss_sum = 0.0;
    int correct = 0;
    double hit_sum = 0.0;
    int hit_bags = 0;

    for (std::size_t idx : order) {
      const ImageBag& bag = train_bags[idx];
      std::vector<PatchCoord> coords;
      std::vector<double> scores;

      switch (cfg.strategy) {
        case Strategy::grid: {
          coords = grid_cache[idx];
          const VectorXd s = forward_batch(state, patch_matrix(bag, coords));
          scores.assign(s.data(), s.data() + s.size());
          break;
        }
        case Strategy::uniform: {
          coords = uniform_positions(bag.height(), bag.width(), cfg.patch_size, cfg.patch_budget,
                                     bag_rngs[idx]);
          const VectorXd s = forward_batch(state, patch_matrix(bag, coords));
          scores.assign(s.data(), s.data() + s.size());
          break;
        }
        case Strategy::monte_carlo: {
          ParticleSet& ps = particles[idx];
          mc_invalidate_scores(ps);  // weights changed since the last visit
          const PatchScorer scorer = [&](const Patch& p) { return forward(state, p); };
          for (int step = 0; step < cfg.mc.k; ++step) {
            const auto evals = mc_step(ps, scorer, cfg.mc, bag_rngs[idx], bag);
            for (const McEvaluation& e : evals) {
              coords.push_back(e.coord);
              scores.push_back(e.raw_score);
            }
          }
          if (bag.label == 1 && bag.truth_mask && bag.truth_mask->any()) {
            hit_sum += mask_hit_rate(ps, bag);
            ++hit_bags;
          }
          if (cfg.record_traces) {
            for (std::size_t pi = 0; pi < ps.particles.size(); ++pi) {
              const Particle& p = ps.particles[pi];
              result.traces.push_back(
                  {bag.id, epoch, int(pi), p.row, p.col, p.raw_score, p.norm_score});
            }
          }
          break;
        }
      }

      const BagPrediction pred = aggregate(cfg, scores);
      const BagLoss bag_loss = bag_loss_and_grads(pred, bag.label);
      if (!std::isfinite(bag_loss.loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", bag " + bag.id + ", score " + std::to_string(pred.score));
      }

      PatchGradient grad = zero_gradient(state);
      for (const auto& [pi, weight] : pred.contributors) {
        (void)weight;
        const double g = bag_loss.patch_grads[std::size_t(pi)];
        if (g == 0.0) continue;
        grad += backward(state, extract_patch(bag, coords[std::size_t(pi)]), g);
      }
      adam_update(state, grad);

      loss_sum += bag_loss.loss;
      if ((pred.score > 0.5) == (bag.label == 1)) ++correct;
    }

    const double test_acc =
        test_bags.empty() ? 0.0 : evaluate(state, test_bags, cfg.patch_size, cfg.eval_overlap);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back({epoch, double(correct) / double(train_bags.size()), test_acc,
                              loss_sum / double(train_bags.size()), seconds});
    if (cfg.strategy == Strategy::monte_carlo)
      result.particle_hit_rate.push_back(hit_bags > 0 ? hit_sum / hit_bags : 0.0);
  }
  return result;
}

double evaluate_with_scorer(const PatchScorer& scorer, const std::vector<ImageBag>& bags,
                            int patch_size, double overlap) {
  if (bags.empty()) throw std::invalid_argument("evaluate: empty bag list");
  const GridConfig grid{patch_size, overlap};
  int correct = 0;
  for (const ImageBag& bag : bags) {
    const auto coords = grid_positions(bag.height(), bag.width(), grid);
    std::vector<double> scores;
    scores.reserve(coords.size());
    for (const PatchCoord& coord : coords) scores.push_back(scorer(extract_patch(bag, coord)));
    const BagPrediction pred = aggregate_max(scores);
    if ((pred.score > 0.5) == (bag.label == 1)) ++correct;
  }
  return double(correct) / double(bags.size());
}

double evaluate(const ClassifierState& state, const std::vector<ImageBag>& bags, int patch_size,
                double overlap) {
  if (bags.empty()) throw std::invalid_argument("evaluate: empty bag list");
  const GridConfig grid{patch_size, overlap};
  int correct = 0;
  for (const ImageBag& bag : bags) {
    const auto coords = grid_positions(bag.height(), bag.width(), grid);
    const VectorXd scores = forward_batch(state, patch_matrix(bag, coords));
    const double bag_score = scores.maxCoeff();
    if ((bag_score > 0.5) == (bag.label == 1)) ++correct;
  }
  return double(correct) / double(bags.size());
}

Eigen::MatrixXd probability_map(const ClassifierState& state, const ImageBag& bag, int patch_size,
                                int stride, PatchCoord* argmax) {
  if (stride < 1) throw std::invalid_argument("probability_map: stride must be >= 1");
  const int rows = (bag.height() - patch_size) / stride + 1;
  const int cols = (bag.width() - patch_size) / stride + 1;
  Eigen::MatrixXd map(rows, cols);
  double best = -1.0;
  PatchCoord best_coord{0, 0, patch_size};
  for (int r = 0; r < rows; ++r) {
    std::vector<PatchCoord> row_coords;
    row_coords.reserve(std::size_t(cols));
    for (int c = 0; c < cols; ++c) row_coords.push_back({r * stride, c * stride, patch_size});
    const VectorXd scores = forward_batch(state, patch_matrix(bag, row_coords));
    for (int c = 0; c < cols; ++c) {
      map(r, c) = scores[c];
      if (scores[c] > best) {
        best = scores[c];
        best_coord = row_coords[std::size_t(c)];
      }
    }
  }
  if (argmax) *argmax = best_coord;
  return map;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary: force \n line endings
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows) {
  auto out = open_out(path);
  out << "epoch,train_acc,test_acc,loss,seconds\n";
  for (const EpochMetrics& m : rows) {
    out << m.epoch << ',' << fmt_double(m.train_acc) << ',' << fmt_double(m.test_acc) << ','
        << fmt_double(m.loss) << ',' << fmt_double(m.seconds) << '\n';
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  auto out = open_out(path);
  out << "strategy,seed,test_acc\n";
  for (const SummaryRow& r : rows)
    out << r.strategy << ',' << r.seed << ',' << fmt_double(r.test_acc) << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows) {
  auto out = open_out(path);
  out << "bag_id,step,particle_idx,row,col,raw_score,norm_score\n";
  for (const TraceRow& r : rows) {
    out << r.bag_id << ',' << r.step << ',' << r.particle_idx << ',' << fmt_double(r.row) << ','
        << fmt_double(r.col) << ',' << fmt_double(r.raw_score) << ',' << fmt_double(r.norm_score)
        << '\n';
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

void export_artifacts(const std::vector<EpochMetrics>& metrics, const std::vector<MapArtifact>& maps,
                      const std::vector<TraceRow>& traces, const std::vector<SummaryRow>& summary,
                      const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  write_metrics_csv(outdir / "metrics.csv", metrics);
  for (const MapArtifact& m : maps) write_pgm(outdir / (m.name + ".pgm"), m.map.cast<float>());
  if (!traces.empty()) write_trace_csv(outdir / "traces.csv", traces);
  if (!summary.empty()) write_summary_csv(outdir / "summary.csv", summary);
}

Profile desk_profile() {
  Profile p;
  p.synth = SynthConfig{};  // 256px bags, 12 glyphs, 200/80 split
  // 3-9 targets per positive bag keep the weak label learnable at a
  // 64-patch budget; radius 64 keeps clustered placement feasible.
  p.synth.positive_target_count_min = 3;
  p.synth.cluster_radius = 64.0;
  p.exp.strategy = Strategy::monte_carlo;
  p.exp.patch_size = 32;
  p.exp.patch_budget = 64;
  // top-6 pooling spreads bag gradients over several patches; with max
  // pooling each positive bag trains on a single, often spurious, patch.
  p.exp.aggregator = Aggregator::topk;
  p.exp.topk = 6;
  p.exp.epochs = 25;
  p.exp.mc = MCConfig{64, 16, 1, 16.0, 32, ResampleMode::deterministic};
  p.exp.grid = GridConfig{32, 0.0};
  p.exp.hidden = 64;
  return p;
}

Profile paper_profile() {
  Profile p;
  p.synth.bag_size = 1024;
  p.synth.glyph_count_per_bag = 40;
  p.synth.cluster_radius = 40.0;
  p.synth.n_train = 1000;
  p.synth.n_test = 400;
  p.exp.strategy = Strategy::monte_carlo;
  p.exp.patch_size = 40;
  p.exp.patch_budget = 625;
  p.exp.aggregator = Aggregator::max;
  p.exp.epochs = 40;
  p.exp.mc = MCConfig{625, 156, 1, 20.0, 40, ResampleMode::deterministic};
  p.exp.grid = GridConfig{40, 0.0};
  p.exp.hidden = 64;
  return p;
}

}  // namespace mcmil
