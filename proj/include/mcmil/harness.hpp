#pragma once

#include "mcmil/bag.hpp"
#include "mcmil/mil.hpp"
#include "mcmil/model.hpp"
#include "mcmil/samplers.hpp"
#include "mcmil/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mcmil {

enum class Strategy { grid, uniform, monte_carlo };
enum class Aggregator { max, topk };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct ExperimentConfig {
  Strategy strategy = Strategy::monte_carlo;
  int patch_size = 32;
  int patch_budget = 64;  // patches per bag per visit (uniform count, MC n)
  Aggregator aggregator = Aggregator::max;
  int topk = 10;
  int epochs = 25;
  MCConfig mc;
  GridConfig grid;
  AdamHyper opt;
  int hidden = 64;
  double eval_overlap = 0.5;
  std::uint64_t seed = 0;
  bool reinit_particles_each_epoch = false;
  bool record_traces = false;
};

struct EpochMetrics {
  int epoch = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double loss = 0.0;
  double seconds = 0.0;
};

struct TraceRow {
  std::string bag_id;
  int step = 0;
  int particle_idx = 0;
  double row = 0.0, col = 0.0, raw_score = 0.0, norm_score = 0.0;
};

struct TrainResult {
  ClassifierState state;
  std::vector<EpochMetrics> metrics;
  // Monte-Carlo only: per epoch, mean fraction of particles whose center
  // lies inside the truth mask, over positive masked training bags.
  std::vector<double> particle_hit_rate;
  std::vector<TraceRow> traces;
};

/// Full training loop: seeded bag shuffle per epoch, per-bag positions from
/// the configured strategy, bag-level loss through the aggregator, one Adam
/// step per bag. Deterministic per (config, seed); evaluation is sequential.
TrainResult train(const ExperimentConfig& cfg, const std::vector<ImageBag>& train_bags,
                  const std::vector<ImageBag>& test_bags);

/// Test protocol: grid positions at the given overlap, forward all patches,
/// max aggregation, threshold 0.5. Returns fraction of bags classified
/// correctly. Used identically for every training strategy.
double evaluate(const ClassifierState& state, const std::vector<ImageBag>& bags, int patch_size,
                double overlap = 0.5);

/// Same protocol with an arbitrary patch scorer (oracle tests, baselines).
double evaluate_with_scorer(const PatchScorer& scorer, const std::vector<ImageBag>& bags,
                            int patch_size, double overlap = 0.5);

/// Dense sliding-window score grid; optionally reports the maximally
/// activated patch coordinate.
Eigen::MatrixXd probability_map(const ClassifierState& state, const ImageBag& bag, int patch_size,
                                int stride, PatchCoord* argmax = nullptr);

struct SummaryRow {
  std::string strategy;
  std::uint64_t seed = 0;
  double test_acc = 0.0;
};

struct MapArtifact {
  std::string name;  // file stem, written as <name>.pgm
  Eigen::MatrixXd map;
};

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows);

/// Writes metrics.csv, per-map PGMs (score*255 rounded), traces.csv when
/// nonempty, and summary.csv when nonempty, into outdir.
void export_artifacts(const std::vector<EpochMetrics>& metrics, const std::vector<MapArtifact>& maps,
                      const std::vector<TraceRow>& traces, const std::vector<SummaryRow>& summary,
                      const std::filesystem::path& outdir);

/// A dataset profile plus matching experiment settings.
struct Profile {
  SynthConfig synth;
  ExperimentConfig exp;
};

/// Desk-scale profile: 256x256 bags, patch 32, budget 64, 200/80 bags,
/// 25 epochs, MC n=64 l=16 k=1 sigma=16 deterministic.
Profile desk_profile();

/// Paper-scale profile: 1024x1024 bags, patch 40, budget 625, 1000/400 bags.
Profile paper_profile();

}  // namespace mcmil
