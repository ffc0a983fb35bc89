// Command-line front end: dataset generation, training, evaluation,
// probability maps, and the three-strategy comparison.

#include "mcmil/harness.hpp"
#include "mcmil/io.hpp"
#include "mcmil/rng.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mcmil;

namespace {

struct CommonOpts {
  std::string profile = "desk";
  std::string layout = "sparse";
  std::uint64_t seed = 0;
  std::string out = "out";
};

Profile resolve_profile(const CommonOpts& c) {
  Profile p = (c.profile == "paper") ? paper_profile() : desk_profile();
  p.synth.layout = (c.layout == "clustered") ? Layout::clustered : Layout::sparse;
  p.synth.seed = c.seed;
  p.exp.seed = c.seed;
  return p;
}

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--profile", c.profile, "dataset/experiment profile")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--layout", c.layout, "synthetic layout")
      ->check(CLI::IsMember({"sparse", "clustered"}));
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output directory or file");
}

std::pair<std::vector<ImageBag>, std::vector<ImageBag>> obtain_data(const CommonOpts& c,
                                                                    const std::string& data_dir,
                                                                    const Profile& profile) {
  if (!data_dir.empty()) return load_dataset(data_dir);
  const GlyphSet glyphs = procedural_glyphs(c.seed);
  return generate_dataset(profile.synth, glyphs);
}

int cmd_generate(const CommonOpts& c, const std::string& idx_images,
                 const std::string& idx_labels) {
  const Profile profile = resolve_profile(c);
  const GlyphSet glyphs = (!idx_images.empty() && !idx_labels.empty())
                              ? load_idx(idx_images, idx_labels)
                              : procedural_glyphs(c.seed);
  auto [train_bags, test_bags] = generate_dataset(profile.synth, glyphs);
  save_dataset(c.out, train_bags, test_bags);
  std::cout << "wrote " << train_bags.size() << " train + " << test_bags.size() << " test bags to "
            << c.out << "\n";
  return 0;
}

ExperimentConfig apply_overrides(ExperimentConfig exp, const std::string& strategy,
                                 const std::string& aggregator, int topk, int epochs, double lr,
                                 bool traces) {
  if (!strategy.empty()) exp.strategy = strategy_from_name(strategy);
  if (!aggregator.empty()) exp.aggregator = aggregator == "topk" ? Aggregator::topk : Aggregator::max;
  if (topk > 0) exp.topk = topk;
  if (epochs > 0) exp.epochs = epochs;
  if (lr > 0) exp.opt.lr = lr;
  exp.record_traces = traces;
  return exp;
}

int cmd_train(const CommonOpts& c, const std::string& data_dir, const ExperimentConfig& exp) {
  const Profile profile = resolve_profile(c);
  auto [train_bags, test_bags] = obtain_data(c, data_dir, profile);
  const TrainResult result = train(exp, train_bags, test_bags);
  fs::create_directories(c.out);
  write_metrics_csv(fs::path(c.out) / "metrics.csv", result.metrics);
  if (!result.traces.empty()) write_trace_csv(fs::path(c.out) / "traces.csv", result.traces);
  save_checkpoint(result.state, fs::path(c.out) / "model.ckpt");
  const double final_acc = result.metrics.back().test_acc;
  std::cout << "strategy=" << strategy_name(exp.strategy) << " seed=" << c.seed
            << " final_test_acc=" << final_acc << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, double overlap) {
  const ClassifierState state = load_checkpoint(checkpoint);
  auto [train_bags, test_bags] = load_dataset(data_dir);
  const double acc = evaluate(state, test_bags, state.patch_size, overlap);
  std::cout << "test_acc=" << acc << "\n";
  return 0;
}

int cmd_map(const std::string& checkpoint, const std::string& image_path, int stride,
            const std::string& out) {
  const ClassifierState state = load_checkpoint(checkpoint);
  ImageBag bag;
  bag.id = fs::path(image_path).stem().string();
  bag.pixels = read_pgm(image_path);
  if (stride < 1) stride = state.patch_size / 2;
  PatchCoord argmax;
  const Eigen::MatrixXd map = probability_map(state, bag, state.patch_size, stride, &argmax);
  write_pgm(out, map.cast<float>());
  std::cout << "map " << map.rows() << "x" << map.cols() << " -> " << out << " argmax=(row "
            << argmax.row << ", col " << argmax.col << ")\n";
  return 0;
}

int cmd_compare(const CommonOpts& c, int seeds, int epochs) {
  std::vector<SummaryRow> summary;
  for (Strategy strategy : {Strategy::monte_carlo, Strategy::uniform, Strategy::grid}) {
    for (int s = 0; s < seeds; ++s) {
      CommonOpts run = c;
      run.seed = c.seed + std::uint64_t(s);
      Profile profile = resolve_profile(run);
      if (epochs > 0) profile.exp.epochs = epochs;
      profile.exp.strategy = strategy;
      const GlyphSet glyphs = procedural_glyphs(run.seed);
      auto [train_bags, test_bags] = generate_dataset(profile.synth, glyphs);
      const TrainResult result = train(profile.exp, train_bags, test_bags);
      const fs::path run_dir =
          fs::path(c.out) / (strategy_name(strategy) + "_seed" + std::to_string(run.seed));
      fs::create_directories(run_dir);
      write_metrics_csv(run_dir / "metrics.csv", result.metrics);
      summary.push_back({strategy_name(strategy), run.seed, result.metrics.back().test_acc});
      std::cout << strategy_name(strategy) << " seed=" << run.seed
                << " final_test_acc=" << result.metrics.back().test_acc << "\n";
    }
  }
  fs::create_directories(c.out);
  write_summary_csv(fs::path(c.out) / "summary.csv", summary);
  std::cout << "wrote " << (fs::path(c.out) / "summary.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised bag classification with grid, uniform and Monte-Carlo patch sampling"};
  app.require_subcommand(1);
  app.set_config("--config", "", "structured config file; flags override");

  CommonOpts common;

  auto* generate = app.add_subcommand("generate", "write a synthetic dataset as PGM + manifest");
  add_common(generate, common);
  std::string idx_images, idx_labels;
  generate->add_option("--idx-images", idx_images, "IDX image file (optional glyph source)");
  generate->add_option("--idx-labels", idx_labels, "IDX label file");

  auto* train_cmd = app.add_subcommand("train", "train one strategy, write metrics + checkpoint");
  add_common(train_cmd, common);
  std::string data_dir, strategy, aggregator;
  int topk = 0, epochs = 0, seeds = 3, stride = 0;
  double lr = 0, overlap = 0.5;
  bool traces = false;
  train_cmd->add_option("--data", data_dir, "dataset directory (default: generate in memory)");
  train_cmd->add_option("--strategy", strategy, "grid|uniform|monte_carlo");
  train_cmd->add_option("--aggregator", aggregator, "max|topk")
      ->check(CLI::IsMember({"max", "topk"}));
  train_cmd->add_option("--topk", topk, "K for the topk aggregator");
  train_cmd->add_option("--epochs", epochs, "override epoch count");
  train_cmd->add_option("--lr", lr, "override learning rate");
  train_cmd->add_flag("--traces", traces, "record particle traces (monte_carlo only)");

  auto* eval_cmd = app.add_subcommand("eval", "accuracy of a checkpoint on a dataset's test split");
  std::string checkpoint, image_path;
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--data", data_dir)->required();
  eval_cmd->add_option("--overlap", overlap, "evaluation grid overlap");

  auto* map_cmd = app.add_subcommand("map", "sliding-window probability map for one image");
  map_cmd->add_option("--checkpoint", checkpoint)->required();
  map_cmd->add_option("--image", image_path, "input PGM")->required();
  map_cmd->add_option("--stride", stride, "map stride (default: patch_size/2)");
  map_cmd->add_option("--out", common.out, "output PGM path");

  auto* compare = app.add_subcommand("compare", "run all three strategies over shared seeds");
  add_common(compare, common);
  compare->add_option("--seeds", seeds, "number of seeds per strategy");
  compare->add_option("--epochs", epochs, "override epoch count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*generate) return cmd_generate(common, idx_images, idx_labels);
    if (*train_cmd) {
      Profile profile = resolve_profile(common);
      const ExperimentConfig exp =
          apply_overrides(profile.exp, strategy, aggregator, topk, epochs, lr, traces);
      return cmd_train(common, data_dir, exp);
    }
    if (*eval_cmd) return cmd_eval(checkpoint, data_dir, overlap);
    if (*map_cmd) return cmd_map(checkpoint, image_path, stride, common.out);
    if (*compare) return cmd_compare(common, seeds, epochs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
