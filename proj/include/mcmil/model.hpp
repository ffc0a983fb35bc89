#pragma once

#include "mcmil/bag.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>

namespace mcmil {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Patch classifier: sigmoid(w2 . relu(w1 * flatten(patch) + b1) + b2),
/// plus Adam moment accumulators. Patches are flattened row-major.
struct ClassifierState {
  int patch_size = 0;
  int hidden = 0;
  MatrixXd w1;  // hidden x size^2
  VectorXd b1;  // hidden
  VectorXd w2;  // hidden
  double b2 = 0.0;

  MatrixXd m_w1, v_w1;
  VectorXd m_b1, v_b1, m_w2, v_w2;
  double m_b2 = 0.0, v_b2 = 0.0;
  std::uint64_t step = 0;

  AdamHyper hyper;
};

struct PatchGradient {
  MatrixXd w1;
  VectorXd b1;
  VectorXd w2;
  double b2 = 0.0;

  PatchGradient& operator+=(const PatchGradient& other);
};

PatchGradient zero_gradient(const ClassifierState& state);

/// Weights ~ N(0, 1/fan_in), biases zero, moments zero. Deterministic per seed.
ClassifierState init_classifier(int patch_size, int hidden, std::uint64_t seed,
                                AdamHyper hyper = {});

/// Flattens a patch row-major into a column vector.
VectorXd flatten_patch(const Patch& patch);

double forward(const ClassifierState& state, const Patch& patch);

/// Batched forward: columns of `inputs` are flattened patches. Returns one
/// score per column.
VectorXd forward_batch(const ClassifierState& state, const MatrixXd& inputs);

/// Exact gradients of upstream * d(forward)/d(params).
PatchGradient backward(const ClassifierState& state, const Patch& patch, double upstream);

/// One standard bias-corrected Adam step; increments the step counter.
/// Throws std::invalid_argument on shape mismatch or non-finite gradients.
void adam_update(ClassifierState& state, const PatchGradient& grad);

/// Flat binary checkpoint: magic, patch_size, hidden, little-endian 64-bit
/// floats in declared parameter order, then adam moments and step counter.
/// Round-trips bitwise.
void save_checkpoint(const ClassifierState& state, const std::filesystem::path& path);
ClassifierState load_checkpoint(const std::filesystem::path& path, AdamHyper hyper = {});

}  // namespace mcmil
