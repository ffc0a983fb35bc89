#include "mcmil/model.hpp"

#include "mcmil/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

namespace mcmil {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_patch(const ClassifierState& state, const Patch& patch) {
  if (patch.pixels.rows() != state.patch_size || patch.pixels.cols() != state.patch_size) {
    throw std::invalid_argument("classifier expects " + std::to_string(state.patch_size) +
                                "x" + std::to_string(state.patch_size) + " patches, got " +
                                std::to_string(patch.pixels.rows()) + "x" +
                                std::to_string(patch.pixels.cols()));
  }
}

}  // namespace

PatchGradient& PatchGradient::operator+=(const PatchGradient& other) {
  w1 += other.w1;
  b1 += other.b1;
  w2 += other.w2;
  b2 += other.b2;
  return *this;
}

PatchGradient zero_gradient(const ClassifierState& state) {
  PatchGradient g;
  g.w1 = MatrixXd::Zero(state.hidden, state.patch_size * state.patch_size);
  g.b1 = VectorXd::Zero(state.hidden);
  g.w2 = VectorXd::Zero(state.hidden);
  g.b2 = 0.0;
  return g;
}

ClassifierState init_classifier(int patch_size, int hidden, std::uint64_t seed, AdamHyper hyper) {
  if (hidden < 1) throw std::invalid_argument("init_classifier: hidden must be >= 1");
  if (patch_size < 1) throw std::invalid_argument("init_classifier: patch_size must be >= 1");
  const int in = patch_size * patch_size;

  std::mt19937_64 rng = make_stream(seed, 0x6d6f64656cULL);
  std::normal_distribution<double> w1_dist(0.0, 1.0 / std::sqrt(double(in)));
  std::normal_distribution<double> w2_dist(0.0, 1.0 / std::sqrt(double(hidden)));

  ClassifierState s;
  s.patch_size = patch_size;
  s.hidden = hidden;
  s.hyper = hyper;
  s.w1.resize(hidden, in);
  for (int r = 0; r < hidden; ++r)
    for (int c = 0; c < in; ++c) s.w1(r, c) = w1_dist(rng);
  s.b1 = VectorXd::Zero(hidden);
  s.w2.resize(hidden);
  for (int r = 0; r < hidden; ++r) s.w2[r] = w2_dist(rng);
  s.b2 = 0.0;
  s.m_w1 = MatrixXd::Zero(hidden, in);
  s.v_w1 = MatrixXd::Zero(hidden, in);
  s.m_b1 = VectorXd::Zero(hidden);
  s.v_b1 = VectorXd::Zero(hidden);
  s.m_w2 = VectorXd::Zero(hidden);
  s.v_w2 = VectorXd::Zero(hidden);
  return s;
}

VectorXd flatten_patch(const Patch& patch) {
  const int size = int(patch.pixels.rows());
  VectorXd x(size * size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) x[r * size + c] = double(patch.pixels(r, c));
  return x;
}

double forward(const ClassifierState& state, const Patch& patch) {
  check_patch(state, patch);
  const VectorXd x = flatten_patch(patch);
  const VectorXd h = (state.w1 * x + state.b1).cwiseMax(0.0);
  return sigmoid(state.w2.dot(h) + state.b2);
}

VectorXd forward_batch(const ClassifierState& state, const MatrixXd& inputs) {
  if (inputs.rows() != state.patch_size * state.patch_size) {
    throw std::invalid_argument("forward_batch: input rows " + std::to_string(inputs.rows()) +
                                " != flattened patch size " +
                                std::to_string(state.patch_size * state.patch_size));
  }
  const MatrixXd h = ((state.w1 * inputs).colwise() + state.b1).cwiseMax(0.0);
  VectorXd z = (state.w2.transpose() * h).transpose();
  z.array() += state.b2;
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

PatchGradient backward(const ClassifierState& state, const Patch& patch, double upstream) {
  check_patch(state, patch);
  const VectorXd x = flatten_patch(patch);
  const VectorXd pre = state.w1 * x + state.b1;
  const VectorXd h = pre.cwiseMax(0.0);
  const double y = sigmoid(state.w2.dot(h) + state.b2);

  const double dz = upstream * y * (1.0 - y);
  PatchGradient g;
  g.w2 = dz * h;
  g.b2 = dz;
  const VectorXd da =
      (dz * state.w2.array() * (pre.array() > 0.0).cast<double>()).matrix();
  g.w1 = da * x.transpose();
  g.b1 = da;
  return g;
}

void adam_update(ClassifierState& state, const PatchGradient& grad) {
  if (grad.w1.rows() != state.w1.rows() || grad.w1.cols() != state.w1.cols() ||
      grad.b1.size() != state.b1.size() || grad.w2.size() != state.w2.size()) {
    throw std::invalid_argument("adam_update: gradient shape mismatch");
  }
  if (!grad.w1.allFinite() || !grad.b1.allFinite() || !grad.w2.allFinite() ||
      !std::isfinite(grad.b2)) {
    throw std::invalid_argument("adam_update: non-finite gradient");
  }
  const AdamHyper& hp = state.hyper;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, double(state.step));

  auto update = [&](auto& theta, auto& m, auto& v, const auto& g) {
    m = hp.beta1 * m + (1.0 - hp.beta1) * g;
    v = (hp.beta2 * v.array() + (1.0 - hp.beta2) * g.array().square()).matrix();
    theta -= (hp.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + hp.eps)).matrix();
  };
  update(state.w1, state.m_w1, state.v_w1, grad.w1);
  update(state.b1, state.m_b1, state.v_b1, grad.b1);
  update(state.w2, state.m_w2, state.v_w2, grad.w2);

  state.m_b2 = hp.beta1 * state.m_b2 + (1.0 - hp.beta1) * grad.b2;
  state.v_b2 = hp.beta2 * state.v_b2 + (1.0 - hp.beta2) * grad.b2 * grad.b2;
  state.b2 -= hp.lr * (state.m_b2 / bc1) / (std::sqrt(state.v_b2 / bc2) + hp.eps);
}

namespace {

constexpr char kMagic[8] = {'M', 'C', 'M', 'I', 'L', 'C', 'K', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

void put_doubles(std::ostream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), std::streamsize(count * sizeof(double)));
}

std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
  char buf[4];
  if (!in.read(buf, 4)) throw std::runtime_error(path.string() + ": truncated checkpoint");
  std::uint32_t v;
  std::memcpy(&v, buf, 4);
  return v;
}

std::uint64_t get_u64(std::istream& in, const std::filesystem::path& path) {
  char buf[8];
  if (!in.read(buf, 8)) throw std::runtime_error(path.string() + ": truncated checkpoint");
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

void get_doubles(std::istream& in, double* data, std::size_t count,
                 const std::filesystem::path& path) {
  if (!in.read(reinterpret_cast<char*>(data), std::streamsize(count * sizeof(double))))
    throw std::runtime_error(path.string() + ": truncated checkpoint");
}

}  // namespace

void save_checkpoint(const ClassifierState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, std::uint32_t(state.patch_size));
  put_u32(out, std::uint32_t(state.hidden));
  put_doubles(out, state.w1.data(), std::size_t(state.w1.size()));
  put_doubles(out, state.b1.data(), std::size_t(state.b1.size()));
  put_doubles(out, state.w2.data(), std::size_t(state.w2.size()));
  put_doubles(out, &state.b2, 1);
  put_doubles(out, state.m_w1.data(), std::size_t(state.m_w1.size()));
  put_doubles(out, state.v_w1.data(), std::size_t(state.v_w1.size()));
  put_doubles(out, state.m_b1.data(), std::size_t(state.m_b1.size()));
  put_doubles(out, state.v_b1.data(), std::size_t(state.v_b1.size()));
  put_doubles(out, state.m_w2.data(), std::size_t(state.m_w2.size()));
  put_doubles(out, state.v_w2.data(), std::size_t(state.v_w2.size()));
  put_doubles(out, &state.m_b2, 1);
  put_doubles(out, &state.v_b2, 1);
  put_u64(out, state.step);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

ClassifierState load_checkpoint(const std::filesystem::path& path, AdamHyper hyper) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path.string() + ": bad checkpoint magic");
  const int patch_size = int(get_u32(in, path));
  const int hidden = int(get_u32(in, path));
  ClassifierState s = init_classifier(patch_size, hidden, 0, hyper);
  get_doubles(in, s.w1.data(), std::size_t(s.w1.size()), path);
  get_doubles(in, s.b1.data(), std::size_t(s.b1.size()), path);
  get_doubles(in, s.w2.data(), std::size_t(s.w2.size()), path);
  get_doubles(in, &s.b2, 1, path);
  get_doubles(in, s.m_w1.data(), std::size_t(s.m_w1.size()), path);
  get_doubles(in, s.v_w1.data(), std::size_t(s.v_w1.size()), path);
  get_doubles(in, s.m_b1.data(), std::size_t(s.m_b1.size()), path);
  get_doubles(in, s.v_b1.data(), std::size_t(s.v_b1.size()), path);
  get_doubles(in, s.m_w2.data(), std::size_t(s.m_w2.size()), path);
  get_doubles(in, s.v_w2.data(), std::size_t(s.v_w2.size()), path);
  get_doubles(in, &s.m_b2, 1, path);
  get_doubles(in, &s.v_b2, 1, path);
  s.step = get_u64(in, path);
  return s;
}

}  // namespace mcmil
