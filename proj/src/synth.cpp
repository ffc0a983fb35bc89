#include "mcmil/synth.hpp"

#include "mcmil/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

namespace mcmil {

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > buf.size()) {
    throw std::runtime_error(path.string() + ": truncated at byte offset " +
                             std::to_string(offset));
  }
  return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
         (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

GlyphSet load_idx(const std::filesystem::path& images_path,
                  const std::filesystem::path& labels_path) {
  const auto img = slurp(images_path);
  const auto lab = slurp(labels_path);

  const std::uint32_t img_magic = read_be32(img, 0, images_path);
  if (img_magic != 0x00000803u) {
    throw std::runtime_error(images_path.string() + ": bad magic at byte offset 0 (got 0x" +
                             std::to_string(img_magic) + ", want 0x803)");
  }
  const std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != 0x00000801u) {
    throw std::runtime_error(labels_path.string() + ": bad magic at byte offset 0 (got 0x" +
                             std::to_string(lab_magic) + ", want 0x801)");
  }
  const std::uint32_t n_img = read_be32(img, 4, images_path);
  const std::uint32_t rows = read_be32(img, 8, images_path);
  const std::uint32_t cols = read_be32(img, 12, images_path);
  const std::uint32_t n_lab = read_be32(lab, 4, labels_path);
  if (n_img != n_lab) {
    throw std::runtime_error("image count " + std::to_string(n_img) + " (byte offset 4 of " +
                             images_path.string() + ") != label count " + std::to_string(n_lab) +
                             " (byte offset 4 of " + labels_path.string() + ")");
  }
  const std::size_t pix_bytes = std::size_t(n_img) * rows * cols;
  if (img.size() < 16 + pix_bytes) {
    throw std::runtime_error(images_path.string() + ": truncated pixel data at byte offset " +
                             std::to_string(img.size()) + ", expected " +
                             std::to_string(16 + pix_bytes) + " bytes");
  }
  if (lab.size() < 8 + n_lab) {
    throw std::runtime_error(labels_path.string() + ": truncated label data at byte offset " +
                             std::to_string(lab.size()) + ", expected " +
                             std::to_string(8 + std::size_t(n_lab)) + " bytes");
  }

  GlyphSet set;
  set.source = GlyphSource::idx;
  set.glyphs.reserve(n_img);
  set.classes.reserve(n_img);
  std::size_t k = 16;
  for (std::uint32_t i = 0; i < n_img; ++i) {
    Image glyph(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) glyph(r, c) = float(img[k++]) / 255.0f;
    set.glyphs.push_back(std::move(glyph));
    set.classes.push_back(int(lab[8 + i]));
  }
  return set;
}

namespace {

constexpr int kGlyphSize = 28;

// Renders one 28x28 tile from a per-pixel predicate. (y, x) are pixel
// centers relative to the jittered glyph center.
template <typename Pred>
Image render(double cy, double cx, float amplitude, Pred&& inside) {
  Image tile = Image::Zero(kGlyphSize, kGlyphSize);
  for (int r = 0; r < kGlyphSize; ++r) {
    for (int c = 0; c < kGlyphSize; ++c) {
      if (inside(r - cy, c - cx)) tile(r, c) = amplitude;
    }
  }
  return tile;
}

Image render_class(int cls, double cy, double cx, float amp, double jitter) {
  const double j = jitter;
  switch (cls) {
    case 0:  // thick ring
      return render(cy, cx, amp, [&](double dy, double dx) {
        const double d = std::hypot(dy, dx);
        return d >= 6.5 + j && d <= 9.5 + j;
      });
    case 1:  // vertical bar
      return render(cy, cx, amp, [&](double dy, double dx) {
        return std::abs(dx) <= 2.5 + j && std::abs(dy) <= 10.0;
      });
    case 2:  // horizontal bar
      return render(cy, cx, amp, [&](double dy, double dx) {
        return std::abs(dy) <= 2.5 + j && std::abs(dx) <= 10.0;
      });
    case 3:  // main diagonal band
      return render(cy, cx, amp, [&](double dy, double dx) {
        return std::abs(dy - dx) <= 3.0 + j && std::abs(dy) <= 10.5 && std::abs(dx) <= 10.5;
      });
    case 4:  // anti-diagonal band
      return render(cy, cx, amp, [&](double dy, double dx) {
        return std::abs(dy + dx) <= 3.0 + j && std::abs(dy) <= 10.5 && std::abs(dx) <= 10.5;
      });
    case 5:  // plus sign
      return render(cy, cx, amp, [&](double dy, double dx) {
        return (std::abs(dx) <= 2.0 + j || std::abs(dy) <= 2.0 + j) &&
               std::max(std::abs(dx), std::abs(dy)) <= 10.0;
      });
    case 6:  // square outline
      return render(cy, cx, amp, [&](double dy, double dx) {
        const double d = std::max(std::abs(dy), std::abs(dx));
        return d >= 6.5 + j && d <= 9.5 + j;
      });
    case 7:  // X
      return render(cy, cx, amp, [&](double dy, double dx) {
        return (std::abs(dy - dx) <= 2.5 + j || std::abs(dy + dx) <= 2.5 + j) &&
               std::abs(dy) <= 10.0 && std::abs(dx) <= 10.0;
      });
    case 8:  // four corner dots
      return render(cy, cx, amp, [&](double dy, double dx) {
        const double r = 3.0 + j;
        return std::hypot(std::abs(dy) - 6.5, std::abs(dx) - 6.5) <= r;
      });
    case 9:  // ring with a filled center dot: the target class
      return render(cy, cx, amp, [&](double dy, double dx) {
        const double d = std::hypot(dy, dx);
        return (d >= 6.5 + j && d <= 9.5 + j) || d <= 3.5 + j;
      });
    default:
      throw std::invalid_argument("render_class: class " + std::to_string(cls));
  }
}

}  // namespace

GlyphSet procedural_glyphs(std::uint64_t seed) {
  std::mt19937_64 rng = make_stream(seed, 0x676c797068ULL);
  std::uniform_real_distribution<double> center_off(-1.5, 1.5);
  std::uniform_real_distribution<double> size_jitter(-0.5, 0.5);
  std::uniform_real_distribution<float> amplitude(0.75f, 1.0f);

  constexpr int kVariantsPerClass = 24;
  GlyphSet set;
  set.source = GlyphSource::procedural;
  for (int cls = 0; cls <= 9; ++cls) {
    for (int v = 0; v < kVariantsPerClass; ++v) {
      const double cy = 13.5 + center_off(rng);
      const double cx = 13.5 + center_off(rng);
      const double j = size_jitter(rng);
      const float amp = amplitude(rng);
      set.glyphs.push_back(render_class(cls, cy, cx, amp, j));
      set.classes.push_back(cls);
    }
  }
  return set;
}

namespace {

struct Box {
  int row, col, size;
};

bool overlaps(const Box& a, const Box& b) {
  return a.row < b.row + b.size && b.row < a.row + a.size && a.col < b.col + b.size &&
         b.col < a.col + a.size;
}

bool overlaps_any(const Box& candidate, const std::vector<Box>& placed) {
  return std::any_of(placed.begin(), placed.end(),
                     [&](const Box& b) { return overlaps(candidate, b); });
}

}  // namespace

ImageBag generate_bag(const SynthConfig& cfg, const GlyphSet& glyphs, int label,
                      std::mt19937_64& rng, std::string id,
                      std::vector<PatchCoord>* placed_targets) {
  const int S = cfg.bag_size;
  const int g = glyphs.glyph_size();
  if (g == 0 || S < g) throw std::invalid_argument("generate_bag: bag_size < glyph size");
  if (label != 0 && label != 1) throw std::invalid_argument("generate_bag: label must be 0 or 1");

  std::vector<int> target_pool, other_pool;
  for (std::size_t i = 0; i < glyphs.classes.size(); ++i) {
    (glyphs.classes[i] == cfg.target_class ? target_pool : other_pool).push_back(int(i));
  }
  if (label == 1 && target_pool.empty())
    throw std::invalid_argument("generate_bag: glyph set has no target-class glyphs");
  if (other_pool.empty())
    throw std::invalid_argument("generate_bag: glyph set has no non-target glyphs");

  int n_targets = 0;
  if (label == 1) {
    const int lo = cfg.positive_target_count_min;
    std::uniform_int_distribution<int> count(lo, 3 * lo);
    n_targets = std::min(count(rng), cfg.glyph_count_per_bag);
  }

  std::uniform_int_distribution<int> top_left(0, S - g);
  std::vector<Box> boxes;
  std::vector<int> glyph_of_box;

  // Target placement. Clustered bags draw all target centers within
  // cluster_radius of one shared center; retries redraw the center.
  constexpr int kAttemptsPerGlyph = 1000;
  if (n_targets > 0) {
    if (cfg.layout == Layout::clustered) {
      std::uniform_real_distribution<double> center(0.0, double(S));
      std::uniform_real_distribution<double> disc(-cfg.cluster_radius, cfg.cluster_radius);
      bool placed_all = false;
      for (int outer = 0; outer < 100 && !placed_all; ++outer) {
        std::vector<Box> cluster_boxes;
        const double ccy = center(rng);
        const double ccx = center(rng);
        for (int t = 0; t < n_targets; ++t) {
          bool placed = false;
          for (int a = 0; a < kAttemptsPerGlyph; ++a) {
            const double dy = disc(rng);
            const double dx = disc(rng);
            if (dy * dy + dx * dx > cfg.cluster_radius * cfg.cluster_radius) continue;
            const int r = int(std::lround(ccy + dy - g / 2.0));
            const int c = int(std::lround(ccx + dx - g / 2.0));
            if (r < 0 || c < 0 || r > S - g || c > S - g) continue;
            const Box box{r, c, g};
            if (overlaps_any(box, cluster_boxes)) continue;
            cluster_boxes.push_back(box);
            placed = true;
            break;
          }
          if (!placed) break;
        }
        if (int(cluster_boxes.size()) == n_targets) {
          boxes = std::move(cluster_boxes);
          placed_all = true;
        }
      }
      if (!placed_all) {
        throw std::runtime_error(
            "generate_bag: cannot place clustered target glyphs without overlap; reduce "
            "glyph_count_per_bag or grow cluster_radius");
      }
    } else {
      for (int t = 0; t < n_targets; ++t) {
        bool placed = false;
        for (int a = 0; a < kAttemptsPerGlyph && !placed; ++a) {
          const Box box{top_left(rng), top_left(rng), g};
          if (!overlaps_any(box, boxes)) {
            boxes.push_back(box);
            placed = true;
          }
        }
        if (!placed) {
          throw std::runtime_error(
              "generate_bag: cannot place glyphs without overlap; reduce glyph_count_per_bag");
        }
      }
    }
    std::uniform_int_distribution<std::size_t> pick(0, target_pool.size() - 1);
    for (int t = 0; t < n_targets; ++t) glyph_of_box.push_back(target_pool[pick(rng)]);
  }

  // Non-target glyphs stay uniform in both layouts.
  std::uniform_int_distribution<std::size_t> pick_other(0, other_pool.size() - 1);
  for (int i = n_targets; i < cfg.glyph_count_per_bag; ++i) {
    bool placed = false;
    for (int a = 0; a < kAttemptsPerGlyph && !placed; ++a) {
      const Box box{top_left(rng), top_left(rng), g};
      if (!overlaps_any(box, boxes)) {
        boxes.push_back(box);
        glyph_of_box.push_back(other_pool[pick_other(rng)]);
        placed = true;
      }
    }
    if (!placed) {
      throw std::runtime_error(
          "generate_bag: cannot place glyphs without overlap; reduce glyph_count_per_bag");
    }
  }

  if (placed_targets) {
    placed_targets->clear();
    for (int t = 0; t < n_targets; ++t)
      placed_targets->push_back({boxes[std::size_t(t)].row, boxes[std::size_t(t)].col, g});
  }

  ImageBag bag;
  bag.id = std::move(id);
  bag.label = label;
  bag.pixels = Image::Zero(S, S);
  Mask mask = Mask::Zero(S, S);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& box = boxes[i];
    bag.pixels.block(box.row, box.col, g, g) = glyphs.glyphs[std::size_t(glyph_of_box[i])];
    if (int(i) < n_targets) mask.block(box.row, box.col, g, g).setConstant(1);
  }
  bag.truth_mask = std::move(mask);
  return bag;
}

std::pair<std::vector<ImageBag>, std::vector<ImageBag>> generate_dataset(const SynthConfig& cfg,
                                                                         const GlyphSet& glyphs) {
  auto make_split = [&](int count, const std::string& prefix, std::uint64_t stream_base) {
    std::vector<ImageBag> bags;
    bags.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i) {
      const int label = (i % 2 == 0) ? 1 : 0;  // class-balanced halves (+-1)
      auto rng = make_stream(cfg.seed, stream_base + std::uint64_t(i));
      std::string id = prefix + "_" + std::to_string(i);
      bags.push_back(generate_bag(cfg, glyphs, label, rng, std::move(id)));
    }
    return bags;
  };
  return {make_split(cfg.n_train, "train", 0x100000000ULL),
          make_split(cfg.n_test, "test", 0x200000000ULL)};
}

}  // namespace mcmil
