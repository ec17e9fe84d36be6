#include "canet/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "canet/errors.hpp"

namespace canet {
namespace {

// Pairs of classes share a palette: {1,2} differ by size, {3,4} by shape.
constexpr std::array<ClassStyle, 6> kStyles{{
    {ShapeKind::kDisc, Stratum::kSmall, 0},
    {ShapeKind::kDisc, Stratum::kLarge, 0},
    {ShapeKind::kBar, Stratum::kMedium, 1},
    {ShapeKind::kRect, Stratum::kLarge, 1},
    {ShapeKind::kDisc, Stratum::kMedium, 2},
    {ShapeKind::kRect, Stratum::kSmall, 2},
}};

constexpr std::array<std::array<double, 3>, 6> kPalettes{{
    {0.85, 0.25, 0.20},
    {0.20, 0.45, 0.90},
    {0.25, 0.80, 0.30},
    {0.90, 0.80, 0.20},
    {0.70, 0.30, 0.80},
    {0.20, 0.80, 0.80},
}};

std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

const SizeRange& range_for(const SceneSpec& spec, Stratum s) {
  switch (s) {
    case Stratum::kSmall: return spec.small;
    case Stratum::kMedium: return spec.medium;
    case Stratum::kLarge: return spec.large;
  }
  return spec.medium;
}

}  // namespace

void SceneSpec::validate() const {
  if (num_classes < 2 || num_classes > 255) {
    throw ConfigError("scene.num_classes must be in [2,255]");
  }
  if (height < 1 || width < 1) throw ConfigError("scene canvas must be positive");
  if (objects_per_image < 0) {
    throw ConfigError("scene.objects_per_image must be >= 0");
  }
  if (noise < 0.0) throw ConfigError("scene.noise must be >= 0");
  for (const SizeRange* r : {&small, &medium, &large}) {
    if (r->min_radius <= 0.0 || r->max_radius < r->min_radius) {
      throw ConfigError("scene size strata need 0 < min_radius <= max_radius");
    }
  }
  if (large.max_radius / small.min_radius < 8.0) {
    throw ConfigError("scene size strata must span at least a 1:8 ratio");
  }
}

ClassStyle class_style(int c) {
  const int i = (c - 1) % static_cast<int>(kStyles.size());
  ClassStyle style = kStyles[i];
  style.palette += 3 * ((c - 1) / static_cast<int>(kStyles.size()));
  return style;
}

Sample generate_scene(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  std::mt19937_64 rng(mix(spec.seed, index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int h = spec.height;
  const int w = spec.width;
  Sample s{Tensor(Shape{1, 3, h, w}), LabelMap(1, h, w, 0)};

  // Low-saturation background tone with a gentle horizontal gradient.
  const double base = 0.35 + 0.2 * unit(rng);
  const double tint = 0.08 * (unit(rng) - 0.5);
  const double slope = 0.1 * (unit(rng) - 0.5);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = base + slope * (static_cast<double>(x) / w - 0.5);
      s.image.at(0, 0, y, x) = g + tint;
      s.image.at(0, 1, y, x) = g;
      s.image.at(0, 2, y, x) = g - tint;
    }
  }

  std::uniform_int_distribution<int> pick_class(1, spec.num_classes - 1);
  for (int o = 0; o < spec.objects_per_image; ++o) {
    const int cls = pick_class(rng);
    const ClassStyle style = class_style(cls);
    const SizeRange& range = range_for(spec, style.stratum);
    const double radius =
        range.min_radius + (range.max_radius - range.min_radius) * unit(rng);
    const double cy = unit(rng) * h;
    const double cx = unit(rng) * w;
    const auto& pal = kPalettes[style.palette % kPalettes.size()];
    // Per-class offset keeps each class distribution distinct but overlapping
    // with its palette partner; per-object jitter adds spread.
    std::array<double, 3> color{};
    for (int ch = 0; ch < 3; ++ch) {
      const double offset = 0.03 * std::sin(1.7 * cls + 2.1 * ch);
      color[ch] = std::clamp(pal[ch] + offset + 0.05 * gauss(rng), 0.0, 1.0);
    }

    double half_h = radius;
    double half_w = radius;
    if (style.shape == ShapeKind::kRect) {
      half_w = radius * (0.6 + 0.4 * unit(rng));
    } else if (style.shape == ShapeKind::kBar) {
      const double thickness = 1.5 + 1.5 * unit(rng);
      if (unit(rng) < 0.5) {
        half_w = thickness;
      } else {
        half_h = thickness;
      }
    }

    const int y0 = std::max(0, static_cast<int>(std::floor(cy - half_h)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + half_h)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - half_w)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + half_w)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dy = y + 0.5 - cy;
        const double dx = x + 0.5 - cx;
        bool inside;
        if (style.shape == ShapeKind::kDisc) {
          inside = dx * dx + dy * dy <= radius * radius;
        } else {
          inside = std::abs(dx) <= half_w && std::abs(dy) <= half_h;
        }
        if (!inside) continue;
        s.label.at(0, y, x) = cls;
        for (int ch = 0; ch < 3; ++ch) s.image.at(0, ch, y, x) = color[ch];
      }
    }
  }

  for (double& v : s.image.data()) {
    v = std::clamp(v + spec.noise * gauss(rng), 0.0, 1.0);
  }
  return s;
}

}  // namespace canet
