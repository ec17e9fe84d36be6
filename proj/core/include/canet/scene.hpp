#pragma once

#include <cstdint>

#include "canet/tensor.hpp"

namespace canet {

/// An RGB image in [0,1] with its exact label map.
struct Sample {
  Tensor image;    ///< (1,3,H,W)
  LabelMap label;  ///< (1,H,W)
};

struct SizeRange {
  double min_radius = 1.0;
  double max_radius = 1.0;
};

/// Synthetic multi-scale scene description. Class 0 is background; each
/// foreground class has a fixed shape kind, size stratum and colour family,
/// and some classes share a colour family so that only shape or object
/// extent tells them apart.
struct SceneSpec {
  int num_classes = 5;
  int height = 64;
  int width = 64;
  SizeRange small{3.0, 5.0};
  SizeRange medium{6.0, 10.0};
  SizeRange large{14.0, 24.0};
  int objects_per_image = 6;
  double noise = 0.05;
  std::uint64_t seed = 1;

  /// Requires K >= 2, positive canvas, ordered strata, and a
  /// large.max / small.min ratio of at least 8.
  void validate() const;
};

enum class ShapeKind { kDisc, kRect, kBar };
enum class Stratum { kSmall, kMedium, kLarge };

struct ClassStyle {
  ShapeKind shape;
  Stratum stratum;
  int palette;  ///< classes with the same palette share a mean colour
};

/// Style of foreground class c >= 1.
ClassStyle class_style(int c);

/// Deterministic in (spec.seed, index).
Sample generate_scene(const SceneSpec& spec, std::uint64_t index);

}  // namespace canet
