#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "canet/scene.hpp"

namespace canet {

/// In-memory dataset. On disk it is `images/NNNNN.ppm`, `labels/NNNNN.pgm`
/// and `manifest.txt` listing one id per line.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  /// Per-channel mean intensity over all images.
  std::array<double, 3> channel_mean() const;
};

/// Scenes [first, first + count) of `spec`.
Dataset generate_dataset(const SceneSpec& spec, int count, int first = 0);

void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

std::string sample_id(int index);

}  // namespace canet
