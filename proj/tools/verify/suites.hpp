#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace canet::verify {

/// Outcome of one oracle suite; `lines` are human-readable detail rows.
struct SuiteResult {
  std::string name;
  bool passed = true;
  std::vector<std::string> lines;

  void check(bool ok, std::string line);
};

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kMetricTolerance = 1e-12;

/// Finite-difference checks of every differentiable op plus sampled
/// parameters of the full toy network.
SuiteResult gradcheck_suite(std::size_t full_graph_samples = 96);

/// Random input extents in [32, 160]: logits (N,K,H,W), shared extent
/// ceil(H/8) x ceil(W/8), 256 re-fused context channels.
SuiteResult shapes_suite(int cases = 50, std::uint64_t seed = 7);

/// Confusion-matrix PA / mIoU against brute-force pixel-pair counting.
SuiteResult metrics_suite(int cases = 200, std::uint64_t seed = 11);

/// Backbone + CAM parameter counts of the three topologies against the
/// published 28.7M / 31.9M / 33.0M.
SuiteResult params_suite();

}  // namespace canet::verify
