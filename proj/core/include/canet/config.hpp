#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "canet/canet_model.hpp"
#include "canet/scene.hpp"
#include "canet/train_config.hpp"

namespace canet {

/// Everything a CLI run needs, read from a sectioned key=value file:
///
///   [backbone]  stage_blocks, stem_channels, stage_channels, dilations,
///               bottleneck
///   [cam]       scales, width, fsm_channels, topology, use_global_flow,
///               use_fsm
///   [decoder]   low_level_channels_out, fuse_channels, num_classes,
///               use_decoder, use_aux
///   [train]     TrainConfig fields
///   [scene]     SceneSpec fields (strata as small_min, small_max, ...)
///   [paths]     train_data, eval_data, output_dir
///
/// Lists are comma separated; '#' starts a comment. Unknown sections and
/// keys are rejected.
struct RunConfig {
  CanetConfig model = CanetConfig::toy();
  TrainConfig train;
  SceneSpec scene;
  std::string train_data;
  std::string eval_data;
  std::string output_dir = "run";

  void validate() const;
};

/// The parsed config is validated before it is returned.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical text; parse(serialize(c)) reproduces c exactly.
std::string serialize_run_config(const RunConfig& cfg);

}  // namespace canet
