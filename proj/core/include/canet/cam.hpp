#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "canet/layers.hpp"

namespace canet {

/// How context flows are wired together.
///   kHybrid   - GF -> CF1 -> CF2 ... chained, every CF also reads the
///               shared features, and every flow feeds the FSM.
///   kSeries   - only CF1 reads the shared features; each later CF reads the
///               previous flow alone; only the last CF (plus GF) feeds FSM.
///   kParallel - no chaining; each CF reads only the shared features.
enum class Topology { kHybrid, kSeries, kParallel };

std::string to_string(Topology t);
/// Accepts "hybrid", "series" or "parallel"; throws ConfigError otherwise.
Topology parse_topology(std::string_view tag);

struct CamConfig {
  std::vector<int> scales{2, 4, 8, 16};
  int width = 512;
  int fsm_channels = 256;
  Topology topology = Topology::kHybrid;
  bool use_global_flow = true;
  /// Without the FSM the re-fused context is the plain flow sum, `width`
  /// channels wide.
  bool use_fsm = true;

  void validate() const;
};

struct FlowOutput {
  Var tensor;
  int flow_id = 0;  ///< 0 = global flow, i = i-th context flow
};

/// GAP -> 1x1 conv -> BN -> ReLU. Output stays (N, width, 1, 1).
class GlobalFlow {
 public:
  GlobalFlow(ModelGraph& g, int in_channels, int width);
  FlowOutput operator()(const Var& shared, BnMode mode) const;
  const ConvBnAct& projection() const { return proj_; }

 private:
  ConvBnAct proj_;
};

/// Shallow encoder-decoder at one down-sampling scale:
/// concat(shared, upper) -> avg_pool(N) -> [DW3x3 -> PW1x1 -> BN -> ReLU] x2
/// -> bilinear back to the shared-feature extent.
class ContextFlow {
 public:
  ContextFlow(ModelGraph& g, int index, int scale, int shared_channels,
              int upper_channels, int width);

  /// Either input may be absent, but not both. `upper` is resized to the
  /// target extent first (a 1x1 global flow becomes a constant field).
  FlowOutput operator()(const std::optional<Var>& shared,
                        const std::optional<FlowOutput>& upper, int out_h,
                        int out_w, BnMode mode) const;

  int scale() const { return scale_; }
  int index() const { return index_; }
  const ConvBnAct& pointwise1() const { return pw1_; }
  const ConvBnAct& pointwise2() const { return pw2_; }

 private:
  int index_;
  int scale_;
  int shared_channels_;
  int upper_channels_;
  ConvLayer dw1_;
  ConvBnAct pw1_;
  ConvLayer dw2_;
  ConvBnAct pw2_;
};

/// Channel-attention re-fusion:
///   U  = sum_i bilinear(flow_i)
///   U' = ReLU(BN(conv3x3(U)))
///   out = U' * sigmoid(BN(conv1x1(GAP(U')))) + U'
/// Sum of flow outputs, each resized to the largest extent among them.
/// Every flow must have `width` channels.
Var sum_flows(const std::vector<FlowOutput>& flows, int width);

class FeatureSelection {
 public:
  FeatureSelection(ModelGraph& g, int width, int out_channels);
  Var operator()(const std::vector<FlowOutput>& flows, BnMode mode) const;

  const ConvBnAct& projection() const { return proj_; }
  const ConvBnAct& gate() const { return gate_; }

 private:
  int width_;
  ConvBnAct proj_;
  ConvBnAct gate_;
};

class Cam {
 public:
  Cam(ModelGraph& g, const CamConfig& cfg, int shared_channels);

  /// Shared features (N,C,h,w) -> re-fused contexts (N,out_channels(),h,w).
  Var forward(const Var& shared, BnMode mode) const;
  /// Flow outputs in the order they enter re-fusion.
  std::vector<FlowOutput> flows(const Var& shared, BnMode mode) const;

  const CamConfig& config() const { return cfg_; }
  const std::vector<ContextFlow>& context_flows() const { return cfs_; }
  const std::optional<GlobalFlow>& global_flow() const { return gf_; }
  const std::optional<FeatureSelection>& fsm() const { return fsm_; }
  int out_channels() const {
    return cfg_.use_fsm ? cfg_.fsm_channels : cfg_.width;
  }

 private:
  CamConfig cfg_;
  std::optional<GlobalFlow> gf_;
  std::vector<ContextFlow> cfs_;
  std::optional<FeatureSelection> fsm_;
};

/// Flow guidance connections found on a tape, counted as distinct
/// (source, destination) pairs between flow scopes.
struct FlowEdgeCounts {
  int shortcut = 0;  ///< shared features -> CF
  int chained = 0;   ///< GF or CF -> another CF
  int residual = 0;  ///< CF -> re-fusion
  int global = 0;    ///< GF -> re-fusion
};

FlowEdgeCounts audit_flow_edges(const Tape& tape);

}  // namespace canet
