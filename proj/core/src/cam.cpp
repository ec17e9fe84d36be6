#include "canet/cam.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "canet/errors.hpp"

namespace canet {
namespace {

constexpr const char* kCam = "cam";
constexpr const char* kFsm = "fsm";

}  // namespace

std::string to_string(Topology t) {
  switch (t) {
    case Topology::kHybrid: return "hybrid";
    case Topology::kSeries: return "series";
    case Topology::kParallel: return "parallel";
  }
  return "hybrid";
}

Topology parse_topology(std::string_view tag) {
  if (tag == "hybrid") return Topology::kHybrid;
  if (tag == "series") return Topology::kSeries;
  if (tag == "parallel") return Topology::kParallel;
  throw ConfigError("unknown topology '" + std::string(tag) +
                    "' (expected hybrid, series or parallel)");
}

void CamConfig::validate() const {
  if (width < 1) throw ConfigError("cam.width must be positive");
  if (fsm_channels < 1) throw ConfigError("cam.fsm_channels must be positive");
  for (int s : scales) {
    if (s < 1) throw ConfigError("cam.scales entries must be >= 1");
  }
  if (scales.empty() && topology != Topology::kSeries) {
    throw ConfigError("cam.scales must be non-empty for " +
                      to_string(topology) + " topology");
  }
  if (scales.empty() && !use_global_flow) {
    throw ConfigError("cam needs at least one flow");
  }
}

GlobalFlow::GlobalFlow(ModelGraph& g, int in_channels, int width)
    : proj_(make_conv_bn_act(g, "cam.gf.proj", kCam, in_channels, width, 1)) {}

FlowOutput GlobalFlow::operator()(const Var& shared, BnMode mode) const {
  return {proj_(global_avg_pool(shared), mode), 0};
}

ContextFlow::ContextFlow(ModelGraph& g, int index, int scale,
                         int shared_channels, int upper_channels, int width)
    : index_(index),
      scale_(scale),
      shared_channels_(shared_channels),
      upper_channels_(upper_channels) {
  const std::string name = "cam.cf" + std::to_string(index);
  const int in = shared_channels + upper_channels;
  dw1_ = make_conv(g, name + ".dw1", kCam, in, in, 3, Conv2dOptions{1, 1, 1, in});
  pw1_ = make_conv_bn_act(g, name + ".pw1", kCam, in, width, 1);
  dw2_ = make_conv(g, name + ".dw2", kCam, width, width, 3,
                   Conv2dOptions{1, 1, 1, width});
  pw2_ = make_conv_bn_act(g, name + ".pw2", kCam, width, width, 1);
}

FlowOutput ContextFlow::operator()(const std::optional<Var>& shared,
                                   const std::optional<FlowOutput>& upper,
                                   int out_h, int out_w, BnMode mode) const {
  if (shared.has_value() != (shared_channels_ > 0) ||
      upper.has_value() != (upper_channels_ > 0)) {
    throw ShapeError("context flow " + std::to_string(index_) +
                     ": inputs do not match its wiring");
  }
  std::vector<Var> parts;
  if (shared) parts.push_back(*shared);
  if (upper) parts.push_back(bilinear_upsample(upper->tensor, out_h, out_w));
  Var x = parts.size() == 1 ? parts.front() : concat_channels(parts);
  if (x.shape().c != shared_channels_ + upper_channels_) {
    throw ShapeError("context flow " + std::to_string(index_) + ": expected " +
                     std::to_string(shared_channels_ + upper_channels_) +
                     " input channels, got " + std::to_string(x.shape().c));
  }
  x = avg_pool2d(x, scale_);
  x = pw1_(dw1_(x), mode);
  x = pw2_(dw2_(x), mode);
  return {bilinear_upsample(x, out_h, out_w), index_};
}

FeatureSelection::FeatureSelection(ModelGraph& g, int width, int out_channels)
    : width_(width),
      proj_(make_conv_bn_act(g, "cam.fsm.proj", kFsm, width, out_channels, 3,
                             Conv2dOptions{1, 1, 1, 1})),
      gate_(make_conv_bn_act(g, "cam.fsm.gate", kFsm, out_channels,
                             out_channels, 1, {}, false)) {}

Var sum_flows(const std::vector<FlowOutput>& flows, int width) {
  if (flows.empty()) throw ShapeError("re-fusion: no flow outputs");
  int h = 1;
  int w = 1;
  for (const auto& f : flows) {
    if (f.tensor.shape().c != width) {
      throw ShapeError("re-fusion: flow " + std::to_string(f.flow_id) +
                       " has " + std::to_string(f.tensor.shape().c) +
                       " channels, expected " + std::to_string(width));
    }
    h = std::max(h, f.tensor.shape().h);
    w = std::max(w, f.tensor.shape().w);
  }
  Var u = bilinear_upsample(flows.front().tensor, h, w);
  for (std::size_t i = 1; i < flows.size(); ++i) {
    u = add(u, bilinear_upsample(flows[i].tensor, h, w));
  }
  return u;
}

Var FeatureSelection::operator()(const std::vector<FlowOutput>& flows,
                                 BnMode mode) const {
  Var refined = proj_(sum_flows(flows, width_), mode);
  Var g = sigmoid(gate_(global_avg_pool(refined), mode));
  return add(mul(refined, g), refined);
}

Cam::Cam(ModelGraph& g, const CamConfig& cfg, int shared_channels)
    : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.use_global_flow) gf_.emplace(g, shared_channels, cfg_.width);
  for (std::size_t i = 0; i < cfg_.scales.size(); ++i) {
    const bool first = i == 0;
    int shared_in = shared_channels;
    int upper_in = cfg_.width;
    switch (cfg_.topology) {
      case Topology::kHybrid:
        if (first && !cfg_.use_global_flow) upper_in = 0;
        break;
      case Topology::kParallel:
        upper_in = 0;
        break;
      case Topology::kSeries:
        if (first) {
          if (!cfg_.use_global_flow) upper_in = 0;
        } else {
          shared_in = 0;
        }
        break;
    }
    cfs_.emplace_back(g, static_cast<int>(i) + 1, cfg_.scales[i], shared_in,
                      upper_in, cfg_.width);
  }
  if (cfg_.use_fsm) fsm_.emplace(g, cfg_.width, cfg_.fsm_channels);
}

std::vector<FlowOutput> Cam::flows(const Var& shared, BnMode mode) const {
  Tape& tape = shared.tape();
  const int h = shared.shape().h;
  const int w = shared.shape().w;

  std::optional<FlowOutput> global;
  if (gf_) {
    auto scope = tape.scope("gf");
    global = (*gf_)(shared, mode);
  }

  std::vector<FlowOutput> context;
  for (const ContextFlow& cf : cfs_) {
    auto scope = tape.scope("cf" + std::to_string(cf.index()));
    const bool first = context.empty();
    std::optional<Var> shared_in = shared;
    std::optional<FlowOutput> upper;
    switch (cfg_.topology) {
      case Topology::kHybrid:
        upper = first ? global : context.back();
        break;
      case Topology::kParallel:
        break;
      case Topology::kSeries:
        if (first) {
          upper = global;
        } else {
          shared_in.reset();
          upper = context.back();
        }
        break;
    }
    context.push_back(cf(shared_in, upper, h, w, mode));
  }

  std::vector<FlowOutput> out;
  if (global) out.push_back(*global);
  if (cfg_.topology == Topology::kSeries) {
    if (!context.empty()) out.push_back(context.back());
  } else {
    out.insert(out.end(), context.begin(), context.end());
  }
  return out;
}

Var Cam::forward(const Var& shared, BnMode mode) const {
  auto scope = shared.tape().scope("cam");
  std::vector<FlowOutput> fused = flows(shared, mode);
  auto fuse_scope = shared.tape().scope("fuse");
  return fsm_ ? (*fsm_)(fused, mode) : sum_flows(fused, cfg_.width);
}

namespace {

// Flow label of a scope path: "gf", "cfN", "fuse", or "" outside the module.
std::string flow_label(const std::string& scope) {
  const std::string::size_type at = scope.find("cam/");
  if (at == std::string::npos) return "";
  const std::string rest = scope.substr(at + 4);
  return rest.substr(0, rest.find('/'));
}

}  // namespace

FlowEdgeCounts audit_flow_edges(const Tape& tape) {
  std::set<std::pair<std::string, std::string>> shortcut, chained, residual,
      global;
  for (const TapeNode& node : tape.nodes()) {
    const std::string dst = flow_label(node.scope);
    if (dst.empty() || dst == "gf") continue;
    for (int in : node.inputs) {
      const TapeNode& src_node = tape.node(in);
      if (src_node.op == "param") continue;
      const std::string src = flow_label(src_node.scope);
      if (src == dst) continue;
      if (dst == "fuse") {
        if (src == "gf") global.emplace(src, dst);
        else if (src.rfind("cf", 0) == 0) residual.emplace(src, dst);
      } else if (src.empty()) {
        shortcut.emplace("shared", dst);
      } else {
        chained.emplace(src, dst);
      }
    }
  }
  return FlowEdgeCounts{static_cast<int>(shortcut.size()),
                        static_cast<int>(chained.size()),
                        static_cast<int>(residual.size()),
                        static_cast<int>(global.size())};
}

}  // namespace canet
