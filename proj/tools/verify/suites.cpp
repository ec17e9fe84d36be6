#include "verify/suites.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "canet/canet_model.hpp"
#include "canet/gradcheck.hpp"
#include "canet/loss.hpp"
#include "canet/metrics.hpp"

namespace canet::verify {
namespace {

std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

Parameter random_param(const std::string& name, Shape shape,
                       std::mt19937_64& rng, double scale = 1.0) {
  Parameter p;
  p.name = name;
  p.value = Tensor(shape);
  std::normal_distribution<double> nd(0.0, scale);
  for (double& v : p.value.data()) v = nd(rng);
  p.zero_grad();
  return p;
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  Tensor t(shape);
  std::normal_distribution<double> nd;
  for (double& v : t.data()) v = nd(rng);
  return t;
}

/// Random linear functional of an op output, so every output element
/// contributes a distinct weight to the loss.
Var project(const Var& y, std::mt19937_64& rng) {
  return inner_product(y, random_tensor(y.shape(), rng));
}

struct OpCase {
  std::string name;
  std::vector<Parameter> params;
  std::function<Var(Tape&, std::vector<Parameter>&)> build;
};

std::vector<OpCase> op_cases(std::mt19937_64& rng) {
  std::vector<OpCase> cases;
  auto add_case = [&](std::string name, std::vector<Parameter> params,
                      std::function<Var(std::vector<Var>&)> body) {
    const std::uint64_t seed = rng();
    cases.push_back({std::move(name), std::move(params),
                     [body, seed](Tape& t, std::vector<Parameter>& ps) {
                       std::vector<Var> in;
                       for (Parameter& p : ps) in.push_back(t.param(p));
                       std::mt19937_64 local(seed);
                       return project(body(in), local);
                     }});
  };
  auto x = [&](Shape s) { return random_param("x", s, rng); };

  add_case("conv2d", {x({2, 3, 6, 7}), random_param("w", {4, 3, 3, 3}, rng),
                      random_param("b", {1, 4, 1, 1}, rng)},
           [](std::vector<Var>& v) {
             return conv2d(v[0], v[1], v[2], Conv2dOptions{1, 1, 1, 1});
           });
  add_case("conv2d_strided_dilated",
           {x({1, 2, 9, 8}), random_param("w", {3, 2, 3, 3}, rng)},
           [](std::vector<Var>& v) {
             return conv2d(v[0], v[1], std::nullopt, Conv2dOptions{2, 2, 2, 1});
           });
  add_case("conv2d_grouped",
           {x({2, 4, 5, 5}), random_param("w", {6, 2, 3, 3}, rng)},
           [](std::vector<Var>& v) {
             return conv2d(v[0], v[1], std::nullopt, Conv2dOptions{1, 1, 1, 2});
           });
  add_case("conv2d_depthwise",
           {x({2, 3, 5, 6}), random_param("w", {3, 1, 3, 3}, rng)},
           [](std::vector<Var>& v) {
             return conv2d(v[0], v[1], std::nullopt, Conv2dOptions{1, 1, 1, 3});
           });
  add_case("conv2d_1x1", {x({2, 3, 4, 5}), random_param("w", {2, 3, 1, 1}, rng)},
           [](std::vector<Var>& v) {
             return conv2d(v[0], v[1], std::nullopt, Conv2dOptions{});
           });
  add_case("avg_pool2d", {x({2, 2, 7, 5})},
           [](std::vector<Var>& v) { return avg_pool2d(v[0], 3); });
  add_case("global_avg_pool", {x({2, 3, 4, 5})},
           [](std::vector<Var>& v) { return global_avg_pool(v[0]); });
  add_case("bilinear_up", {x({1, 2, 3, 4})},
           [](std::vector<Var>& v) { return bilinear_upsample(v[0], 7, 9); });
  add_case("bilinear_down", {x({1, 2, 8, 7})},
           [](std::vector<Var>& v) { return bilinear_upsample(v[0], 3, 4); });
  add_case("relu", {x({2, 3, 4, 4})},
           [](std::vector<Var>& v) { return relu(v[0]); });
  add_case("sigmoid", {x({2, 3, 4, 4})},
           [](std::vector<Var>& v) { return sigmoid(v[0]); });
  add_case("add_broadcast", {x({2, 3, 4, 5}), random_param("g", {2, 3, 1, 1}, rng)},
           [](std::vector<Var>& v) { return add(v[0], v[1]); });
  add_case("mul_broadcast", {x({2, 3, 4, 5}), random_param("g", {2, 3, 1, 1}, rng)},
           [](std::vector<Var>& v) { return mul(v[0], v[1]); });
  add_case("mul_same", {x({2, 3, 4, 5}), random_param("y", {2, 3, 4, 5}, rng)},
           [](std::vector<Var>& v) { return mul(v[0], v[1]); });
  add_case("concat_channels",
           {x({2, 2, 3, 4}), random_param("y", {2, 3, 3, 4}, rng)},
           [](std::vector<Var>& v) { return concat_channels({v[0], v[1]}); });
  add_case("scalar_scale", {x({1, 2, 3, 3})},
           [](std::vector<Var>& v) { return scalar_scale(v[0], -2.5); });

  for (BnMode mode : {BnMode::kTrain, BnMode::kEval}) {
    auto state = std::make_shared<BatchNormState>("bn", "", 3);
    for (int c = 0; c < 3; ++c) {
      state->running_mean[c] = 0.1 * c;
      state->running_var[c] = 0.5 + c;
    }
    add_case(mode == BnMode::kTrain ? "batch_norm_train" : "batch_norm_eval",
             {x({3, 3, 4, 5}), random_param("scale", {1, 3, 1, 1}, rng),
              random_param("shift", {1, 3, 1, 1}, rng)},
             [state, mode](std::vector<Var>& v) {
               return batch_norm(v[0], v[1], v[2], *state, mode);
             });
  }

  LabelMap labels(2, 4, 5);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels.values[i] = static_cast<int>(i % 4);
  }
  labels.values[3] = kIgnoreIndex;
  labels.values[11] = kIgnoreIndex;
  cases.push_back({"softmax_cross_entropy", {x({2, 4, 4, 5})},
                   [labels](Tape& t, std::vector<Parameter>& ps) {
                     return softmax_cross_entropy(t.param(ps[0]), labels);
                   }});
  return cases;
}

}  // namespace

void SuiteResult::check(bool ok, std::string line) {
  passed = passed && ok;
  lines.push_back((ok ? "ok   " : "FAIL ") + std::move(line));
}

SuiteResult gradcheck_suite(std::size_t full_graph_samples) {
  SuiteResult result{"gradcheck", true, {}};
  std::mt19937_64 rng(2024);

  GradCheckOptions all;
  all.samples = 0;
  for (OpCase& c : op_cases(rng)) {
    std::vector<Parameter*> ptrs;
    for (Parameter& p : c.params) ptrs.push_back(&p);
    const GradCheckReport r = check_gradients(
        [&](Tape& t) { return c.build(t, c.params); }, ptrs, all);
    result.check(r.max_rel_error() <= kGradTolerance && !r.entries.empty(),
                 format("%-24s probes=%-4zu max_rel_err=%.2e", c.name.c_str(),
                        r.entries.size(), r.max_rel_error()));
  }

  CanetModel model(CanetConfig::toy(), 3);
  const Tensor image = random_tensor(Shape{2, 3, 32, 32}, rng);
  LabelMap labels(2, 32, 32);
  std::uniform_int_distribution<int> cls(0, model.num_classes() - 1);
  for (int& v : labels.values) v = cls(rng);
  std::vector<Parameter*> params;
  for (Parameter& p : model.graph().parameters()) params.push_back(&p);
  GradCheckOptions sampled;
  sampled.samples = full_graph_samples;
  sampled.seed = 5;
  const GradCheckReport r = check_gradients(
      [&](Tape& t) {
        const CanetOutputs out =
            model.forward(t.constant(image), BnMode::kTrain, true);
        return joint_loss(out.logits, *out.aux_logits, labels, kDefaultAuxWeight)
            .total;
      },
      params, sampled);
  const GradCheckEntry* worst = r.worst();
  result.check(r.entries.size() >= 64 && r.max_rel_error() <= kGradTolerance,
               format("%-24s probes=%-4zu max_rel_err=%.2e kink_resamples=%zu "
                      "worst=%s",
                      "toy_canet_joint_loss", r.entries.size(),
                      r.max_rel_error(), r.kink_straddles,
                      worst ? worst->param.c_str() : "-"));
  return result;
}

SuiteResult shapes_suite(int cases, std::uint64_t seed) {
  SuiteResult result{"shapes", true, {}};
  CanetConfig cfg = CanetConfig::toy();
  cfg.cam.fsm_channels = 256;
  const CanetModel model(cfg, 1);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> extent(kMinInputExtent, 160);
  int failures = 0;
  for (int i = 0; i < cases; ++i) {
    const int h = extent(rng);
    const int w = extent(rng);
    Tape tape;
    const Var x = tape.constant(Tensor(Shape{1, 3, h, w}, 0.5));
    const CanetOutputs out = model.forward(x, BnMode::kEval);
    const Shape logits = out.logits.shape();
    const Shape shared = out.features.shared.shape();
    const Shape context = out.context.shape();
    const bool ok = logits == Shape{1, model.num_classes(), h, w} &&
                    shared.h == ceil_div(h, 8) && shared.w == ceil_div(w, 8) &&
                    context.c == 256 && context.h == shared.h &&
                    context.w == shared.w;
    if (!ok) {
      ++failures;
      result.check(false, format("%dx%d logits=%s shared=%s context=%s", h, w,
                                 logits.str().c_str(), shared.str().c_str(),
                                 context.str().c_str()));
    }
  }
  result.check(failures == 0,
               format("%d/%d input sizes in [32,160] satisfy the shape contract",
                      cases - failures, cases));
  return result;
}

namespace {

struct PairCount {
  double pa = 0.0;
  double miou = 0.0;
};

// Straight from the definitions: every pixel pair is inspected once per
// class, with no confusion matrix in between.
PairCount brute_force(const LabelMap& pred, const LabelMap& gt, int k) {
  long correct = 0;
  long valid = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.values[i] == kIgnoreIndex) continue;
    ++valid;
    if (pred.values[i] == gt.values[i]) ++correct;
  }
  double iou_sum = 0.0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    long inter = 0;
    long uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt.values[i] == kIgnoreIndex) continue;
      const bool p = pred.values[i] == c;
      const bool g = gt.values[i] == c;
      inter += p && g;
      uni += p || g;
    }
    if (uni == 0) continue;
    ++present;
    iou_sum += static_cast<double>(inter) / static_cast<double>(uni);
  }
  return {static_cast<double>(correct) / static_cast<double>(valid),
          iou_sum / present};
}

}  // namespace

SuiteResult metrics_suite(int cases, std::uint64_t seed) {
  SuiteResult result{"metrics", true, {}};
  const ConfusionMatrix worked = ConfusionMatrix::from_counts({{2, 1}, {0, 3}});
  const double worked_pa = pixel_accuracy(worked);
  const double worked_miou = mean_iou(worked).mean;
  result.check(std::abs(worked_pa - 5.0 / 6.0) <= kMetricTolerance &&
                   std::abs(worked_miou - (2.0 / 3.0 + 3.0 / 4.0) / 2.0) <=
                       kMetricTolerance,
               format("cm=[[2,1],[0,3]] PA=%.12f mIoU=%.12f", worked_pa,
                      worked_miou));

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_k(2, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < cases; ++i) {
    const int k = pick_k(rng);
    std::uniform_int_distribution<int> cls(0, k - 1);
    LabelMap gt(1, 16, 16);
    LabelMap pred(1, 16, 16);
    for (std::size_t p = 0; p < gt.size(); ++p) {
      gt.values[p] = unit(rng) < 0.05 ? kIgnoreIndex : cls(rng);
      // Bias predictions towards the truth so IoUs spread over (0, 1).
      pred.values[p] = (unit(rng) < 0.6 && gt.values[p] != kIgnoreIndex)
                           ? gt.values[p]
                           : cls(rng);
    }
    ConfusionMatrix cm(k);
    cm.update(pred, gt);
    const PairCount oracle = brute_force(pred, gt, k);
    worst = std::max({worst, std::abs(pixel_accuracy(cm) - oracle.pa),
                      std::abs(mean_iou(cm).mean - oracle.miou)});
  }
  result.check(worst <= kMetricTolerance,
               format("%d random pairs (K<=8, 16x16): max |cm - brute force| = "
                      "%.2e",
                      cases, worst));
  return result;
}

SuiteResult params_suite() {
  SuiteResult result{"params", true, {}};
  struct Row {
    Topology topology;
    double published;
    std::size_t count = 0;
  };
  std::vector<Row> rows{{Topology::kSeries, 28.7e6},
                        {Topology::kParallel, 31.9e6},
                        {Topology::kHybrid, 33.0e6}};
  for (Row& row : rows) {
    CanetConfig cfg = CanetConfig::resnet50();
    cfg.cam.topology = row.topology;
    cfg.cam.use_fsm = false;
    cfg.use_decoder = false;
    cfg.use_aux = false;
    const CanetModel model(cfg, 0);
    row.count = model.graph().count_params({"backbone", "cam"});
    result.lines.push_back(format("      %-8s backbone+CAM %6.2fM  published %4.1fM",
                                  to_string(row.topology).c_str(),
                                  row.count / 1e6, row.published / 1e6));
  }
  const double hybrid = static_cast<double>(rows[2].count);
  result.check(std::abs(hybrid - 33.0e6) <= 0.10 * 33.0e6,
               format("hybrid %.2fM within 10%% of 33.0M", hybrid / 1e6));
  result.check(rows[0].count < rows[1].count && rows[1].count < rows[2].count,
               "ordering series < parallel < hybrid");
  return result;
}

}  // namespace canet::verify
