#include "canet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "canet/augment.hpp"
#include "canet/errors.hpp"
#include "canet/loss.hpp"
#include "canet/optimizer.hpp"

namespace canet {
namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

struct Batch {
  Tensor image;
  LabelMap label;
};

Batch stack(const std::vector<Sample>& samples) {
  const Shape s = samples.front().image.shape();
  Batch b{Tensor(Shape{static_cast<int>(samples.size()), s.c, s.h, s.w}),
          LabelMap(static_cast<int>(samples.size()), s.h, s.w)};
  const std::size_t img = s.numel();
  const std::size_t lab = static_cast<std::size_t>(s.h) * s.w;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& x = samples[i];
    if (x.image.shape() != s) {
      throw ShapeError("training samples differ in size; enable augmentation "
                       "to crop them to a common extent");
    }
    std::copy(x.image.ptr(), x.image.ptr() + img, b.image.ptr() + i * img);
    std::copy(x.label.values.begin(), x.label.values.end(),
              b.label.values.begin() + static_cast<std::ptrdiff_t>(i * lab));
  }
  return b;
}

}  // namespace

TrainResult train(CanetModel& model, const Dataset& data,
                  const TrainConfig& cfg, const std::string& config_text,
                  const LogSink& sink, const Dataset* eval_data) {
  cfg.validate();
  TrainResult result;
  auto emit = [&](std::string line) {
    if (sink) sink(line);
    result.log.push_back(std::move(line));
  };

  SgdOptimizer opt(cfg.momentum, cfg.weight_decay);
  if (cfg.total_iters == 0) {
    result.checkpoint = capture_checkpoint(model, &opt, 0, config_text);
    return result;
  }
  if (data.size() == 0) throw ConfigError("training dataset is empty");

  BnMode bn_mode = BnMode::kTrain;
  if (cfg.batch_size == 1) {
    bn_mode = BnMode::kEval;
    emit("event=warning message=batch_size_1_uses_running_bn_statistics");
  }

  AugmentConfig aug;
  aug.flip_prob = cfg.flip_prob;
  aug.scale_min = cfg.scale_min;
  aug.scale_max = cfg.scale_max;
  aug.crop_h = cfg.crop;
  aug.crop_w = cfg.crop;
  aug.blur_sigma_max = cfg.blur_sigma_max;
  aug.pad_value = data.channel_mean();

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  for (long iter = 0; iter < cfg.total_iters; ++iter) {
    std::vector<Sample> picked;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Sample& src = data.samples[order[cursor++]];
      picked.push_back(cfg.augment ? canet::augment(src, aug, rng) : src);
    }
    const Batch batch = stack(picked);

    model.graph().zero_grad();
    Tape tape;
    const CanetOutputs out =
        model.forward(tape.constant(batch.image), bn_mode, true);
    JointLoss loss;
    if (out.aux_logits) {
      loss = joint_loss(out.logits, *out.aux_logits, batch.label, cfg.lambda_aux);
    } else {
      loss.total = softmax_cross_entropy(out.logits, batch.label);
      loss.report.principal = loss.report.total = loss.total.value()[0];
    }
    if (!std::isfinite(loss.report.total)) {
      throw DivergenceError("loss became " + fmt("%g", loss.report.total) +
                            " at iteration " + std::to_string(iter));
    }
    tape.backward(loss.total);
    const double lr = poly_lr(cfg.base_lr, iter, cfg.total_iters, cfg.power);
    opt.step(model.graph(), lr);
    result.final_loss = loss.report.total;

    const long done = iter + 1;
    if (done % cfg.log_every == 0 || done == cfg.total_iters) {
      emit("event=train iter=" + std::to_string(done) + " lr=" +
           fmt("%.6e", lr) + " loss=" + fmt("%.6f", loss.report.total) +
           " principal=" + fmt("%.6f", loss.report.principal) +
           " aux=" + fmt("%.6f", loss.report.auxiliary) +
           " lambda=" + fmt("%g", loss.report.lambda));
    }
    if (cfg.eval_every > 0 &&
        (done % cfg.eval_every == 0 || done == cfg.total_iters)) {
      const EvalResult ev = evaluate(model, eval_data ? *eval_data : data,
                                     cfg.eval_scales, cfg.eval_flip);
      emit("event=eval iter=" + std::to_string(done) +
           " pa=" + fmt("%.6f", ev.pixel_accuracy) +
           " miou=" + fmt("%.6f", ev.iou.mean));
    }
  }
  result.checkpoint = capture_checkpoint(
      model, &opt, static_cast<std::uint64_t>(cfg.total_iters), config_text);
  return result;
}

Tensor tta_probabilities(const CanetModel& model, const Tensor& image,
                         const std::vector<double>& scales, bool flip) {
  if (scales.empty()) throw ConfigError("at least one inference scale is needed");
  const Shape s = image.shape();
  Tensor sum(Shape{s.n, model.num_classes(), s.h, s.w});
  int passes = 0;
  for (double scale : scales) {
    if (!(scale > 0.0)) throw ConfigError("inference scales must be positive");
    const int h = std::max(kMinInputExtent,
                           static_cast<int>(std::lround(s.h * scale)));
    const int w = std::max(kMinInputExtent,
                           static_cast<int>(std::lround(s.w * scale)));
    const Tensor scaled =
        (h == s.h && w == s.w) ? image : resize_bilinear(image, h, w);
    auto accumulate = [&](const Tensor& input, bool mirrored) {
      Tensor prob = softmax_channels(model.infer_logits(input));
      if (mirrored) prob = flip_horizontal(prob);
      if (prob.shape().h != s.h || prob.shape().w != s.w) {
        prob = resize_bilinear(prob, s.h, s.w);
      }
      sum.add_inplace(prob);
      ++passes;
    };
    accumulate(scaled, false);
    if (flip) accumulate(flip_horizontal(scaled), true);
  }
  const double inv = 1.0 / passes;
  for (double& v : sum.data()) v *= inv;
  return sum;
}

EvalResult evaluate(const CanetModel& model, const Dataset& data,
                    const std::vector<double>& scales, bool flip,
                    ClassPolicy policy) {
  EvalResult result;
  result.confusion = ConfusionMatrix(model.num_classes());
  for (const Sample& sample : data.samples) {
    const Tensor prob = tta_probabilities(model, sample.image, scales, flip);
    result.confusion.update(argmax_channels(prob), sample.label);
  }
  result.pixel_accuracy = pixel_accuracy(result.confusion);
  result.iou = mean_iou(result.confusion, policy);
  return result;
}

}  // namespace canet
