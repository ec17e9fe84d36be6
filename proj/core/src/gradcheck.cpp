#include "canet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "canet/errors.hpp"

namespace canet {
namespace {

struct Probe {
  double loss = 0.0;
  std::vector<bool> relu_active;  ///< sign of every ReLU input, tape order
};

Probe evaluate(const LossBuilder& build) {
  Tape tape;
  Probe out;
  out.loss = build(tape).value()[0];
  for (const TapeNode& n : tape.nodes()) {
    if (n.op != "relu") continue;
    const Tensor& in = tape.node(n.inputs[0]).value;
    for (double v : in.data()) out.relu_active.push_back(v > 0.0);
  }
  return out;
}

}  // namespace

double GradCheckReport::max_rel_error() const {
  const GradCheckEntry* w = worst();
  return w ? w->rel_error : 0.0;
}

const GradCheckEntry* GradCheckReport::worst() const {
  const GradCheckEntry* out = nullptr;
  for (const auto& e : entries) {
    if (out == nullptr || e.rel_error > out->rel_error) out = &e;
  }
  return out;
}

GradCheckReport check_gradients(const LossBuilder& build,
                                const std::vector<Parameter*>& params,
                                const GradCheckOptions& opts) {
  if (params.empty()) throw ShapeError("check_gradients needs parameters");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    const Var loss = build(tape);
    tape.backward(loss);
  }
  const Probe base = evaluate(build);

  GradCheckReport report;
  auto probe = [&](Parameter& param, std::size_t i) {
    const double w = param.value[i];
    const double h = opts.step * std::max(1.0, std::abs(w));
    param.value[i] = w + h;
    const Probe up = evaluate(build);
    param.value[i] = w - h;
    const Probe down = evaluate(build);
    param.value[i] = w;
    if (up.relu_active != base.relu_active ||
        down.relu_active != base.relu_active) {
      ++report.kink_straddles;
      return false;
    }
    GradCheckEntry e;
    e.param = param.name;
    e.index = i;
    e.analytic = param.grad[i];
    e.numeric = (up.loss - down.loss) / (2.0 * h);
    const double denom =
        std::max({std::abs(e.analytic), std::abs(e.numeric), opts.floor});
    e.rel_error = std::abs(e.analytic - e.numeric) / denom;
    report.entries.push_back(std::move(e));
    return true;
  };

  if (opts.samples == 0) {
    for (Parameter* p : params) {
      for (std::size_t i = 0; i < p->numel(); ++i) probe(*p, i);
    }
    return report;
  }
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
  // A stencil that crosses a ReLU kink measures a chord, not a derivative;
  // such probes are replaced by fresh draws, up to a bounded number.
  const std::size_t max_attempts = 4 * opts.samples;
  for (std::size_t attempt = 0;
       report.entries.size() < opts.samples && attempt < max_attempts;
       ++attempt) {
    Parameter& p = *params[pick(rng)];
    std::uniform_int_distribution<std::size_t> elem(0, p.numel() - 1);
    probe(p, elem(rng));
  }
  return report;
}

}  // namespace canet
