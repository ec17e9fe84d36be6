#include "canet/ops.hpp"

#include <algorithm>
#include <cmath>

#include "canet/errors.hpp"
#include "kernels.hpp"

namespace canet {
namespace {

kernels::ConvParams to_params(const Conv2dOptions& o) {
  return {o.stride, o.padding, o.dilation, o.groups};
}

// Broadcast pattern of a binary elementwise op.
enum class Broadcast { kNone, kRightChannel, kLeftChannel };

Broadcast check_binary(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::kNone;
  const bool same_nc = a.n == b.n && a.c == b.c;
  if (same_nc && b.h == 1 && b.w == 1) return Broadcast::kRightChannel;
  if (same_nc && a.h == 1 && a.w == 1) return Broadcast::kLeftChannel;
  throw ShapeError(std::string(op) + ": shapes " + a.str() + " and " +
                   b.str() + " are not broadcastable");
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const std::optional<Var>& bias,
           const Conv2dOptions& opts) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (opts.stride < 1 || opts.dilation < 1 || opts.padding < 0 ||
      opts.groups < 1) {
    throw ShapeError("conv2d: stride, dilation and groups must be >= 1");
  }
  if (xs.c % opts.groups != 0) {
    throw ShapeError("conv2d: input channels " + std::to_string(xs.c) +
                     " not divisible by groups " + std::to_string(opts.groups));
  }
  if (ws.n % opts.groups != 0) {
    throw ShapeError("conv2d: output channels " + std::to_string(ws.n) +
                     " not divisible by groups " + std::to_string(opts.groups));
  }
  if (ws.c != xs.c / opts.groups) {
    throw ShapeError("conv2d: weight dim 1 is " + std::to_string(ws.c) +
                     ", expected C_in/groups = " +
                     std::to_string(xs.c / opts.groups));
  }
  if (ws.h != ws.w) {
    throw ShapeError("conv2d: kernel must be square, got " + ws.str());
  }
  const int span = opts.dilation * (ws.h - 1) + 1;
  if (span > xs.h + 2 * opts.padding || span > xs.w + 2 * opts.padding) {
    throw ShapeError("conv2d: effective kernel extent " + std::to_string(span) +
                     " exceeds padded input " + xs.str());
  }
  if (bias && bias->value().size() != static_cast<std::size_t>(ws.n)) {
    throw ShapeError("conv2d: bias length " +
                     std::to_string(bias->value().size()) +
                     " != output channels " + std::to_string(ws.n));
  }

  const auto params = to_params(opts);
  Tensor y = kernels::conv2d_forward(x.value(), weight.value(),
                                     bias ? &bias->value() : nullptr, params);
  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return x.tape().record(
      "conv2d", inputs, std::move(y),
      [params, has_bias](Tape& t, const TapeNode& self) {
        const Tensor& xv = t.node(self.inputs[0]).value;
        const Tensor& wv = t.node(self.inputs[1]).value;
        Tensor* gx = t.grad_sink(self.inputs[0]);
        Tensor* gw = t.grad_sink(self.inputs[1]);
        Tensor* gb = has_bias ? t.grad_sink(self.inputs[2]) : nullptr;
        kernels::conv2d_backward(xv, wv, self.grad, params, gx, gw, gb);
      });
}

Var avg_pool2d(const Var& x, int factor) {
  if (factor < 1) {
    throw ShapeError("avg_pool2d: factor must be >= 1, got " +
                     std::to_string(factor));
  }
  Tensor y = kernels::avg_pool_forward(x.value(), factor);
  return x.tape().record("avg_pool2d", {x}, std::move(y),
                         [factor](Tape& t, const TapeNode& self) {
                           if (Tensor* gx = t.grad_sink(self.inputs[0])) {
                             kernels::avg_pool_backward(self.grad, factor, *gx);
                           }
                         });
}

Var global_avg_pool(const Var& x) {
  const Shape s = x.shape();
  Tensor y(Shape{s.n, s.c, 1, 1});
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.value().plane(n, c);
      double mean = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        mean += (src[i] - mean) / static_cast<double>(i + 1);
      }
      y.at(n, c, 0, 0) = mean;
    }
  }
  return x.tape().record(
      "global_avg_pool", {x}, std::move(y), [](Tape& t, const TapeNode& self) {
        Tensor* gx = t.grad_sink(self.inputs[0]);
        if (!gx) return;
        const Shape s = gx->shape();
        const double inv = 1.0 / static_cast<double>(s.plane());
        for (int n = 0; n < s.n; ++n) {
          for (int c = 0; c < s.c; ++c) {
            const double d = self.grad.at(n, c, 0, 0) * inv;
            double* gi = gx->plane(n, c);
            for (std::size_t i = 0; i < s.plane(); ++i) gi[i] += d;
          }
        }
      });
}

Var bilinear_upsample(const Var& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("bilinear_upsample: output dims must be >= 1");
  }
  Tensor y = kernels::bilinear_forward(x.value(), out_h, out_w);
  return x.tape().record("bilinear_upsample", {x}, std::move(y),
                         [](Tape& t, const TapeNode& self) {
                           if (Tensor* gx = t.grad_sink(self.inputs[0])) {
                             kernels::bilinear_backward(self.grad, *gx);
                           }
                         });
}

Var batch_norm(const Var& x, const Var& scale, const Var& shift,
               BatchNormState& state, BnMode mode, double eps,
               double momentum) {
  const Shape s = x.shape();
  const std::size_t channels = static_cast<std::size_t>(s.c);
  if (scale.value().size() != channels || shift.value().size() != channels ||
      state.running_mean.size() != channels ||
      state.running_var.size() != channels) {
    throw ShapeError("batch_norm: channel count " + std::to_string(s.c) +
                     " does not match parameters of '" + state.name + "'");
  }
  const double count = static_cast<double>(s.n) * s.plane();
  std::vector<double> mean(channels), inv_std(channels);

  if (mode == BnMode::kTrain) {
    for (int c = 0; c < s.c; ++c) {
      double sum = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.value().plane(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
      }
      const double mu = sum / count;
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.value().plane(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) {
          sq += (p[i] - mu) * (p[i] - mu);
        }
      }
      const double var = sq / count;
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + eps);
      // The running variance tracks the same biased estimate used for
      // normalization, so eval mode reproduces a converged train-mode pass.
      state.running_mean[c] =
          (1.0 - momentum) * state.running_mean[c] + momentum * mu;
      state.running_var[c] =
          (1.0 - momentum) * state.running_var[c] + momentum * var;
    }
  } else {
    for (int c = 0; c < s.c; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
    }
  }

  Tensor y(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double g = scale.value()[c] * inv_std[c];
      const double b = shift.value()[c] - mean[c] * g;
      const double* p = x.value().plane(n, c);
      double* q = y.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) q[i] = p[i] * g + b;
    }
  }

  const bool train = mode == BnMode::kTrain;
  return x.tape().record(
      "batch_norm", {x, scale, shift}, std::move(y),
      [mean = std::move(mean), inv_std = std::move(inv_std), train, count](
          Tape& t, const TapeNode& self) {
        const Tensor& xv = t.node(self.inputs[0]).value;
        const Tensor& gamma = t.node(self.inputs[1]).value;
        Tensor* gx = t.grad_sink(self.inputs[0]);
        Tensor* gscale = t.grad_sink(self.inputs[1]);
        Tensor* gshift = t.grad_sink(self.inputs[2]);
        const Shape s = xv.shape();
        for (int c = 0; c < s.c; ++c) {
          double sum_dy = 0.0;
          double sum_dy_xhat = 0.0;
          for (int n = 0; n < s.n; ++n) {
            const double* p = xv.plane(n, c);
            const double* d = self.grad.plane(n, c);
            for (std::size_t i = 0; i < s.plane(); ++i) {
              sum_dy += d[i];
              sum_dy_xhat += d[i] * (p[i] - mean[c]) * inv_std[c];
            }
          }
          if (gscale) (*gscale)[c] += sum_dy_xhat;
          if (gshift) (*gshift)[c] += sum_dy;
          if (!gx) continue;
          const double g = gamma[c] * inv_std[c];
          for (int n = 0; n < s.n; ++n) {
            const double* p = xv.plane(n, c);
            const double* d = self.grad.plane(n, c);
            double* q = gx->plane(n, c);
            for (std::size_t i = 0; i < s.plane(); ++i) {
              if (train) {
                const double xhat = (p[i] - mean[c]) * inv_std[c];
                q[i] += g * (d[i] - sum_dy / count - xhat * sum_dy_xhat / count);
              } else {
                q[i] += g * d[i];
              }
            }
          }
        }
      });
}

Var relu(const Var& x) {
  Tensor y = x.value();
  for (double& v : y.data()) v = v < 0.0 ? 0.0 : v;  // NaN propagates
  return x.tape().record(
      "relu", {x}, std::move(y), [](Tape& t, const TapeNode& self) {
        Tensor* gx = t.grad_sink(self.inputs[0]);
        if (!gx) return;
        const Tensor& out = self.value;
        for (std::size_t i = 0; i < out.size(); ++i) {
          if (out[i] > 0.0) (*gx)[i] += self.grad[i];
        }
      });
}

Var sigmoid(const Var& x) {
  Tensor y = x.value();
  for (double& v : y.data()) v = 1.0 / (1.0 + std::exp(-v));
  return x.tape().record(
      "sigmoid", {x}, std::move(y), [](Tape& t, const TapeNode& self) {
        Tensor* gx = t.grad_sink(self.inputs[0]);
        if (!gx) return;
        const Tensor& out = self.value;
        for (std::size_t i = 0; i < out.size(); ++i) {
          (*gx)[i] += self.grad[i] * out[i] * (1.0 - out[i]);
        }
      });
}

namespace {

// Applies fn(big_index, small_index) over the broadcast pairing where the
// (N,C,1,1) operand is indexed per plane.
template <typename Fn>
void for_each_broadcast(const Shape& big, Fn&& fn) {
  const std::size_t plane = big.plane();
  std::size_t k = 0;
  for (std::size_t p = 0; p < static_cast<std::size_t>(big.n) * big.c; ++p) {
    for (std::size_t i = 0; i < plane; ++i, ++k) fn(k, p);
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  const Broadcast bc = check_binary("add", a.shape(), b.shape());
  const Var& big = bc == Broadcast::kLeftChannel ? b : a;
  const Var& small = bc == Broadcast::kLeftChannel ? a : b;
  Tensor y = big.value();
  if (bc == Broadcast::kNone) {
    y.add_inplace(small.value());
  } else {
    for_each_broadcast(y.shape(), [&](std::size_t k, std::size_t p) {
      y[k] += small.value()[p];
    });
  }
  return a.tape().record(
      "add", {big, small}, std::move(y), [bc](Tape& t, const TapeNode& self) {
        if (Tensor* gbig = t.grad_sink(self.inputs[0])) {
          gbig->add_inplace(self.grad);
        }
        if (Tensor* gsmall = t.grad_sink(self.inputs[1])) {
          if (bc == Broadcast::kNone) {
            gsmall->add_inplace(self.grad);
          } else {
            for_each_broadcast(self.grad.shape(),
                               [&](std::size_t k, std::size_t p) {
                                 (*gsmall)[p] += self.grad[k];
                               });
          }
        }
      });
}

Var mul(const Var& a, const Var& b) {
  const Broadcast bc = check_binary("mul", a.shape(), b.shape());
  const Var& big = bc == Broadcast::kLeftChannel ? b : a;
  const Var& small = bc == Broadcast::kLeftChannel ? a : b;
  Tensor y = big.value();
  if (bc == Broadcast::kNone) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= small.value()[i];
  } else {
    for_each_broadcast(y.shape(), [&](std::size_t k, std::size_t p) {
      y[k] *= small.value()[p];
    });
  }
  return a.tape().record(
      "mul", {big, small}, std::move(y), [bc](Tape& t, const TapeNode& self) {
        const Tensor& bv = t.node(self.inputs[0]).value;
        const Tensor& sv = t.node(self.inputs[1]).value;
        Tensor* gbig = t.grad_sink(self.inputs[0]);
        Tensor* gsmall = t.grad_sink(self.inputs[1]);
        if (bc == Broadcast::kNone) {
          for (std::size_t i = 0; i < bv.size(); ++i) {
            if (gbig) (*gbig)[i] += self.grad[i] * sv[i];
            if (gsmall) (*gsmall)[i] += self.grad[i] * bv[i];
          }
        } else {
          for_each_broadcast(bv.shape(), [&](std::size_t k, std::size_t p) {
            if (gbig) (*gbig)[k] += self.grad[k] * sv[p];
            if (gsmall) (*gsmall)[p] += self.grad[k] * bv[k];
          });
        }
      });
}

Var scalar_scale(const Var& x, double s) {
  Tensor y = x.value();
  for (double& v : y.data()) v *= s;
  return x.tape().record("scalar_scale", {x}, std::move(y),
                         [s](Tape& t, const TapeNode& self) {
                           Tensor* gx = t.grad_sink(self.inputs[0]);
                           if (!gx) return;
                           for (std::size_t i = 0; i < gx->size(); ++i) {
                             (*gx)[i] += s * self.grad[i];
                           }
                         });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape first = parts.front().shape();
  int channels = 0;
  for (const Var& p : parts) {
    const Shape s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " does not match " +
                       first.str() + " in N, H or W");
    }
    channels += s.c;
  }
  Tensor y(Shape{first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  for (int n = 0; n < first.n; ++n) {
    int offset = 0;
    for (const Var& p : parts) {
      const Tensor& v = p.value();
      std::copy_n(v.plane(n, 0), v.shape().c * plane, y.plane(n, offset));
      offset += v.shape().c;
    }
  }
  return parts.front().tape().record(
      "concat_channels", parts, std::move(y),
      [](Tape& t, const TapeNode& self) {
        const Shape s = self.value.shape();
        int offset = 0;
        for (int in : self.inputs) {
          const int c = t.node(in).value.shape().c;
          if (Tensor* g = t.grad_sink(in)) {
            for (int n = 0; n < s.n; ++n) {
              const double* src = self.grad.plane(n, offset);
              double* dst = g->plane(n, 0);
              for (std::size_t i = 0; i < c * s.plane(); ++i) dst[i] += src[i];
            }
          }
          offset += c;
        }
      });
}

Var softmax_cross_entropy(const Var& logits, const LabelMap& labels,
                          int ignore_index) {
  const Shape s = logits.shape();
  if (labels.n != s.n || labels.h != s.h || labels.w != s.w) {
    throw ShapeError("softmax_cross_entropy: labels (" +
                     std::to_string(labels.n) + "," + std::to_string(labels.h) +
                     "," + std::to_string(labels.w) + ") vs logits " + s.str());
  }
  const Tensor& z = logits.value();
  const std::size_t plane = s.plane();
  // Softmax probabilities are cached for the backward rule.
  Tensor prob(s);
  double total = 0.0;
  std::size_t valid = 0;
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      const int label = labels.values[n * plane + i];
      if (label == ignore_index) continue;
      if (label < 0 || label >= s.c) {
        throw ShapeError("softmax_cross_entropy: label " +
                         std::to_string(label) + " outside [0," +
                         std::to_string(s.c) + ")");
      }
      double zmax = z.plane(n, 0)[i];
      for (int c = 1; c < s.c; ++c) zmax = std::max(zmax, z.plane(n, c)[i]);
      double denom = 0.0;
      for (int c = 0; c < s.c; ++c) {
        const double e = std::exp(z.plane(n, c)[i] - zmax);
        prob.plane(n, c)[i] = e;
        denom += e;
      }
      for (int c = 0; c < s.c; ++c) prob.plane(n, c)[i] /= denom;
      total += std::log(denom) - (z.plane(n, label)[i] - zmax);
      ++valid;
    }
  }
  const double loss = valid > 0 ? total / static_cast<double>(valid) : 0.0;
  return logits.tape().record(
      "softmax_cross_entropy", {logits}, Tensor(Shape{1, 1, 1, 1}, loss),
      [prob = std::move(prob), labels, ignore_index, valid](
          Tape& t, const TapeNode& self) {
        Tensor* gz = t.grad_sink(self.inputs[0]);
        if (!gz || valid == 0) return;
        const Shape s = prob.shape();
        const std::size_t plane = s.plane();
        const double scale = self.grad[0] / static_cast<double>(valid);
        for (int n = 0; n < s.n; ++n) {
          for (std::size_t i = 0; i < plane; ++i) {
            const int label = labels.values[n * plane + i];
            if (label == ignore_index) continue;
            for (int c = 0; c < s.c; ++c) {
              const double target = c == label ? 1.0 : 0.0;
              gz->plane(n, c)[i] += scale * (prob.plane(n, c)[i] - target);
            }
          }
        }
      });
}

Var inner_product(const Var& x, const Tensor& weights) {
  if (weights.shape() != x.shape()) {
    throw ShapeError("inner_product: " + weights.shape().str() + " vs " +
                     x.shape().str());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * x.value()[i];
  return x.tape().record("inner_product", {x}, Tensor(Shape{1, 1, 1, 1}, s),
                         [weights](Tape& t, const TapeNode& self) {
                           Tensor* gx = t.grad_sink(self.inputs[0]);
                           if (!gx) return;
                           for (std::size_t i = 0; i < weights.size(); ++i) {
                             (*gx)[i] += self.grad[0] * weights[i];
                           }
                         });
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("resize_bilinear: output dims must be >= 1");
  }
  return kernels::bilinear_forward(x, out_h, out_w);
}

Tensor flip_horizontal(const Tensor& x) {
  Tensor y(x.shape());
  const Shape s = x.shape();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int h = 0; h < s.h; ++h) {
        for (int w = 0; w < s.w; ++w) y.at(n, c, h, s.w - 1 - w) = x.at(n, c, h, w);
      }
    }
  }
  return y;
}

Tensor softmax_channels(const Tensor& logits) {
  const Shape s = logits.shape();
  Tensor p(s);
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < s.plane(); ++i) {
      double zmax = logits.plane(n, 0)[i];
      for (int c = 1; c < s.c; ++c) zmax = std::max(zmax, logits.plane(n, c)[i]);
      double denom = 0.0;
      for (int c = 0; c < s.c; ++c) {
        const double e = std::exp(logits.plane(n, c)[i] - zmax);
        p.plane(n, c)[i] = e;
        denom += e;
      }
      for (int c = 0; c < s.c; ++c) p.plane(n, c)[i] /= denom;
    }
  }
  return p;
}

LabelMap argmax_channels(const Tensor& scores) {
  const Shape s = scores.shape();
  LabelMap out(s.n, s.h, s.w);
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < s.plane(); ++i) {
      int best = 0;
      double best_v = scores.plane(n, 0)[i];
      for (int c = 1; c < s.c; ++c) {
        if (scores.plane(n, c)[i] > best_v) {
          best_v = scores.plane(n, c)[i];
          best = c;
        }
      }
      out.values[n * s.plane() + i] = best;
    }
  }
  return out;
}

}  // namespace canet
