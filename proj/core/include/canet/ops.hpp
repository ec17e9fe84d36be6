#pragma once

#include <optional>
#include <vector>

#include "canet/parameter.hpp"
#include "canet/tape.hpp"
#include "canet/tensor.hpp"

namespace canet {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  int groups = 1;
};

enum class BnMode { kTrain, kEval };

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;
inline constexpr int kIgnoreIndex = 255;

// Differentiable operators. Every op records onto the tape of its first
// input and returns a handle to the new node.

/// Output extent is floor((H + 2p - d(k-1) - 1) / s) + 1. Weight shape is
/// (C_out, C_in / groups, k, k).
Var conv2d(const Var& x, const Var& weight, const std::optional<Var>& bias,
           const Conv2dOptions& opts);

/// Non-overlapping factor x factor mean pooling in ceil mode; edge windows
/// average over their true extent.
Var avg_pool2d(const Var& x, int factor);

/// (N,C,H,W) -> (N,C,1,1) spatial mean.
Var global_avg_pool(const Var& x);

/// Half-pixel-centre bilinear resize with edge clamping.
Var bilinear_upsample(const Var& x, int out_h, int out_w);

/// Per-channel normalization over (N,H,W). Train mode uses batch statistics
/// and updates `state`; eval mode uses the running statistics.
Var batch_norm(const Var& x, const Var& scale, const Var& shift,
               BatchNormState& state, BnMode mode, double eps = kBnEps,
               double momentum = kBnMomentum);

Var relu(const Var& x);
Var sigmoid(const Var& x);
/// Elementwise sum. Shapes must match, or one operand is (N,C,1,1) and is
/// broadcast over the other's spatial extent.
Var add(const Var& a, const Var& b);
/// Elementwise product with the same broadcasting rule as add().
Var mul(const Var& a, const Var& b);
Var scalar_scale(const Var& x, double s);
/// Concatenates along channels; N, H and W must agree.
Var concat_channels(const std::vector<Var>& parts);

/// Mean over non-ignored pixels of -log softmax(logits)[label]. Returns a
/// (1,1,1,1) node; 0 with zero gradient when every pixel is ignored.
Var softmax_cross_entropy(const Var& logits, const LabelMap& labels,
                          int ignore_index = kIgnoreIndex);

/// Scalar sum_i x_i * weights_i (weights are constants).
Var inner_product(const Var& x, const Tensor& weights);

// Non-differentiable tensor helpers used at inference time.

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);
Tensor flip_horizontal(const Tensor& x);
/// Softmax over the channel axis at every pixel.
Tensor softmax_channels(const Tensor& logits);
/// Channel argmax per pixel; ties resolve to the lowest class id.
LabelMap argmax_channels(const Tensor& scores);

}  // namespace canet
