#pragma once

// Raw forward/backward kernels on plain tensors. The differentiable wrappers
// in ops.cpp own shape validation; these assume valid arguments.

#include "canet/tensor.hpp"

namespace canet::kernels {

struct ConvParams {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  int groups = 1;
};

int conv_out_extent(int in, int k, const ConvParams& p);

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias,
                      const ConvParams& p);
/// Any of gx/gw/gb may be null. Gradients are accumulated, not assigned.
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                     const ConvParams& p, Tensor* gx, Tensor* gw, Tensor* gb);

Tensor avg_pool_forward(const Tensor& x, int factor);
void avg_pool_backward(const Tensor& gy, int factor, Tensor& gx);

Tensor bilinear_forward(const Tensor& x, int out_h, int out_w);
void bilinear_backward(const Tensor& gy, Tensor& gx);

}  // namespace canet::kernels
