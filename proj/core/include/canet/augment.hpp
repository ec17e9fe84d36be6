#pragma once

#include <array>
#include <random>

#include "canet/ops.hpp"
#include "canet/scene.hpp"

namespace canet {

struct AugmentConfig {
  double flip_prob = 0.5;
  double scale_min = 0.5;
  double scale_max = 2.0;
  int crop_h = 64;
  int crop_w = 64;
  double blur_sigma_max = 1.5;
  std::array<double, 3> pad_value{0.5, 0.5, 0.5};  ///< usually the dataset mean
  int ignore_index = kIgnoreIndex;
};

/// Random flip, rescale, crop-with-padding, then Gaussian blur of the image.
Sample augment(const Sample& in, const AugmentConfig& cfg, std::mt19937_64& rng);

Sample flip_sample(const Sample& in);
/// Bilinear for the image, nearest neighbour for the label.
Sample scale_sample(const Sample& in, double factor);
/// Window [top, top+h) x [left, left+w); pixels outside the source take the
/// pad colour and ignore_index.
Sample crop_sample(const Sample& in, int top, int left, int h, int w,
                   const std::array<double, 3>& pad_value, int ignore_index);
/// Separable normalized Gaussian with mirrored borders; sigma <= 0 is a
/// no-op.
Tensor gaussian_blur(const Tensor& image, double sigma);

}  // namespace canet
