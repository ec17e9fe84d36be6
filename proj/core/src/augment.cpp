#include "canet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace canet {
namespace {

int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Sample flip_sample(const Sample& in) {
  Sample out{flip_horizontal(in.image), in.label};
  const int w = in.label.w;
  for (int n = 0; n < in.label.n; ++n) {
    for (int y = 0; y < in.label.h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.label.at(n, y, w - 1 - x) = in.label.at(n, y, x);
      }
    }
  }
  return out;
}

Sample scale_sample(const Sample& in, double factor) {
  const int h = in.label.h;
  const int w = in.label.w;
  const int nh = std::max(1, static_cast<int>(std::lround(h * factor)));
  const int nw = std::max(1, static_cast<int>(std::lround(w * factor)));
  Sample out{resize_bilinear(in.image, nh, nw), LabelMap(in.label.n, nh, nw)};
  for (int n = 0; n < in.label.n; ++n) {
    for (int y = 0; y < nh; ++y) {
      const int sy = std::min(h - 1, static_cast<int>((y + 0.5) * h / nh));
      for (int x = 0; x < nw; ++x) {
        const int sx = std::min(w - 1, static_cast<int>((x + 0.5) * w / nw));
        out.label.at(n, y, x) = in.label.at(n, sy, sx);
      }
    }
  }
  return out;
}

Sample crop_sample(const Sample& in, int top, int left, int h, int w,
                   const std::array<double, 3>& pad_value, int ignore_index) {
  const Shape s = in.image.shape();
  Sample out{Tensor(Shape{s.n, s.c, h, w}), LabelMap(s.n, h, w, ignore_index)};
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < h; ++y) {
      const int sy = top + y;
      for (int x = 0; x < w; ++x) {
        const int sx = left + x;
        const bool inside = sy >= 0 && sy < s.h && sx >= 0 && sx < s.w;
        for (int c = 0; c < s.c; ++c) {
          out.image.at(n, c, y, x) =
              inside ? in.image.at(n, c, sy, sx) : pad_value[c % 3];
        }
        if (inside) out.label.at(n, y, x) = in.label.at(n, sy, sx);
      }
    }
  }
  return out;
}

Tensor gaussian_blur(const Tensor& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const Shape s = image.shape();
  Tensor tmp(s);
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = image.plane(n, c);
      double* mid = tmp.plane(n, c);
      double* dst = out.plane(n, c);
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            acc += kernel[k + radius] * src[y * s.w + mirror(x + k, s.w)];
          }
          mid[y * s.w + x] = acc;
        }
      }
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            acc += kernel[k + radius] * mid[mirror(y + k, s.h) * s.w + x];
          }
          dst[y * s.w + x] = acc;
        }
      }
    }
  }
  return out;
}

Sample augment(const Sample& in, const AugmentConfig& cfg,
               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Sample s = unit(rng) < cfg.flip_prob ? flip_sample(in) : in;

  const double factor =
      cfg.scale_min + (cfg.scale_max - cfg.scale_min) * unit(rng);
  if (factor != 1.0) s = scale_sample(s, factor);

  const int h = s.label.h;
  const int w = s.label.w;
  auto offset = [&](int extent, int crop) {
    const int lo = std::min(0, extent - crop);
    const int hi = std::max(0, extent - crop);
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  const int top = offset(h, cfg.crop_h);
  const int left = offset(w, cfg.crop_w);
  if (top != 0 || left != 0 || h != cfg.crop_h || w != cfg.crop_w) {
    s = crop_sample(s, top, left, cfg.crop_h, cfg.crop_w, cfg.pad_value,
                    cfg.ignore_index);
  }

  const double sigma = cfg.blur_sigma_max * unit(rng);
  s.image = gaussian_blur(s.image, sigma);
  return s;
}

}  // namespace canet
