#include "kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "canet/parallel.hpp"

namespace canet::kernels {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct Geometry {
  int in_c, in_h, in_w;
  int out_c, out_h, out_w;
  int k;
  int cin_g, cout_g;
  int patch;  // cin_g * k * k
  int pixels;
  bool direct_1x1;
};

Geometry make_geometry(const Tensor& x, const Tensor& w, const ConvParams& p) {
  Geometry g{};
  g.in_c = x.shape().c;
  g.in_h = x.shape().h;
  g.in_w = x.shape().w;
  g.out_c = w.shape().n;
  g.k = w.shape().h;
  g.out_h = conv_out_extent(g.in_h, g.k, p);
  g.out_w = conv_out_extent(g.in_w, g.k, p);
  g.cin_g = g.in_c / p.groups;
  g.cout_g = g.out_c / p.groups;
  g.patch = g.cin_g * g.k * g.k;
  g.pixels = g.out_h * g.out_w;
  g.direct_1x1 = g.k == 1 && p.stride == 1 && p.padding == 0;
  return g;
}

// Unfolds one group of one image into a (patch x pixels) row-major matrix.
void im2col(const double* src, const Geometry& g, const ConvParams& p,
            double* cols) {
  for (int c = 0; c < g.cin_g; ++c) {
    const double* plane = src + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        double* row =
            cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) *
                       g.pixels;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * p.stride - p.padding + ky * p.dilation;
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* line = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * p.stride - p.padding + kx * p.dilation;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? line[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const Geometry& g, const ConvParams& p,
                double* dst) {
  for (int c = 0; c < g.cin_g; ++c) {
    double* plane = dst + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const double* row =
            cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) *
                       g.pixels;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * p.stride - p.padding + ky * p.dilation;
          if (iy < 0 || iy >= g.in_h) continue;
          double* line = plane + static_cast<std::size_t>(iy) * g.in_w;
          const double* srow = row + oy * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * p.stride - p.padding + kx * p.dilation;
            if (ix >= 0 && ix < g.in_w) line[ix] += srow[ox];
          }
        }
      }
    }
  }
}

bool is_depthwise(const Geometry& g) { return g.cin_g == 1 && g.cout_g == 1; }

void depthwise_forward(const Tensor& x, const Tensor& w, const Geometry& g,
                       const ConvParams& p, Tensor& y) {
  const int batch = x.shape().n;
  parallel_for(0, batch, [&](int n) {
    for (int c = 0; c < g.out_c; ++c) {
      const double* src = x.plane(n, c);
      const double* ker = w.plane(c, 0);
      double* out = y.plane(n, c);
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          double acc = 0.0;
          for (int ky = 0; ky < g.k; ++ky) {
            const int iy = oy * p.stride - p.padding + ky * p.dilation;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < g.k; ++kx) {
              const int ix = ox * p.stride - p.padding + kx * p.dilation;
              if (ix < 0 || ix >= g.in_w) continue;
              acc += ker[ky * g.k + kx] * src[iy * g.in_w + ix];
            }
          }
          out[oy * g.out_w + ox] += acc;
        }
      }
    }
  });
}

void depthwise_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                        const Geometry& g, const ConvParams& p, Tensor* gx,
                        std::vector<Tensor>* gw_parts) {
  const int batch = x.shape().n;
  parallel_for(0, batch, [&](int n) {
    for (int c = 0; c < g.out_c; ++c) {
      const double* src = x.plane(n, c);
      const double* ker = w.plane(c, 0);
      const double* go = gy.plane(n, c);
      double* gsrc = gx ? gx->plane(n, c) : nullptr;
      double* gker = gw_parts ? (*gw_parts)[n].plane(c, 0) : nullptr;
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          const double d = go[oy * g.out_w + ox];
          for (int ky = 0; ky < g.k; ++ky) {
            const int iy = oy * p.stride - p.padding + ky * p.dilation;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < g.k; ++kx) {
              const int ix = ox * p.stride - p.padding + kx * p.dilation;
              if (ix < 0 || ix >= g.in_w) continue;
              if (gsrc) gsrc[iy * g.in_w + ix] += ker[ky * g.k + kx] * d;
              if (gker) gker[ky * g.k + kx] += src[iy * g.in_w + ix] * d;
            }
          }
        }
      }
    }
  });
}

}  // namespace

int conv_out_extent(int in, int k, const ConvParams& p) {
  return (in + 2 * p.padding - p.dilation * (k - 1) - 1) / p.stride + 1;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias,
                      const ConvParams& p) {
  const Geometry g = make_geometry(x, w, p);
  const int batch = x.shape().n;
  Tensor y(Shape{batch, g.out_c, g.out_h, g.out_w});

  if (is_depthwise(g)) {
    depthwise_forward(x, w, g, p, y);
  } else {
    parallel_for(0, batch, [&](int n) {
      std::vector<double> cols;
      if (!g.direct_1x1) {
        cols.resize(static_cast<std::size_t>(g.patch) * g.pixels);
      }
      for (int grp = 0; grp < p.groups; ++grp) {
        const double* src = x.plane(n, grp * g.cin_g);
        if (!g.direct_1x1) im2col(src, g, p, cols.data());
        ConstMapMat in(g.direct_1x1 ? src : cols.data(), g.patch, g.pixels);
        ConstMapMat ker(w.plane(grp * g.cout_g, 0), g.cout_g, g.patch);
        MapMat out(y.plane(n, grp * g.cout_g), g.cout_g, g.pixels);
        out.noalias() = ker * in;
      }
    });
  }
  if (bias != nullptr) {
    for (int n = 0; n < batch; ++n) {
      for (int c = 0; c < g.out_c; ++c) {
        double* out = y.plane(n, c);
        const double b = (*bias)[c];
        for (int i = 0; i < g.pixels; ++i) out[i] += b;
      }
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gy,
                     const ConvParams& p, Tensor* gx, Tensor* gw, Tensor* gb) {
  const Geometry g = make_geometry(x, w, p);
  const int batch = x.shape().n;

  if (gb != nullptr) {
    for (int n = 0; n < batch; ++n) {
      for (int c = 0; c < g.out_c; ++c) {
        const double* go = gy.plane(n, c);
        double s = 0.0;
        for (int i = 0; i < g.pixels; ++i) s += go[i];
        (*gb)[c] += s;
      }
    }
  }
  if (gx == nullptr && gw == nullptr) return;

  // Per-image weight-gradient partials, reduced in image order so the sum is
  // independent of the worker count.
  std::vector<Tensor> gw_parts;
  if (gw != nullptr) gw_parts.assign(batch, Tensor(w.shape()));

  if (is_depthwise(g)) {
    depthwise_backward(x, w, gy, g, p, gx, gw ? &gw_parts : nullptr);
  } else {
    parallel_for(0, batch, [&](int n) {
      std::vector<double> cols;
      std::vector<double> gcols;
      if (!g.direct_1x1) {
        cols.resize(static_cast<std::size_t>(g.patch) * g.pixels);
        gcols.resize(cols.size());
      }
      for (int grp = 0; grp < p.groups; ++grp) {
        ConstMapMat go(gy.plane(n, grp * g.cout_g), g.cout_g, g.pixels);
        if (gw != nullptr) {
          const double* src = x.plane(n, grp * g.cin_g);
          if (!g.direct_1x1) im2col(src, g, p, cols.data());
          ConstMapMat in(g.direct_1x1 ? src : cols.data(), g.patch, g.pixels);
          MapMat gk(gw_parts[n].plane(grp * g.cout_g, 0), g.cout_g, g.patch);
          gk.noalias() += go * in.transpose();
        }
        if (gx != nullptr) {
          ConstMapMat ker(w.plane(grp * g.cout_g, 0), g.cout_g, g.patch);
          if (g.direct_1x1) {
            MapMat gin(gx->plane(n, grp * g.cin_g), g.patch, g.pixels);
            gin.noalias() += ker.transpose() * go;
          } else {
            MapMat gc(gcols.data(), g.patch, g.pixels);
            gc.noalias() = ker.transpose() * go;
            col2im_add(gcols.data(), g, p, gx->plane(n, grp * g.cin_g));
          }
        }
      }
    });
  }
  if (gw != nullptr) {
    for (const Tensor& part : gw_parts) gw->add_inplace(part);
  }
}

Tensor avg_pool_forward(const Tensor& x, int factor) {
  const Shape s = x.shape();
  const int oh = ceil_div(s.h, factor);
  const int ow = ceil_div(s.w, factor);
  Tensor y(Shape{s.n, s.c, oh, ow});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.plane(n, c);
      double* dst = y.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        const int y1 = std::min(oy * factor + factor, s.h);
        for (int ox = 0; ox < ow; ++ox) {
          const int x1 = std::min(ox * factor + factor, s.w);
          // Running mean: exact on constant windows.
          double mean = 0.0;
          int count = 0;
          for (int iy = oy * factor; iy < y1; ++iy) {
            for (int ix = ox * factor; ix < x1; ++ix) {
              ++count;
              mean += (src[iy * s.w + ix] - mean) / count;
            }
          }
          dst[oy * ow + ox] = mean;
        }
      }
    }
  }
  return y;
}

void avg_pool_backward(const Tensor& gy, int factor, Tensor& gx) {
  const Shape s = gx.shape();
  const int oh = gy.shape().h;
  const int ow = gy.shape().w;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* go = gy.plane(n, c);
      double* gi = gx.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        const int y1 = std::min(oy * factor + factor, s.h);
        for (int ox = 0; ox < ow; ++ox) {
          const int x1 = std::min(ox * factor + factor, s.w);
          const int count = (y1 - oy * factor) * (x1 - ox * factor);
          const double d = go[oy * ow + ox] / count;
          for (int iy = oy * factor; iy < y1; ++iy) {
            for (int ix = ox * factor; ix < x1; ++ix) gi[iy * s.w + ix] += d;
          }
        }
      }
    }
  }
}

namespace {

struct LerpAxis {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;
};

// Half-pixel-centre sampling: src = (i + 0.5) * in / out - 0.5, clamped.
LerpAxis make_axis(int in, int out) {
  LerpAxis a;
  a.lo.resize(out);
  a.hi.resize(out);
  a.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = std::min(static_cast<int>(std::floor(src)), in - 1);
    a.lo[i] = lo;
    a.hi[i] = std::min(lo + 1, in - 1);
    a.frac[i] = src - lo;
  }
  return a;
}

}  // namespace

Tensor bilinear_forward(const Tensor& x, int out_h, int out_w) {
  const Shape s = x.shape();
  if (s.h == out_h && s.w == out_w) return x;
  const LerpAxis ay = make_axis(s.h, out_h);
  const LerpAxis ax = make_axis(s.w, out_w);
  Tensor y(Shape{s.n, s.c, out_h, out_w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = x.plane(n, c);
      double* dst = y.plane(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        const double* r0 = src + ay.lo[oy] * s.w;
        const double* r1 = src + ay.hi[oy] * s.w;
        const double fy = ay.frac[oy];
        for (int ox = 0; ox < out_w; ++ox) {
          const int x0 = ax.lo[ox];
          const int x1 = ax.hi[ox];
          const double fx = ax.frac[ox];
          // Lerp form keeps constant fields exact.
          const double top = r0[x0] + fx * (r0[x1] - r0[x0]);
          const double bot = r1[x0] + fx * (r1[x1] - r1[x0]);
          dst[oy * out_w + ox] = top + fy * (bot - top);
        }
      }
    }
  }
  return y;
}

void bilinear_backward(const Tensor& gy, Tensor& gx) {
  const Shape s = gx.shape();
  const int out_h = gy.shape().h;
  const int out_w = gy.shape().w;
  if (s.h == out_h && s.w == out_w) {
    gx.add_inplace(gy);
    return;
  }
  const LerpAxis ay = make_axis(s.h, out_h);
  const LerpAxis ax = make_axis(s.w, out_w);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* go = gy.plane(n, c);
      double* gi = gx.plane(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        const double fy = ay.frac[oy];
        double* r0 = gi + ay.lo[oy] * s.w;
        double* r1 = gi + ay.hi[oy] * s.w;
        for (int ox = 0; ox < out_w; ++ox) {
          const double d = go[oy * out_w + ox];
          const double fx = ax.frac[ox];
          const int x0 = ax.lo[ox];
          const int x1 = ax.hi[ox];
          r0[x0] += d * (1.0 - fy) * (1.0 - fx);
          r0[x1] += d * (1.0 - fy) * fx;
          r1[x0] += d * fy * (1.0 - fx);
          r1[x1] += d * fy * fx;
        }
      }
    }
  }
}

}  // namespace canet::kernels
