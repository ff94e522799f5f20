#pragma once

// Dense double-precision tensors plus the handful of kernels the rest of the
// pipeline is built from: 2-D convolution (forward and backward), elementwise
// activations and bilinear resampling. Row-major layout, (channel, row, col)
// for 3-D maps. All operations are pure functions of their inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rsrcnn/rng.hpp"

namespace rsrcnn {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(count(shape)), fill);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::size_t>(count(shape)) != data.size())
      throw std::invalid_argument("Tensor: data length does not match shape");
  }

  static long long count(const std::vector<int>& s) {
    long long n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim");
      n *= d;
    }
    return n;
  }

  std::size_t size() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // (c, y, x) accessor for rank-3 tensors.
  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Deterministic parallel helper. Ranges are split statically so the work an
// index receives never depends on the thread count; only disjoint writes are
// allowed inside `fn`, keeping results identical for any number of threads.

inline int& num_threads() {
  static int n = 1;
  return n;
}
inline void set_num_threads(int n) { num_threads() = std::max(1, n); }

inline void parallel_for(int begin, int end, const std::function<void(int, int)>& fn) {
  int n = end - begin;
  int t = std::min(num_threads(), n);
  if (t <= 1 || n <= 1) {
    if (n > 0) fn(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t - 1));
  int chunk = (n + t - 1) / t;
  for (int i = 1; i < t; ++i) {
    int b = begin + i * chunk;
    int e = std::min(end, b + chunk);
    if (b < e) pool.emplace_back(fn, b, e);
  }
  fn(begin, std::min(end, begin + chunk));
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Convolution

struct ConvLayer {
  Tensor weights;  // (out_ch, in_ch, kh, kw)
  Tensor bias;     // (out_ch)
  int stride = 1;
  int padding = 0;

  ConvLayer() = default;
  ConvLayer(int out_ch, int in_ch, int kh, int kw, int stride_ = 1, int padding_ = 0)
      : weights({out_ch, in_ch, kh, kw}), bias({out_ch}), stride(stride_), padding(padding_) {
    if (stride < 1 || padding < 0) throw std::invalid_argument("ConvLayer: bad stride/padding");
  }

  int out_ch() const { return weights.dim(0); }
  int in_ch() const { return weights.dim(1); }
  int kh() const { return weights.dim(2); }
  int kw() const { return weights.dim(3); }

  long long param_count() const {
    return static_cast<long long>(weights.size() + bias.size());
  }

  void init_he_uniform(Rng& rng) {
    double fan_in = static_cast<double>(in_ch()) * kh() * kw();
    double limit = std::sqrt(6.0 / fan_in);
    for (double& w : weights.data) w = rng.uniform(-limit, limit);
    std::fill(bias.data.begin(), bias.data.end(), 0.0);
  }
};

// "Same" 3x3/1x1 helper: padding that preserves spatial dims at stride 1.
inline ConvLayer make_same_conv(int out_ch, int in_ch, int k) {
  if (k % 2 == 0) throw std::invalid_argument("make_same_conv: kernel must be odd");
  return ConvLayer(out_ch, in_ch, k, k, 1, (k - 1) / 2);
}

inline void check_conv_input(const Tensor& input, const ConvLayer& layer) {
  if (input.shape.size() != 3)
    throw std::invalid_argument("conv2d: input must be rank 3, got " + input.shape_str());
  if (input.dim(0) != layer.in_ch())
    throw std::invalid_argument("conv2d: input channels " + std::to_string(input.dim(0)) +
                                " != layer in_ch " + std::to_string(layer.in_ch()));
  int h = input.dim(1), w = input.dim(2);
  if (h + 2 * layer.padding < layer.kh() || w + 2 * layer.padding < layer.kw())
    throw std::invalid_argument("conv2d: input too small for kernel");
}

inline std::pair<int, int> conv_output_hw(const Tensor& input, const ConvLayer& layer) {
  int oh = (input.dim(1) + 2 * layer.padding - layer.kh()) / layer.stride + 1;
  int ow = (input.dim(2) + 2 * layer.padding - layer.kw()) / layer.stride + 1;
  return {oh, ow};
}

// Cross-correlation with zero padding. Accumulation order is fixed
// (ic, ky, kx in sequence per output channel), so results do not depend on
// the thread count.
inline Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
  check_conv_input(input, layer);
  auto [oh, ow] = conv_output_hw(input, layer);
  int oc_n = layer.out_ch(), ic_n = layer.in_ch();
  int kh = layer.kh(), kw = layer.kw(), s = layer.stride, p = layer.padding;
  int ih = input.dim(1), iw = input.dim(2);
  Tensor out({oc_n, oh, ow});

  parallel_for(0, oc_n, [&](int oc0, int oc1) {
    for (int oc = oc0; oc < oc1; ++oc) {
      double* out_c = &out.data[static_cast<std::size_t>(oc) * oh * ow];
      for (int i = 0; i < oh * ow; ++i) out_c[i] = layer.bias[static_cast<std::size_t>(oc)];
      for (int ic = 0; ic < ic_n; ++ic) {
        const double* in_c = &input.data[static_cast<std::size_t>(ic) * ih * iw];
        const double* w_base =
            &layer.weights.data[((static_cast<std::size_t>(oc) * ic_n + ic) * kh) * kw];
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            double wv = w_base[static_cast<std::size_t>(ky) * kw + kx];
            if (wv == 0.0) continue;
            for (int oy = 0; oy < oh; ++oy) {
              int iy = oy * s + ky - p;
              if (iy < 0 || iy >= ih) continue;
              const double* in_row = in_c + static_cast<std::size_t>(iy) * iw;
              double* out_row = out_c + static_cast<std::size_t>(oy) * ow;
              // valid ox range so that ix = ox*s + kx - p lies in [0, iw)
              int ox_lo = (kx - p < 0) ? (p - kx + s - 1) / s : 0;
              int num = iw - 1 - (kx - p);
              int ox_hi = (num < 0) ? 0 : std::min(ow, num / s + 1);
              if (s == 1) {
                const double* in_off = in_row + kx - p;
                for (int ox = ox_lo; ox < ox_hi; ++ox) out_row[ox] += wv * in_off[ox];
              } else {
                for (int ox = ox_lo; ox < ox_hi; ++ox)
                  out_row[ox] += wv * in_row[ox * s + kx - p];
              }
            }
          }
        }
      }
    }
  });
  return out;
}

struct ConvGrads {
  Tensor grad_input;
  Tensor grad_weights;
  Tensor grad_bias;
};

inline ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer,
                                 const Tensor& grad_out) {
  check_conv_input(input, layer);
  auto [oh, ow] = conv_output_hw(input, layer);
  if (grad_out.shape != std::vector<int>{layer.out_ch(), oh, ow})
    throw std::invalid_argument("conv2d_backward: grad_out shape " + grad_out.shape_str() +
                                " does not match forward output");
  int oc_n = layer.out_ch(), ic_n = layer.in_ch();
  int kh = layer.kh(), kw = layer.kw(), s = layer.stride, p = layer.padding;
  int ih = input.dim(1), iw = input.dim(2);

  ConvGrads g;
  g.grad_input = Tensor(input.shape);
  g.grad_weights = Tensor(layer.weights.shape);
  g.grad_bias = Tensor(layer.bias.shape);

  for (int oc = 0; oc < oc_n; ++oc) {
    const double* go_c = &grad_out.data[static_cast<std::size_t>(oc) * oh * ow];
    double acc = 0.0;
    for (int i = 0; i < oh * ow; ++i) acc += go_c[i];
    g.grad_bias[static_cast<std::size_t>(oc)] = acc;
  }

  // d/dW: parallel over output channels (disjoint weight slices).
  parallel_for(0, oc_n, [&](int oc0, int oc1) {
    for (int oc = oc0; oc < oc1; ++oc) {
      const double* go_c = &grad_out.data[static_cast<std::size_t>(oc) * oh * ow];
      for (int ic = 0; ic < ic_n; ++ic) {
        const double* in_c = &input.data[static_cast<std::size_t>(ic) * ih * iw];
        double* gw_base =
            &g.grad_weights.data[((static_cast<std::size_t>(oc) * ic_n + ic) * kh) * kw];
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            double acc = 0.0;
            for (int oy = 0; oy < oh; ++oy) {
              int iy = oy * s + ky - p;
              if (iy < 0 || iy >= ih) continue;
              const double* in_row = in_c + static_cast<std::size_t>(iy) * iw;
              const double* go_row = go_c + static_cast<std::size_t>(oy) * ow;
              for (int ox = 0; ox < ow; ++ox) {
                int ix = ox * s + kx - p;
                if (ix < 0 || ix >= iw) continue;
                acc += go_row[ox] * in_row[ix];
              }
            }
            gw_base[static_cast<std::size_t>(ky) * kw + kx] = acc;
          }
        }
      }
    }
  });

  // d/dInput: parallel over input channels (disjoint grad_input slices).
  parallel_for(0, ic_n, [&](int ic0, int ic1) {
    for (int ic = ic0; ic < ic1; ++ic) {
      double* gi_c = &g.grad_input.data[static_cast<std::size_t>(ic) * ih * iw];
      for (int oc = 0; oc < oc_n; ++oc) {
        const double* go_c = &grad_out.data[static_cast<std::size_t>(oc) * oh * ow];
        const double* w_base =
            &layer.weights.data[((static_cast<std::size_t>(oc) * ic_n + ic) * kh) * kw];
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            double wv = w_base[static_cast<std::size_t>(ky) * kw + kx];
            if (wv == 0.0) continue;
            for (int oy = 0; oy < oh; ++oy) {
              int iy = oy * s + ky - p;
              if (iy < 0 || iy >= ih) continue;
              double* gi_row = gi_c + static_cast<std::size_t>(iy) * iw;
              const double* go_row = go_c + static_cast<std::size_t>(oy) * ow;
              for (int ox = 0; ox < ow; ++ox) {
                int ix = ox * s + kx - p;
                if (ix < 0 || ix >= iw) continue;
                gi_row[ix] += wv * go_row[ox];
              }
            }
          }
        }
      }
    }
  });
  return g;
}

// ---------------------------------------------------------------------------
// Elementwise activations

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

inline Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  if (!x.same_shape(grad_out)) throw std::invalid_argument("relu_backward: shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (x[i] <= 0.0) g[i] = 0.0;
  return g;
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
  return y;
}

// grad w.r.t. the pre-sigmoid input, given the sigmoid output.
inline Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
  if (!y.same_shape(grad_out)) throw std::invalid_argument("sigmoid_backward: shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
  return g;
}

// ---------------------------------------------------------------------------
// Bilinear resampling. Coordinates are (row y, col x) with the origin at the
// center of pixel (0,0); out-of-range samples clamp to the border.

inline std::vector<double> bilinear_sample(const Tensor& map, double y, double x) {
  if (map.shape.size() != 3) throw std::invalid_argument("bilinear_sample: rank-3 map expected");
  int c_n = map.dim(0), h = map.dim(1), w = map.dim(2);
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  int y0 = static_cast<int>(std::floor(y));
  int x0 = static_cast<int>(std::floor(x));
  int y1 = std::min(y0 + 1, h - 1);
  int x1 = std::min(x0 + 1, w - 1);
  double fy = y - y0, fx = x - x0;
  std::vector<double> out(static_cast<std::size_t>(c_n));
  for (int c = 0; c < c_n; ++c) {
    double v00 = map.at(c, y0, x0), v01 = map.at(c, y0, x1);
    double v10 = map.at(c, y1, x0), v11 = map.at(c, y1, x1);
    out[static_cast<std::size_t>(c)] =
        v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx + v10 * fy * (1 - fx) + v11 * fy * fx;
  }
  return out;
}

// Scatter a per-channel gradient back to the 4 bilinear neighbors.
inline void bilinear_sample_backward(Tensor& grad_map, double y, double x,
                                     const std::vector<double>& grad_out) {
  int h = grad_map.dim(1), w = grad_map.dim(2);
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  int y0 = static_cast<int>(std::floor(y));
  int x0 = static_cast<int>(std::floor(x));
  int y1 = std::min(y0 + 1, h - 1);
  int x1 = std::min(x0 + 1, w - 1);
  double fy = y - y0, fx = x - x0;
  for (int c = 0; c < grad_map.dim(0); ++c) {
    double g = grad_out[static_cast<std::size_t>(c)];
    grad_map.at(c, y0, x0) += g * (1 - fy) * (1 - fx);
    grad_map.at(c, y0, x1) += g * (1 - fy) * fx;
    grad_map.at(c, y1, x0) += g * fy * (1 - fx);
    grad_map.at(c, y1, x1) += g * fy * fx;
  }
}

// Align-corners source coordinate: src = dst * (in-1)/(out-1); a single
// output sample takes the center of the input axis.
inline double align_corners_coord(int dst, int out_n, int in_n) {
  if (out_n == 1) return (in_n - 1) / 2.0;
  return static_cast<double>(dst) * (in_n - 1) / (out_n - 1);
}

inline Tensor resize_bilinear(const Tensor& map, int out_h, int out_w) {
  if (map.shape.size() != 3) throw std::invalid_argument("resize_bilinear: rank-3 map expected");
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: bad output size");
  int c_n = map.dim(0), h = map.dim(1), w = map.dim(2);
  if (out_h == h && out_w == w) return map;
  Tensor out({c_n, out_h, out_w});
  for (int oy = 0; oy < out_h; ++oy) {
    double sy = align_corners_coord(oy, out_h, h);
    for (int ox = 0; ox < out_w; ++ox) {
      double sx = align_corners_coord(ox, out_w, w);
      auto v = bilinear_sample(map, sy, sx);
      for (int c = 0; c < c_n; ++c) out.at(c, oy, ox) = v[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

// Nearest-neighbor variant on the same align-corners grid; used where values
// must stay in a discrete set (masks).
inline Tensor resize_nearest(const Tensor& map, int out_h, int out_w) {
  if (map.shape.size() != 3) throw std::invalid_argument("resize_nearest: rank-3 map expected");
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_nearest: bad output size");
  int c_n = map.dim(0), h = map.dim(1), w = map.dim(2);
  Tensor out({c_n, out_h, out_w});
  for (int oy = 0; oy < out_h; ++oy) {
    int sy = static_cast<int>(std::lround(align_corners_coord(oy, out_h, h)));
    sy = std::clamp(sy, 0, h - 1);
    for (int ox = 0; ox < out_w; ++ox) {
      int sx = static_cast<int>(std::lround(align_corners_coord(ox, out_w, w)));
      sx = std::clamp(sx, 0, w - 1);
      for (int c = 0; c < c_n; ++c) out.at(c, oy, ox) = map.at(c, sy, sx);
    }
  }
  return out;
}

}  // namespace rsrcnn
