#pragma once

// The network head: consumes the 7x7x256 patch from RoIAlign1 and produces a
// refined 2-way class probability (background, lesion) and bounding-box
// deltas. Two ReLU fully-connected layers feed two linear outputs.

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rsrcnn/boxes.hpp"
#include "rsrcnn/tensor.hpp"

namespace rsrcnn {

struct DenseLayer {
  Tensor weights;  // (out, in)
  Tensor bias;     // (out)

  DenseLayer() = default;
  DenseLayer(int out_n, int in_n) : weights({out_n, in_n}), bias({out_n}) {}

  int out_n() const { return weights.dim(0); }
  int in_n() const { return weights.dim(1); }

  void init_he_uniform(Rng& rng) {
    double limit = std::sqrt(6.0 / in_n());
    for (double& w : weights.data) w = rng.uniform(-limit, limit);
    std::fill(bias.data.begin(), bias.data.end(), 0.0);
  }

  std::vector<double> forward(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != in_n())
      throw std::invalid_argument("DenseLayer: input size mismatch");
    std::vector<double> y(static_cast<std::size_t>(out_n()));
    for (int o = 0; o < out_n(); ++o) {
      const double* w = &weights.data[static_cast<std::size_t>(o) * in_n()];
      double acc = bias[static_cast<std::size_t>(o)];
      for (int i = 0; i < in_n(); ++i) acc += w[i] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = acc;
    }
    return y;
  }

  // Accumulates parameter gradients, returns grad w.r.t. the input.
  std::vector<double> backward(const std::vector<double>& x, const std::vector<double>& grad_y,
                               Tensor& grad_w, Tensor& grad_b) const {
    std::vector<double> grad_x(x.size(), 0.0);
    for (int o = 0; o < out_n(); ++o) {
      double g = grad_y[static_cast<std::size_t>(o)];
      grad_b[static_cast<std::size_t>(o)] += g;
      const double* w = &weights.data[static_cast<std::size_t>(o) * in_n()];
      double* gw = &grad_w.data[static_cast<std::size_t>(o) * in_n()];
      for (int i = 0; i < in_n(); ++i) {
        gw[i] += g * x[static_cast<std::size_t>(i)];
        grad_x[static_cast<std::size_t>(i)] += g * w[i];
      }
    }
    return grad_x;
  }
};

constexpr int kHeadPatchSize = 7;
constexpr int kHeadChannels = 256;
constexpr int kHeadInputDim = kHeadChannels * kHeadPatchSize * kHeadPatchSize;

struct HeadWeights {
  DenseLayer fc1;
  DenseLayer fc2;
  DenseLayer cls;  // 2 logits: background, lesion
  DenseLayer box;  // 4 deltas: dy, dx, dh, dw

  explicit HeadWeights(int hidden = 256)
      : fc1(hidden, kHeadInputDim), fc2(hidden, hidden), cls(2, hidden), box(4, hidden) {}

  void init_he_uniform(Rng& rng) {
    fc1.init_he_uniform(rng);
    fc2.init_he_uniform(rng);
    cls.init_he_uniform(rng);
    box.init_he_uniform(rng);
  }
};

inline std::array<double, 2> softmax2(double a, double b) {
  double m = std::max(a, b);
  double ea = std::exp(a - m), eb = std::exp(b - m);
  double s = ea + eb;
  return {ea / s, eb / s};
}

struct HeadOutput {
  double p_lesion = 0.0;               // softmax probability of the lesion class
  std::array<double, 4> deltas{};      // dy, dx, dh, dw
  // forward cache for the backward pass
  std::vector<double> x, h1, h2;
  std::array<double, 2> cls_logits{};
  std::array<double, 2> cls_prob{};
};

inline HeadOutput head_forward(const Tensor& patch, const HeadWeights& w) {
  if (patch.shape != std::vector<int>{kHeadChannels, kHeadPatchSize, kHeadPatchSize})
    throw std::invalid_argument("head_forward: patch must be (256,7,7), got " + patch.shape_str());
  HeadOutput out;
  out.x = patch.data;
  auto a1 = w.fc1.forward(out.x);
  out.h1 = a1;
  for (double& v : out.h1) v = std::max(0.0, v);
  auto a2 = w.fc2.forward(out.h1);
  out.h2 = a2;
  for (double& v : out.h2) v = std::max(0.0, v);
  auto cl = w.cls.forward(out.h2);
  auto bx = w.box.forward(out.h2);
  out.cls_logits = {cl[0], cl[1]};
  out.cls_prob = softmax2(cl[0], cl[1]);
  out.p_lesion = out.cls_prob[1];
  out.deltas = {bx[0], bx[1], bx[2], bx[3]};
  return out;
}

inline double smooth_l1(double d) {
  double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}
inline double smooth_l1_grad(double d) {
  if (d > 1.0) return 1.0;
  if (d < -1.0) return -1.0;
  return d;
}

struct HeadGrads {
  Tensor fc1_w, fc1_b, fc2_w, fc2_b, cls_w, cls_b, box_w, box_b;
  Tensor patch;  // grad w.r.t. the input patch

  explicit HeadGrads(const HeadWeights& w)
      : fc1_w(w.fc1.weights.shape), fc1_b(w.fc1.bias.shape),
        fc2_w(w.fc2.weights.shape), fc2_b(w.fc2.bias.shape),
        cls_w(w.cls.weights.shape), cls_b(w.cls.bias.shape),
        box_w(w.box.weights.shape), box_b(w.box.bias.shape),
        patch({kHeadChannels, kHeadPatchSize, kHeadPatchSize}) {}
};

// Cross-entropy on the 2-way softmax plus smooth-L1 on the deltas (box term
// only for lesion targets). Returns the loss; gradients are accumulated into
// `grads`. box_target is ignored when target_class == 0.
inline double head_loss_backward(const HeadOutput& fwd, const HeadWeights& w, int target_class,
                                 const std::array<double, 4>& box_target, HeadGrads& grads,
                                 double* cls_loss_out = nullptr, double* box_loss_out = nullptr) {
  if (target_class != 0 && target_class != 1)
    throw std::invalid_argument("head_loss_backward: target_class must be 0 or 1");
  double cls_loss = -std::log(std::max(fwd.cls_prob[static_cast<std::size_t>(target_class)], 1e-300));
  std::vector<double> grad_cls = {fwd.cls_prob[0], fwd.cls_prob[1]};
  grad_cls[static_cast<std::size_t>(target_class)] -= 1.0;

  double box_loss = 0.0;
  std::vector<double> grad_box(4, 0.0);
  if (target_class == 1) {
    for (int i = 0; i < 4; ++i) {
      double d = fwd.deltas[static_cast<std::size_t>(i)] - box_target[static_cast<std::size_t>(i)];
      box_loss += smooth_l1(d);
      grad_box[static_cast<std::size_t>(i)] = smooth_l1_grad(d);
    }
  }
  if (cls_loss_out) *cls_loss_out = cls_loss;
  if (box_loss_out) *box_loss_out = box_loss;

  auto g_h2_cls = w.cls.backward(fwd.h2, grad_cls, grads.cls_w, grads.cls_b);
  auto g_h2_box = w.box.backward(fwd.h2, grad_box, grads.box_w, grads.box_b);
  std::vector<double> g_h2(fwd.h2.size());
  for (std::size_t i = 0; i < g_h2.size(); ++i) g_h2[i] = g_h2_cls[i] + g_h2_box[i];
  for (std::size_t i = 0; i < g_h2.size(); ++i)
    if (fwd.h2[i] <= 0.0) g_h2[i] = 0.0;

  auto g_h1 = w.fc2.backward(fwd.h1, g_h2, grads.fc2_w, grads.fc2_b);
  for (std::size_t i = 0; i < g_h1.size(); ++i)
    if (fwd.h1[i] <= 0.0) g_h1[i] = 0.0;

  auto g_x = w.fc1.backward(fwd.x, g_h1, grads.fc1_w, grads.fc1_b);
  for (std::size_t i = 0; i < g_x.size(); ++i) grads.patch[i] += g_x[i];
  return cls_loss + box_loss;
}

// Applies the head's refinement to a proposal: below the score threshold the
// ROI is discarded, otherwise the deltas move the box and the result is
// clipped to the frame.
inline std::optional<Box> refine_roi(const Box& proposal, const HeadOutput& out,
                                     double score_threshold, int img_h, int img_w) {
  if (!proposal.valid()) throw std::invalid_argument("refine_roi: degenerate proposal");
  if (out.p_lesion < score_threshold) return std::nullopt;
  Box refined = apply_box_deltas(proposal, out.deltas[0], out.deltas[1], out.deltas[2], out.deltas[3]);
  return try_clip_box(refined, img_h, img_w);
}

}  // namespace rsrcnn
