#pragma once

// The lightweight segmentation head: two 3x3 same-padded convolutions with
// ReLU and a 1x1 convolution with sigmoid, mapping an NxNx256 RoIAlign2 patch
// to an NxN probability map. 1,180,417 parameters in the canonical
// configuration, against 2,622,977 for the reference mask head it replaces.

#include <cmath>
#include <stdexcept>

#include "rsrcnn/tensor.hpp"

namespace rsrcnn {

struct LrsWeights {
  ConvLayer conv1;  // 256 -> 256, 3x3, same padding
  ConvLayer conv2;  // 256 -> 256, 3x3, same padding
  ConvLayer conv3;  // 256 -> 1, 1x1

  LrsWeights()
      : conv1(make_same_conv(256, 256, 3)),
        conv2(make_same_conv(256, 256, 3)),
        conv3(1, 256, 1, 1, 1, 0) {}

  void init_he_uniform(Rng& rng) {
    conv1.init_he_uniform(rng);
    conv2.init_he_uniform(rng);
    conv3.init_he_uniform(rng);
  }
};

inline long long param_count(const LrsWeights& w) {
  return w.conv1.param_count() + w.conv2.param_count() + w.conv3.param_count();
}

// Parameter count of the mask head this replaces: four 3x3 256->256 convs, a
// 2x2 256->256 transpose conv and a 1x1 256->1 conv, all with biases.
inline long long mask_rcnn_reference_head_param_count() {
  long long conv3x3 = 3LL * 3 * 256 * 256 + 256;
  long long deconv2x2 = 2LL * 2 * 256 * 256 + 256;
  long long conv1x1 = 1LL * 1 * 256 * 1 + 1;
  return 4 * conv3x3 + deconv2x2 + conv1x1;
}

struct LrsForward {
  Tensor prob;  // (1, N, N), values in (0,1)
  // caches for the backward pass
  Tensor x, a1, r1, a2, r2;
};

inline LrsForward lrs_forward_cached(const Tensor& patch, const LrsWeights& w) {
  if (patch.shape.size() != 3 || patch.dim(0) != 256 || patch.dim(1) != patch.dim(2))
    throw std::invalid_argument("lrs_forward: patch must be (256,N,N), got " + patch.shape_str());
  LrsForward f;
  f.x = patch;
  f.a1 = conv2d_forward(patch, w.conv1);
  f.r1 = relu(f.a1);
  f.a2 = conv2d_forward(f.r1, w.conv2);
  f.r2 = relu(f.a2);
  Tensor logits = conv2d_forward(f.r2, w.conv3);
  f.prob = sigmoid(logits);
  return f;
}

// expected_n guards against a patch that disagrees with the configured
// expansion factor (N = R(14k)).
inline Tensor lrs_forward(const Tensor& patch, const LrsWeights& w, int expected_n = -1) {
  if (expected_n > 0 && (patch.dim(1) != expected_n || patch.dim(2) != expected_n))
    throw std::invalid_argument("lrs_forward: patch is " + patch.shape_str() +
                                " but configured N is " + std::to_string(expected_n));
  return lrs_forward_cached(patch, w).prob;
}

// Mean over pixels of -[t log p + (1-t) log(1-p)], p clamped to
// [1e-12, 1-1e-12].
inline double mask_bce_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target))
    throw std::invalid_argument("mask_bce_loss: shape mismatch " + pred.shape_str() + " vs " +
                                target.shape_str());
  constexpr double eps = 1e-12;
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double p = std::clamp(pred[i], eps, 1.0 - eps);
    double t = target[i];
    acc += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  return acc / static_cast<double>(pred.size());
}

// d(mean BCE)/d(pred); the clamp zeroes the gradient outside its interval.
inline Tensor mask_bce_loss_grad(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("mask_bce_loss_grad: shape mismatch");
  constexpr double eps = 1e-12;
  Tensor g(pred.shape);
  double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < eps || pred[i] > 1.0 - eps) continue;
    double p = pred[i], t = target[i];
    g[i] = (p - t) / (p * (1.0 - p)) * inv_n;
  }
  return g;
}

struct LrsGrads {
  Tensor conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b;
  Tensor patch;

  explicit LrsGrads(const LrsWeights& w, const std::vector<int>& patch_shape)
      : conv1_w(w.conv1.weights.shape), conv1_b(w.conv1.bias.shape),
        conv2_w(w.conv2.weights.shape), conv2_b(w.conv2.bias.shape),
        conv3_w(w.conv3.weights.shape), conv3_b(w.conv3.bias.shape),
        patch(patch_shape) {}
};

// Backprop of mask BCE through the three layers. Returns the loss; gradients
// accumulate into `grads`.
inline double lrs_backward(const LrsForward& f, const LrsWeights& w, const Tensor& target,
                           LrsGrads& grads) {
  double loss = mask_bce_loss(f.prob, target);
  // BCE + sigmoid combine to (p - t) / n on the logits
  Tensor g_logits(f.prob.shape);
  double inv_n = 1.0 / static_cast<double>(f.prob.size());
  for (std::size_t i = 0; i < f.prob.size(); ++i)
    g_logits[i] = (f.prob[i] - target[i]) * inv_n;

  auto g3 = conv2d_backward(f.r2, w.conv3, g_logits);
  for (std::size_t i = 0; i < grads.conv3_w.size(); ++i) grads.conv3_w[i] += g3.grad_weights[i];
  for (std::size_t i = 0; i < grads.conv3_b.size(); ++i) grads.conv3_b[i] += g3.grad_bias[i];

  Tensor g_r2 = relu_backward(f.a2, g3.grad_input);
  auto g2 = conv2d_backward(f.r1, w.conv2, g_r2);
  for (std::size_t i = 0; i < grads.conv2_w.size(); ++i) grads.conv2_w[i] += g2.grad_weights[i];
  for (std::size_t i = 0; i < grads.conv2_b.size(); ++i) grads.conv2_b[i] += g2.grad_bias[i];

  Tensor g_r1 = relu_backward(f.a1, g2.grad_input);
  auto g1 = conv2d_backward(f.x, w.conv1, g_r1);
  for (std::size_t i = 0; i < grads.conv1_w.size(); ++i) grads.conv1_w[i] += g1.grad_weights[i];
  for (std::size_t i = 0; i < grads.conv1_b.size(); ++i) grads.conv1_b[i] += g1.grad_bias[i];
  for (std::size_t i = 0; i < grads.patch.size(); ++i) grads.patch[i] += g1.grad_input[i];
  return loss;
}

}  // namespace rsrcnn
