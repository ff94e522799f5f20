#pragma once

// Densely connected CRF refinement of a probability map via synchronous
// mean-field updates with Gaussian edge potentials (a bilateral
// appearance kernel and a spatial smoothness kernel, Potts compatibility).
// Runs per-ROI on the NxN patch paired with the resized image crop.
//
// The brute-force message pass accumulates each (left, right) neighbor pair
// as one commutative sum in a mirror-invariant order, which makes the update
// bitwise equivariant to horizontal flips.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rsrcnn/tensor.hpp"

namespace rsrcnn {

struct CrfParams {
  double w_app = 0.0;        // bilateral (appearance) kernel weight
  double w_smooth = 0.0;     // smoothness kernel weight
  double theta_alpha = 8.0;  // bilateral spatial bandwidth, px
  double theta_beta = 0.2;   // bilateral intensity bandwidth, normalized units
  double theta_gamma = 3.0;  // smoothness spatial bandwidth, px
  int iterations = 5;
  double eps = 1e-8;         // unary clamp

  void validate() const {
    if (w_app < 0 || w_smooth < 0 || theta_alpha <= 0 || theta_beta <= 0 || theta_gamma <= 0 ||
        iterations < 0 || eps <= 0)
      throw std::invalid_argument("CrfParams: bandwidths must be positive, weights non-negative");
  }
};

// Per-pixel marginals over {background, lesion}.
struct LabelField {
  Tensor q;  // (2, H, W)

  bool valid(double tol = 1e-9) const {
    if (q.shape.size() != 3 || q.dim(0) != 2) return false;
    for (int y = 0; y < q.dim(1); ++y)
      for (int x = 0; x < q.dim(2); ++x) {
        double a = q.at(0, y, x), b = q.at(1, y, x);
        if (a < 0 || b < 0 || std::abs(a + b - 1.0) > tol) return false;
      }
    return true;
  }
};

// u(lesion) = -log(clamp(p, eps, 1-eps)), u(background) likewise on 1-p.
inline Tensor unary_from_prob(const Tensor& prob, double eps) {
  if (prob.shape.size() != 3 || prob.dim(0) != 1)
    throw std::invalid_argument("unary_from_prob: prob must be (1,H,W)");
  int h = prob.dim(1), w = prob.dim(2);
  Tensor u({2, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double p = prob.at(0, y, x);
      u.at(1, y, x) = -std::log(std::clamp(p, eps, 1.0 - eps));
      u.at(0, y, x) = -std::log(std::clamp(1.0 - p, eps, 1.0 - eps));
    }
  return u;
}

struct KernelSpec {
  bool bilateral = false;      // include the intensity term
  double theta_spatial = 3.0;  // theta_gamma (smoothness) or theta_alpha (bilateral)
  double theta_intensity = 0.2;
};

constexpr int kBruteForceMaxPixels = 64 * 64;

// Exact dense Gaussian message passing, O((HW)^2): out_i = sum_{j != i}
// k(f_i, f_j) field_j per label channel. `image` is required for bilateral
// kernels and must be (1,H,W).
inline Tensor pairwise_filter_bruteforce(const Tensor& field, const Tensor* image,
                                         const KernelSpec& spec) {
  if (field.shape.size() != 3) throw std::invalid_argument("pairwise_filter: rank-3 field expected");
  int labels = field.dim(0), h = field.dim(1), w = field.dim(2);
  if (h * w > kBruteForceMaxPixels)
    throw std::invalid_argument("pairwise_filter_bruteforce: field larger than 64x64");
  if (spec.bilateral && (image == nullptr || image->dim(1) != h || image->dim(2) != w))
    throw std::invalid_argument("pairwise_filter: bilateral kernel needs a matching image");
  double inv2s = 1.0 / (2.0 * spec.theta_spatial * spec.theta_spatial);
  double inv2i = spec.bilateral ? 1.0 / (2.0 * spec.theta_intensity * spec.theta_intensity) : 0.0;

  Tensor out({labels, h, w});
  std::vector<double> acc(static_cast<std::size_t>(labels));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double ii = spec.bilateral ? image->at(0, y, x) : 0.0;
      for (double& a : acc) a = 0.0;
      for (int jy = 0; jy < h; ++jy) {
        double dy2 = static_cast<double>(jy - y) * (jy - y);
        for (int adx = 0; adx < w; ++adx) {
          double d2 = dy2 + static_cast<double>(adx) * adx;
          if (adx == 0) {
            if (jy == y) continue;  // no self message
            double k = std::exp(-d2 * inv2s);
            if (spec.bilateral) {
              double di = ii - image->at(0, jy, x);
              k *= std::exp(-di * di * inv2i);
            }
            for (int l = 0; l < labels; ++l)
              acc[static_cast<std::size_t>(l)] += k * field.at(l, jy, x);
            continue;
          }
          int xl = x - adx, xr = x + adx;
          bool has_l = xl >= 0, has_r = xr < w;
          if (!has_l && !has_r) continue;
          double ks = std::exp(-d2 * inv2s);
          double kl = 0.0, kr = 0.0;
          if (has_l) {
            kl = ks;
            if (spec.bilateral) {
              double di = ii - image->at(0, jy, xl);
              kl *= std::exp(-di * di * inv2i);
            }
          }
          if (has_r) {
            kr = ks;
            if (spec.bilateral) {
              double di = ii - image->at(0, jy, xr);
              kr *= std::exp(-di * di * inv2i);
            }
          }
          for (int l = 0; l < labels; ++l) {
            // one commutative pair-sum keeps horizontal-flip equivariance exact
            if (has_l && has_r)
              acc[static_cast<std::size_t>(l)] += kl * field.at(l, jy, xl) + kr * field.at(l, jy, xr);
            else if (has_l)
              acc[static_cast<std::size_t>(l)] += kl * field.at(l, jy, xl);
            else
              acc[static_cast<std::size_t>(l)] += kr * field.at(l, jy, xr);
          }
        }
      }
      for (int l = 0; l < labels; ++l) out.at(l, y, x) = acc[static_cast<std::size_t>(l)];
    }
  }
  return out;
}

// Truncated-window approximation: the Gaussian is cut at 3.5 spatial
// bandwidths, leaving a relative tail below 0.3%.
inline Tensor pairwise_filter_fast(const Tensor& field, const Tensor* image,
                                   const KernelSpec& spec) {
  if (field.shape.size() != 3) throw std::invalid_argument("pairwise_filter: rank-3 field expected");
  int labels = field.dim(0), h = field.dim(1), w = field.dim(2);
  if (spec.bilateral && (image == nullptr || image->dim(1) != h || image->dim(2) != w))
    throw std::invalid_argument("pairwise_filter: bilateral kernel needs a matching image");
  int r = static_cast<int>(std::ceil(3.5 * spec.theta_spatial));
  double inv2s = 1.0 / (2.0 * spec.theta_spatial * spec.theta_spatial);
  double inv2i = spec.bilateral ? 1.0 / (2.0 * spec.theta_intensity * spec.theta_intensity) : 0.0;

  Tensor out({labels, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double ii = spec.bilateral ? image->at(0, y, x) : 0.0;
      for (int jy = std::max(0, y - r); jy <= std::min(h - 1, y + r); ++jy) {
        double dy2 = static_cast<double>(jy - y) * (jy - y);
        for (int jx = std::max(0, x - r); jx <= std::min(w - 1, x + r); ++jx) {
          if (jy == y && jx == x) continue;
          double d2 = dy2 + static_cast<double>(jx - x) * (jx - x);
          double k = std::exp(-d2 * inv2s);
          if (spec.bilateral) {
            double di = ii - image->at(0, jy, jx);
            k *= std::exp(-di * di * inv2i);
          }
          for (int l = 0; l < labels; ++l) out.at(l, y, x) += k * field.at(l, jy, jx);
        }
      }
    }
  }
  return out;
}

// One synchronous mean-field update: Q'_i(l) proportional to
// exp(-u_i(l) - sum_m w_m * message_m(i, other label)) under the Potts model.
inline LabelField meanfield_step(const LabelField& q, const Tensor& unary, const Tensor& image,
                                 const CrfParams& params, bool use_fast = false) {
  params.validate();
  int h = q.q.dim(1), w = q.q.dim(2);
  if (unary.shape != q.q.shape) throw std::invalid_argument("meanfield_step: unary shape mismatch");
  auto filter = use_fast ? pairwise_filter_fast : pairwise_filter_bruteforce;
  Tensor m_app, m_smooth;
  if (params.w_app > 0)
    m_app = filter(q.q, &image, {true, params.theta_alpha, params.theta_beta});
  if (params.w_smooth > 0)
    m_smooth = filter(q.q, nullptr, {false, params.theta_gamma, 0.0});

  LabelField next{Tensor({2, h, w})};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double e[2];
      for (int l = 0; l < 2; ++l) {
        double pairwise = 0.0;
        if (params.w_app > 0) pairwise += params.w_app * m_app.at(1 - l, y, x);
        if (params.w_smooth > 0) pairwise += params.w_smooth * m_smooth.at(1 - l, y, x);
        e[l] = -unary.at(l, y, x) - pairwise;
      }
      double m = std::max(e[0], e[1]);
      double z0 = std::exp(e[0] - m), z1 = std::exp(e[1] - m);
      double z = z0 + z1;
      next.q.at(0, y, x) = z0 / z;
      next.q.at(1, y, x) = z1 / z;
    }
  }
  return next;
}

// Full refinement: unaries from the head's probabilities, `iterations`
// synchronous updates, return the lesion marginal.
inline Tensor run_dcrf(const Tensor& prob, const Tensor& image, const CrfParams& params,
                       bool use_fast = false) {
  params.validate();
  if (prob.shape.size() != 3 || prob.dim(0) != 1)
    throw std::invalid_argument("run_dcrf: prob must be (1,H,W)");
  if (image.dim(1) != prob.dim(1) || image.dim(2) != prob.dim(2))
    throw std::invalid_argument("run_dcrf: image/prob shape mismatch");
  int h = prob.dim(1), w = prob.dim(2);
  Tensor unary = unary_from_prob(prob, params.eps);
  LabelField q{Tensor({2, h, w})};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      // softmax(-u) == the clamped input probabilities
      double e0 = -unary.at(0, y, x), e1 = -unary.at(1, y, x);
      double m = std::max(e0, e1);
      double z0 = std::exp(e0 - m), z1 = std::exp(e1 - m);
      double z = z0 + z1;
      q.q.at(0, y, x) = z0 / z;
      q.q.at(1, y, x) = z1 / z;
    }
  for (int it = 0; it < params.iterations; ++it)
    q = meanfield_step(q, unary, image, params, use_fast);
  Tensor out({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(0, y, x) = q.q.at(1, y, x);
  return out;
}

}  // namespace rsrcnn
