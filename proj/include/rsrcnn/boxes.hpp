#pragma once

// Proposal-side geometry: anchor grids, ReLU proposal scoring, NMS, the
// 50-proposal cap, heuristic box expansion and RoIAlign. Boxes are
// (y1, x1, y2, x2) in pixel coordinates (origin at the center of pixel (0,0))
// with y2 > y1 and x2 > x1.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rsrcnn/tensor.hpp"

namespace rsrcnn {

struct Box {
  double y1 = 0, x1 = 0, y2 = 0, x2 = 0;

  double h() const { return y2 - y1; }
  double w() const { return x2 - x1; }
  double area() const { return h() * w(); }
  double cy() const { return (y1 + y2) / 2.0; }
  double cx() const { return (x1 + x2) / 2.0; }
  bool valid() const { return y2 > y1 && x2 > x1; }
};

struct ScoredProposal {
  Box box;
  double score = 0.0;  // post-ReLU, always >= 0
};

// R in the expansion rule: round-half-up.
inline double round_half_up(double x) { return std::floor(x + 0.5); }

enum class ExpansionMode {
  kCenterScale,    // size multiplies by k; identity at k = 1
  kLiteralOutward  // each edge moves out by k*(extent/2); size becomes (1+k)x
};

struct ExpansionConfig {
  double k = 1.3;
  ExpansionMode mode = ExpansionMode::kCenterScale;
};

inline double iou(const Box& a, const Box& b) {
  double iy1 = std::max(a.y1, b.y1), ix1 = std::max(a.x1, b.x1);
  double iy2 = std::min(a.y2, b.y2), ix2 = std::min(a.x2, b.x2);
  double inter = std::max(0.0, iy2 - iy1) * std::max(0.0, ix2 - ix1);
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// ---------------------------------------------------------------------------
// Anchors

// One box per (cell, scale, ratio), centered on the feature cell mapped back
// by the stride. Ordering: y-major over cells, then scales, then ratios.
// h/w = ratio and h*w = scale^2.
inline std::vector<Box> generate_anchors(int feat_h, int feat_w, int stride,
                                         const std::vector<double>& scales,
                                         const std::vector<double>& ratios) {
  if (feat_h < 1 || feat_w < 1 || stride < 1)
    throw std::invalid_argument("generate_anchors: non-positive grid or stride");
  if (scales.empty() || ratios.empty())
    throw std::invalid_argument("generate_anchors: scales and ratios must be non-empty");
  std::vector<Box> anchors;
  anchors.reserve(static_cast<std::size_t>(feat_h) * feat_w * scales.size() * ratios.size());
  for (int y = 0; y < feat_h; ++y) {
    for (int x = 0; x < feat_w; ++x) {
      double cy = (y + 0.5) * stride;
      double cx = (x + 0.5) * stride;
      for (double s : scales) {
        for (double r : ratios) {
          double h = s * std::sqrt(r);
          double w = s / std::sqrt(r);
          anchors.push_back({cy - h / 2, cx - w / 2, cy + h / 2, cx + w / 2});
        }
      }
    }
  }
  return anchors;
}

// ---------------------------------------------------------------------------
// Scoring and selection

// ReLU gate over raw classifier logits; anchors scoring exactly 0 are
// dropped. Returns (anchor index, score) pairs in the original order.
inline std::vector<std::pair<std::size_t, double>> score_proposals(const Tensor& logits) {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double s = std::max(0.0, logits[i]);
    if (s > 0.0) out.emplace_back(i, s);
  }
  return out;
}

// Center/log-size delta decoding: center moves by (dy*h, dx*w), size scales
// by exp(dh), exp(dw).
inline Box apply_box_deltas(const Box& anchor, double dy, double dx, double dh, double dw) {
  double h = anchor.h(), w = anchor.w();
  double cy = anchor.cy() + dy * h;
  double cx = anchor.cx() + dx * w;
  double nh = h * std::exp(dh);
  double nw = w * std::exp(dw);
  return {cy - nh / 2, cx - nw / 2, cy + nh / 2, cx + nw / 2};
}

inline std::array<double, 4> encode_box_deltas(const Box& anchor, const Box& target) {
  double h = anchor.h(), w = anchor.w();
  return {(target.cy() - anchor.cy()) / h, (target.cx() - anchor.cx()) / w,
          std::log(target.h() / h), std::log(target.w() / w)};
}

// Greedy NMS. Keep the highest score, discard boxes with IoU strictly above
// the threshold against any kept box; ties broken by lower original index.
// Output sorted by descending score.
inline std::vector<ScoredProposal> nms(const std::vector<ScoredProposal>& proposals,
                                       double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
    throw std::invalid_argument("nms: iou_threshold must be in (0,1)");
  std::vector<std::size_t> order(proposals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return proposals[a].score > proposals[b].score;
  });
  std::vector<ScoredProposal> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (iou(proposals[idx].box, k.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(proposals[idx]);
  }
  return kept;
}

// Upper limit on candidate regions (50 by default). Input must already be
// sorted by descending score.
inline std::vector<ScoredProposal> cap_proposals(std::vector<ScoredProposal> proposals,
                                                 std::size_t limit = 50) {
  if (proposals.size() > limit) proposals.resize(limit);
  return proposals;
}

// ---------------------------------------------------------------------------
// Heuristic expansion

inline Box expand_box(const Box& box, const ExpansionConfig& cfg) {
  if (!box.valid()) throw std::invalid_argument("expand_box: degenerate box");
  if (cfg.k < 1.0) throw std::invalid_argument("expand_box: k must be >= 1");
  double h = box.h(), w = box.w();
  if (cfg.mode == ExpansionMode::kLiteralOutward) {
    return {round_half_up(box.y1 - cfg.k * h / 2), round_half_up(box.x1 - cfg.k * w / 2),
            round_half_up(box.y2 + cfg.k * h / 2), round_half_up(box.x2 + cfg.k * w / 2)};
  }
  double cy = box.cy(), cx = box.cx();
  return {round_half_up(cy - cfg.k * h / 2), round_half_up(cx - cfg.k * w / 2),
          round_half_up(cy + cfg.k * h / 2), round_half_up(cx + cfg.k * w / 2)};
}

inline Box clip_box(const Box& box, int img_h, int img_w) {
  Box c{std::clamp(box.y1, 0.0, static_cast<double>(img_h)),
        std::clamp(box.x1, 0.0, static_cast<double>(img_w)),
        std::clamp(box.y2, 0.0, static_cast<double>(img_h)),
        std::clamp(box.x2, 0.0, static_cast<double>(img_w))};
  if (!c.valid()) throw std::invalid_argument("clip_box: box fully outside the frame");
  return c;
}

inline std::optional<Box> try_clip_box(const Box& box, int img_h, int img_w) {
  Box c{std::clamp(box.y1, 0.0, static_cast<double>(img_h)),
        std::clamp(box.x1, 0.0, static_cast<double>(img_w)),
        std::clamp(box.y2, 0.0, static_cast<double>(img_h)),
        std::clamp(box.x2, 0.0, static_cast<double>(img_w))};
  if (!c.valid()) return std::nullopt;
  return c;
}

// ---------------------------------------------------------------------------
// RoIAlign

// Output size of the second RoIAlign as a function of the expansion factor:
// N = R(14k). The output patch is square N x N.
inline int roialign2_output_size(double k) {
  if (k < 1.0) throw std::invalid_argument("roialign2_output_size: k must be >= 1");
  return static_cast<int>(round_half_up(14.0 * k));
}

// Image-space coordinate -> feature-grid coordinate under the pixel-center
// convention; identity when spatial_scale == 1.
inline double to_feature_coord(double v, double spatial_scale) {
  return (v + 0.5) * spatial_scale - 0.5;
}

// Quantization-free pooling: the (scaled) box is divided into out_h x out_w
// bins and each bin averages a fixed grid of bilinear samples taken at
// fractions (i+0.5)/n of the bin extent. samples_per_axis is 2 by default,
// 1 gives the single-center variant.
inline Tensor roialign(const Tensor& feature, const Box& box, int out_h, int out_w,
                       double spatial_scale = 1.0, int samples_per_axis = 2) {
  if (feature.shape.size() != 3) throw std::invalid_argument("roialign: rank-3 feature expected");
  if (out_h < 1 || out_w < 1 || samples_per_axis < 1)
    throw std::invalid_argument("roialign: bad output size or sampling");
  Box fb{to_feature_coord(box.y1, spatial_scale), to_feature_coord(box.x1, spatial_scale),
         to_feature_coord(box.y2, spatial_scale), to_feature_coord(box.x2, spatial_scale)};
  if (!fb.valid()) throw std::invalid_argument("roialign: degenerate box after scaling");
  int c_n = feature.dim(0), n = samples_per_axis;
  double bin_h = fb.h() / out_h, bin_w = fb.w() / out_w;
  Tensor out({c_n, out_h, out_w});
  double inv = 1.0 / (n * n);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      std::vector<double> acc(static_cast<std::size_t>(c_n), 0.0);
      for (int sy = 0; sy < n; ++sy) {
        double y = fb.y1 + (oy + (sy + 0.5) / n) * bin_h;
        for (int sx = 0; sx < n; ++sx) {
          double x = fb.x1 + (ox + (sx + 0.5) / n) * bin_w;
          auto v = bilinear_sample(feature, y, x);
          for (int c = 0; c < c_n; ++c) acc[static_cast<std::size_t>(c)] += v[static_cast<std::size_t>(c)];
        }
      }
      for (int c = 0; c < c_n; ++c) out.at(c, oy, ox) = acc[static_cast<std::size_t>(c)] * inv;
    }
  }
  return out;
}

// Gradient of roialign w.r.t. the feature map, accumulated into grad_feature.
inline void roialign_backward(Tensor& grad_feature, const Box& box, const Tensor& grad_out,
                              double spatial_scale = 1.0, int samples_per_axis = 2) {
  Box fb{to_feature_coord(box.y1, spatial_scale), to_feature_coord(box.x1, spatial_scale),
         to_feature_coord(box.y2, spatial_scale), to_feature_coord(box.x2, spatial_scale)};
  if (!fb.valid()) throw std::invalid_argument("roialign_backward: degenerate box");
  int c_n = grad_feature.dim(0), n = samples_per_axis;
  int out_h = grad_out.dim(1), out_w = grad_out.dim(2);
  double bin_h = fb.h() / out_h, bin_w = fb.w() / out_w;
  double inv = 1.0 / (n * n);
  std::vector<double> g(static_cast<std::size_t>(c_n));
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      for (int c = 0; c < c_n; ++c) g[static_cast<std::size_t>(c)] = grad_out.at(c, oy, ox) * inv;
      for (int sy = 0; sy < n; ++sy) {
        double y = fb.y1 + (oy + (sy + 0.5) / n) * bin_h;
        for (int sx = 0; sx < n; ++sx) {
          double x = fb.x1 + (ox + (sx + 0.5) / n) * bin_w;
          bilinear_sample_backward(grad_feature, y, x, g);
        }
      }
    }
  }
}

}  // namespace rsrcnn
