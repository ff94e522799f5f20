#pragma once

// Pixel-level evaluation: confusion counts, DSC, sensitivity, specificity,
// Hausdorff distance, per-slice quartile statistics and subject-level
// splits. Conventions for empty masks: DSC is 1 when both masks are empty and
// 0 when exactly one is; sensitivity is undefined (excluded) on lesion-free
// slices; HD is undefined when exactly one point set is empty.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsrcnn/rng.hpp"
#include "rsrcnn/tensor.hpp"

namespace rsrcnn {

struct ConfusionCounts {
  long long tp = 0, fp = 0, fn = 0, tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

inline ConfusionCounts confusion(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt))
    throw std::invalid_argument("confusion: shape mismatch " + pred.shape_str() + " vs " +
                                gt.shape_str());
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    bool p = pred[i] != 0.0, g = gt[i] != 0.0;
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

// DSC = 2tp / (2tp + fp + fn); 1 when both masks are empty.
inline double dsc(const ConfusionCounts& c) {
  long long denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline std::optional<double> sensitivity(const ConfusionCounts& c) {
  long long denom = c.tp + c.fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline std::optional<double> specificity(const ConfusionCounts& c) {
  long long denom = c.tn + c.fp;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(c.tn) / static_cast<double>(denom);
}

// ---------------------------------------------------------------------------
// Hausdorff distance

struct Pixel {
  int y = 0, x = 0;
};

inline std::vector<Pixel> foreground_pixels(const Tensor& mask) {
  if (mask.shape.size() != 3 || mask.dim(0) != 1)
    throw std::invalid_argument("foreground_pixels: mask must be (1,H,W)");
  std::vector<Pixel> pts;
  for (int y = 0; y < mask.dim(1); ++y)
    for (int x = 0; x < mask.dim(2); ++x)
      if (mask.at(0, y, x) != 0.0) pts.push_back({y, x});
  return pts;
}

// Directed distance h(A,B) = max_a min_b d(a,b) with the early-break scan:
// once some b lies within the current maximum, a cannot raise it.
inline double directed_hausdorff_sq(const std::vector<Pixel>& a, const std::vector<Pixel>& b) {
  double cmax = 0.0;
  for (const auto& pa : a) {
    double cmin = std::numeric_limits<double>::infinity();
    for (const auto& pb : b) {
      double dy = pa.y - pb.y, dx = pa.x - pb.x;
      double d2 = dy * dy + dx * dx;
      if (d2 <= cmax) {
        cmin = 0.0;  // cannot exceed cmax; skip the rest
        break;
      }
      if (d2 < cmin) cmin = d2;
    }
    if (cmin > cmax && std::isfinite(cmin)) cmax = cmin;
  }
  return cmax;
}

// Symmetric HD in pixels; 0 when both sets are empty, undefined when exactly
// one is.
inline std::optional<double> hausdorff(const std::vector<Pixel>& a, const std::vector<Pixel>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::nullopt;
  double h = std::max(directed_hausdorff_sq(a, b), directed_hausdorff_sq(b, a));
  return std::sqrt(h);
}

// ---------------------------------------------------------------------------
// Per-slice metrics and statistics

struct SliceMetrics {
  std::string subject_id;
  int slice_index = 0;
  double dsc = 0.0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> hd;
};

inline SliceMetrics compute_slice_metrics(const std::string& subject_id, int slice_index,
                                          const Tensor& pred, const Tensor& gt) {
  SliceMetrics m;
  m.subject_id = subject_id;
  m.slice_index = slice_index;
  ConfusionCounts c = confusion(pred, gt);
  m.dsc = dsc(c);
  m.sensitivity = sensitivity(c);
  m.specificity = specificity(c);
  m.hd = hausdorff(foreground_pixels(pred), foreground_pixels(gt));
  return m;
}

struct StatSummary {
  double mean = 0.0, median = 0.0, q1 = 0.0, q3 = 0.0, iqr = 0.0;
};

namespace detail {
inline double median_sorted(const double* v, std::size_t n) {
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

// Median-exclusive (Tukey) quartiles: the halves exclude the median element
// when the count is odd.
inline StatSummary summarize(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty value list");
  StatSummary s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  s.median = detail::median_sorted(values.data(), n);
  if (n == 1) {
    s.q1 = s.q3 = values[0];
  } else {
    std::size_t half = n / 2;
    s.q1 = detail::median_sorted(values.data(), half);
    s.q3 = detail::median_sorted(values.data() + (n - half), half);
  }
  s.iqr = s.q3 - s.q1;
  return s;
}

struct PerSliceStats {
  std::optional<StatSummary> dsc, sensitivity, specificity, hd;
};

inline PerSliceStats per_slice_stats(const std::vector<SliceMetrics>& slices) {
  if (slices.empty()) throw std::invalid_argument("per_slice_stats: no slices");
  PerSliceStats out;
  std::vector<double> dv, sv, pv, hv;
  for (const auto& m : slices) {
    dv.push_back(m.dsc);
    if (m.sensitivity) sv.push_back(*m.sensitivity);
    if (m.specificity) pv.push_back(*m.specificity);
    if (m.hd) hv.push_back(*m.hd);
  }
  out.dsc = summarize(dv);
  if (!sv.empty()) out.sensitivity = summarize(sv);
  if (!pv.empty()) out.specificity = summarize(pv);
  if (!hv.empty()) out.hd = summarize(hv);
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string slice_metrics_csv(const std::vector<SliceMetrics>& slices) {
  std::string s = "subject,slice,dsc,sensitivity,specificity,hd\n";
  for (const auto& m : slices) {
    s += m.subject_id + "," + std::to_string(m.slice_index) + "," + format_double(m.dsc) + ",";
    s += (m.sensitivity ? format_double(*m.sensitivity) : "") + std::string(",");
    s += (m.specificity ? format_double(*m.specificity) : "") + std::string(",");
    s += (m.hd ? format_double(*m.hd) : "") + std::string("\n");
  }
  return s;
}

// Quartiles use the median-exclusive convention (noted in the header row).
inline std::string stats_csv(const PerSliceStats& st) {
  std::string s = "metric,mean,median,q1,q3,iqr  # quartiles: median-exclusive\n";
  auto row = [&](const char* name, const std::optional<StatSummary>& m) {
    if (!m) return;
    s += std::string(name) + "," + format_double(m->mean) + "," + format_double(m->median) + "," +
         format_double(m->q1) + "," + format_double(m->q3) + "," + format_double(m->iqr) + "\n";
  };
  row("dsc", st.dsc);
  row("sensitivity", st.sensitivity);
  row("specificity", st.specificity);
  row("hd", st.hd);
  return s;
}

// ---------------------------------------------------------------------------
// Subject-level splits

struct SplitRatios {
  double train = 0.7, val = 0.15, test = 0.15;
};

struct DatasetSplit {
  std::vector<std::string> train, val, test;
};

// Sizes are the rounded ratios with the remainder going to train; all slices
// of a subject land in one partition.
inline DatasetSplit split_dataset(std::vector<std::string> subjects, const SplitRatios& ratios,
                                  std::uint64_t seed) {
  if (subjects.size() < 3) throw std::invalid_argument("split_dataset: need >= 3 subjects");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: ratios must sum to 1");
  std::sort(subjects.begin(), subjects.end());
  Rng rng(seed);
  rng.shuffle(subjects);
  std::size_t n = subjects.size();
  auto round_sz = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 0.5));
  };
  std::size_t n_val = round_sz(ratios.val), n_test = round_sz(ratios.test);
  if (n_val + n_test > n) throw std::invalid_argument("split_dataset: ratios leave no train set");
  std::size_t n_train = n - n_val - n_test;
  DatasetSplit s;
  s.train.assign(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(subjects.begin() + static_cast<std::ptrdiff_t>(n_train),
               subjects.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(subjects.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), subjects.end());
  return s;
}

struct Fold {
  std::vector<std::string> train_val;
  std::vector<std::string> test;
};

// Five mutually disjoint test folds covering all subjects, sizes within 1.
inline std::vector<Fold> five_fold(std::vector<std::string> subjects, std::uint64_t seed) {
  if (subjects.size() < 5) throw std::invalid_argument("five_fold: need >= 5 subjects");
  std::sort(subjects.begin(), subjects.end());
  Rng rng(seed);
  rng.shuffle(subjects);
  std::vector<Fold> folds(5);
  for (std::size_t i = 0; i < subjects.size(); ++i)
    folds[i % 5].test.push_back(subjects[i]);
  for (auto& f : folds)
    for (const auto& s : subjects)
      if (std::find(f.test.begin(), f.test.end(), s) == f.test.end()) f.train_val.push_back(s);
  return folds;
}

}  // namespace rsrcnn
