#pragma once

// Dataset formats and image plumbing: 16-bit PGM slices with 8-bit PGM masks
// referenced from a JSON manifest, the width-deformation / lateral-flip
// augmentation, restoration of per-ROI probability maps to full-image masks,
// TP/FP/FN overlay rendering, and the synthetic punctate-lesion generator
// that stands in for clinical data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsrcnn/boxes.hpp"
#include "rsrcnn/metrics.hpp"
#include "rsrcnn/rng.hpp"
#include "rsrcnn/tensor.hpp"

namespace rsrcnn {

struct SliceRecord {
  std::string subject_id;
  int slice_index = 0;
  Tensor image;  // (1,H,W); raw intensities on disk, normalized in-pipeline
  Tensor mask;   // (1,H,W), values in {0,1}
};

constexpr int kSliceSize = 512;

// ---------------------------------------------------------------------------
// PGM / PPM

namespace detail {

// Reads the next header token, skipping whitespace and '#' comments.
inline std::string pgm_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw std::runtime_error(path + ": truncated header");
  return tok;
}

inline int pgm_int(std::istream& in, const std::string& path, const char* what) {
  std::string tok = pgm_token(in, path);
  try {
    std::size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path + ": malformed " + what + " field '" + tok + "'");
  }
}

}  // namespace detail

// 16-bit big-endian P5, maxval 65535. Values are rounded and clamped on write.
inline void write_pgm16(const std::string& path, const Tensor& image) {
  if (image.shape.size() != 3 || image.dim(0) != 1)
    throw std::invalid_argument("write_pgm16: image must be (1,H,W)");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  int h = image.dim(1), w = image.dim(2);
  out << "P5\n" << w << " " << h << "\n65535\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * 2);
  for (std::size_t i = 0; i < image.size(); ++i) {
    double v = std::clamp(std::floor(image[i] + 0.5), 0.0, 65535.0);
    auto s = static_cast<std::uint16_t>(v);
    buf[2 * i] = static_cast<unsigned char>(s >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(s & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline Tensor read_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string magic = detail::pgm_token(in, path);
  if (magic != "P5") throw std::runtime_error(path + ": expected P5 magic, got '" + magic + "'");
  int w = detail::pgm_int(in, path, "width");
  int h = detail::pgm_int(in, path, "height");
  int maxval = detail::pgm_int(in, path, "maxval");
  if (maxval != 65535)
    throw std::runtime_error(path + ": expected maxval 65535, got " + std::to_string(maxval));
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw std::runtime_error(path + ": truncated payload at byte " +
                             std::to_string(in.gcount() < 0 ? 0 : in.gcount()));
  Tensor t({1, h, w});
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<double>((static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1]);
  return t;
}

// Masks: 8-bit P5, maxval 255, samples restricted to {0, 255}.
inline void write_mask_pgm(const std::string& path, const Tensor& mask) {
  if (mask.shape.size() != 3 || mask.dim(0) != 1)
    throw std::invalid_argument("write_mask_pgm: mask must be (1,H,W)");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  int h = mask.dim(1), w = mask.dim(2);
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < mask.size(); ++i)
    buf[i] = mask[i] != 0.0 ? 255 : 0;
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline Tensor read_mask_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string magic = detail::pgm_token(in, path);
  if (magic != "P5") throw std::runtime_error(path + ": expected P5 magic, got '" + magic + "'");
  int w = detail::pgm_int(in, path, "width");
  int h = detail::pgm_int(in, path, "height");
  int maxval = detail::pgm_int(in, path, "maxval");
  if (maxval != 255)
    throw std::runtime_error(path + ": expected maxval 255, got " + std::to_string(maxval));
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw std::runtime_error(path + ": truncated payload");
  Tensor t({1, h, w});
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (buf[i] != 0 && buf[i] != 255)
      throw std::runtime_error(path + ": mask value " + std::to_string(buf[i]) +
                               " outside {0,255} at pixel (" + std::to_string(i / w) + "," +
                               std::to_string(i % w) + ")");
    t[i] = buf[i] ? 1.0 : 0.0;
  }
  return t;
}

struct RgbImage {
  int h = 0, w = 0;
  std::vector<unsigned char> data;  // interleaved RGB
};

inline void write_ppm(const std::string& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string subject_id;
  int slice_index = 0;
  std::string image;  // path relative to the manifest
  std::string mask;
};

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : entries)
    j.push_back({{"subject_id", e.subject_id},
                 {"slice_index", e.slice_index},
                 {"image", e.image},
                 {"mask", e.mask}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_array()) throw std::runtime_error(path + ": manifest must be a JSON array");
  std::vector<ManifestEntry> entries;
  for (const auto& rec : j) {
    ManifestEntry e;
    try {
      e.subject_id = rec.at("subject_id").get<std::string>();
      e.slice_index = rec.at("slice_index").get<int>();
      e.image = rec.at("image").get<std::string>();
      e.mask = rec.at("mask").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw std::runtime_error(path + ": bad manifest record: " + ex.what());
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

inline SliceRecord load_slice(const ManifestEntry& entry, const std::string& base_dir) {
  namespace fs = std::filesystem;
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    if (fp.is_absolute()) return fp.string();
    return (fs::path(base_dir) / fp).string();
  };
  std::string img_path = resolve(entry.image), mask_path = resolve(entry.mask);
  if (!fs::exists(img_path)) throw std::runtime_error("missing image file: " + img_path);
  if (!fs::exists(mask_path)) throw std::runtime_error("missing mask file: " + mask_path);
  SliceRecord r;
  r.subject_id = entry.subject_id;
  r.slice_index = entry.slice_index;
  r.image = read_pgm16(img_path);
  r.mask = read_mask_pgm(mask_path);
  if (!r.image.same_shape(r.mask))
    throw std::runtime_error(img_path + ": image/mask shape mismatch");
  return r;
}

inline std::vector<SliceRecord> load_dataset(const std::string& manifest_path) {
  std::string base = std::filesystem::path(manifest_path).parent_path().string();
  std::vector<SliceRecord> out;
  for (const auto& e : load_manifest(manifest_path)) out.push_back(load_slice(e, base));
  return out;
}

inline void save_slice(const SliceRecord& r, const std::string& image_path,
                       const std::string& mask_path) {
  write_pgm16(image_path, r.image);
  write_mask_pgm(mask_path, r.mask);
}

// ---------------------------------------------------------------------------
// Normalization and augmentation

// Zero mean, unit (population) variance per slice; constant slices map to
// all zeros.
inline Tensor normalize(const Tensor& image) {
  double mean = 0.0;
  for (double v : image.data) mean += v;
  mean /= static_cast<double>(image.size());
  double var = 0.0;
  for (double v : image.data) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / static_cast<double>(image.size()));
  Tensor out(image.shape);
  if (sd < 1e-12) return out;
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = (image[i] - mean) / sd;
  return out;
}

struct AugmentConfig {
  double d_min = 0.85;
  double d_max = 1.15;
  double flip_prob = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(0 < d_min && d_min <= d_max) || flip_prob < 0 || flip_prob > 1)
      throw std::invalid_argument("AugmentConfig: need 0 < d_min <= d_max, flip_prob in [0,1]");
  }
};

inline Tensor flip_horizontal(const Tensor& t) {
  Tensor out(t.shape);
  int c_n = t.dim(0), h = t.dim(1), w = t.dim(2);
  for (int c = 0; c < c_n; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, y, w - 1 - x);
  return out;
}

// Width rescaled to R(W*d) (bilinear for the image, nearest for the mask),
// lateral flip with probability flip_prob, then center-crop or symmetric
// zero-pad back to the original width. Height is untouched.
inline SliceRecord augment(const SliceRecord& record, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  int h = record.image.dim(1), w = record.image.dim(2);
  double d = rng.uniform(cfg.d_min, cfg.d_max);
  int new_w = static_cast<int>(round_half_up(w * d));
  new_w = std::max(1, new_w);

  SliceRecord out;
  out.subject_id = record.subject_id;
  out.slice_index = record.slice_index;
  Tensor img = resize_bilinear(record.image, h, new_w);
  Tensor msk = resize_nearest(record.mask, h, new_w);
  if (rng.bernoulli(cfg.flip_prob)) {
    img = flip_horizontal(img);
    msk = flip_horizontal(msk);
  }
  if (new_w == w) {
    out.image = std::move(img);
    out.mask = std::move(msk);
    return out;
  }
  out.image = Tensor({1, h, w});
  out.mask = Tensor({1, h, w});
  if (new_w > w) {
    int start = (new_w - w) / 2;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        out.image.at(0, y, x) = img.at(0, y, x + start);
        out.mask.at(0, y, x) = msk.at(0, y, x + start);
      }
  } else {
    int left = (w - new_w) / 2;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < new_w; ++x) {
        out.image.at(0, y, x + left) = img.at(0, y, x);
        out.mask.at(0, y, x + left) = msk.at(0, y, x);
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mask restoration and overlays

struct RoiProb {
  Tensor prob;  // (1,N,N)
  Box box;      // pixel coordinates, already clipped to the frame
};

// Integer pixel extent of a box: round-half-up of each edge, half-open.
struct PixelRect {
  int y0 = 0, x0 = 0, y1 = 0, x1 = 0;
  int h() const { return y1 - y0; }
  int w() const { return x1 - x0; }
  bool empty() const { return h() <= 0 || w() <= 0; }
};

inline PixelRect box_pixel_extent(const Box& box, int img_h, int img_w) {
  PixelRect r;
  r.y0 = std::clamp(static_cast<int>(round_half_up(box.y1)), 0, img_h);
  r.x0 = std::clamp(static_cast<int>(round_half_up(box.x1)), 0, img_w);
  r.y1 = std::clamp(static_cast<int>(round_half_up(box.y2)), 0, img_h);
  r.x1 = std::clamp(static_cast<int>(round_half_up(box.x2)), 0, img_w);
  return r;
}

// Each probability map is resized to its box's pixel extent and pasted;
// overlaps combine by per-pixel max, then the canvas is thresholded.
inline Tensor restore_masks(const std::vector<RoiProb>& rois, int img_h, int img_w,
                            double threshold = 0.5) {
  Tensor canvas({1, img_h, img_w});
  for (const auto& roi : rois) {
    PixelRect r = box_pixel_extent(roi.box, img_h, img_w);
    if (r.empty()) continue;
    Tensor patch = resize_bilinear(roi.prob, r.h(), r.w());
    for (int y = 0; y < r.h(); ++y)
      for (int x = 0; x < r.w(); ++x) {
        double& c = canvas.at(0, r.y0 + y, r.x0 + x);
        c = std::max(c, patch.at(0, y, x));
      }
  }
  Tensor mask({1, img_h, img_w});
  for (std::size_t i = 0; i < canvas.size(); ++i) mask[i] = canvas[i] >= threshold ? 1.0 : 0.0;
  return mask;
}

// Grayscale base with TP pixels pure green, FP pure red, FN pure blue.
inline RgbImage render_overlay(const Tensor& gt, const Tensor& pred, const Tensor& image) {
  if (!gt.same_shape(pred) || !gt.same_shape(image))
    throw std::invalid_argument("render_overlay: shape mismatch");
  int h = image.dim(1), w = image.dim(2);
  double lo = image.data[0], hi = image.data[0];
  for (double v : image.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  RgbImage out;
  out.h = h;
  out.w = w;
  out.data.resize(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
      bool p = pred.at(0, y, x) != 0.0, g = gt.at(0, y, x) != 0.0;
      if (p && g) {
        out.data[i] = 0;
        out.data[i + 1] = 255;
        out.data[i + 2] = 0;
      } else if (p) {
        out.data[i] = 255;
        out.data[i + 1] = 0;
        out.data[i + 2] = 0;
      } else if (g) {
        out.data[i] = 0;
        out.data[i + 1] = 0;
        out.data[i + 2] = 255;
      } else {
        auto v = static_cast<unsigned char>(std::clamp((image.at(0, y, x) - lo) * scale, 0.0, 255.0));
        out.data[i] = out.data[i + 1] = out.data[i + 2] = v;
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Connected components (8-connectivity); used to derive lesion boxes and
// per-lesion masks from a binary slice mask.

struct MaskComponent {
  Box box;  // (min-0.5, ..., max+0.5) so the pixel extent round-trips exactly
  std::vector<Pixel> pixels;
};

inline std::vector<MaskComponent> mask_components(const Tensor& mask) {
  if (mask.shape.size() != 3 || mask.dim(0) != 1)
    throw std::invalid_argument("mask_components: mask must be (1,H,W)");
  int h = mask.dim(1), w = mask.dim(2);
  std::vector<char> seen(static_cast<std::size_t>(h) * w, 0);
  std::vector<MaskComponent> comps;
  std::vector<Pixel> stack;
  for (int sy = 0; sy < h; ++sy)
    for (int sx = 0; sx < w; ++sx) {
      if (mask.at(0, sy, sx) == 0.0 || seen[static_cast<std::size_t>(sy) * w + sx]) continue;
      MaskComponent comp;
      int min_y = sy, max_y = sy, min_x = sx, max_x = sx;
      stack.push_back({sy, sx});
      seen[static_cast<std::size_t>(sy) * w + sx] = 1;
      while (!stack.empty()) {
        Pixel p = stack.back();
        stack.pop_back();
        comp.pixels.push_back(p);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int ny = p.y + dy, nx = p.x + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            if (mask.at(0, ny, nx) == 0.0 || seen[static_cast<std::size_t>(ny) * w + nx]) continue;
            seen[static_cast<std::size_t>(ny) * w + nx] = 1;
            stack.push_back({ny, nx});
          }
      }
      comp.box = {min_y - 0.5, min_x - 0.5, max_y + 0.5, max_x + 0.5};
      comps.push_back(std::move(comp));
    }
  return comps;
}

// ---------------------------------------------------------------------------
// Synthetic punctate-lesion generator

struct SynthConfig {
  int n_subjects = 40;
  int slices_per_subject = 10;
  int height = kSliceSize;
  int width = kSliceSize;
  int max_lesions = 5;  // per slice, uniform in [0, max_lesions]
  double radius_min = 1.0;
  double radius_max = 6.0;
  double contrast_min = 500.0;   // near-threshold against the background noise
  double contrast_max = 3200.0;
  std::uint64_t seed = 0;
};

// One slice: a smooth elliptical "brain" over a dark border, low-frequency
// interior texture, and 0..max_lesions hyperintense Gaussian blobs. The mask
// is the blob support above half peak (distance <= radius). Deterministic in
// (seed, subject_index, slice_index).
inline SliceRecord synth_slice(const SynthConfig& cfg, int subject_index, int slice_index) {
  Rng rng = Rng(cfg.seed).fork((static_cast<std::uint64_t>(subject_index) << 24) |
                               static_cast<std::uint64_t>(slice_index));
  int h = cfg.height, w = cfg.width;
  SliceRecord r;
  r.subject_id = "subj" + std::to_string(subject_index);
  r.slice_index = slice_index;
  r.image = Tensor({1, h, w});
  r.mask = Tensor({1, h, w});

  double cy = h / 2.0 + rng.uniform(-20.0, 20.0);
  double cx = w / 2.0 + rng.uniform(-20.0, 20.0);
  double ay = rng.uniform(0.30, 0.40) * h;
  double ax = rng.uniform(0.28, 0.38) * w;
  double angle = rng.uniform(0.0, 3.14159265358979323846);
  double ca = std::cos(angle), sa = std::sin(angle);

  // low-frequency interior texture from a bilinearly upsampled coarse grid
  int gh = h / 64 + 2, gw = w / 64 + 2;
  Tensor grid({1, gh, gw});
  for (double& v : grid.data) v = rng.uniform(-900.0, 900.0);
  Tensor lowfreq = resize_bilinear(grid, h, w);

  auto ellipse_r2 = [&](double y, double x) {
    double u = (y - cy) * ca + (x - cx) * sa;
    double v = -(y - cy) * sa + (x - cx) * ca;
    return (u * u) / (ay * ay) + (v * v) / (ax * ax);
  };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool inside = ellipse_r2(y, x) <= 1.0;
      double base = inside ? 10000.0 + lowfreq.at(0, y, x) : 1200.0;
      double noise = rng.normal(0.0, inside ? 120.0 : 30.0);
      r.image.at(0, y, x) = base + noise;
    }

  int n_lesions = rng.uniform_int(0, cfg.max_lesions);
  for (int k = 0; k < n_lesions; ++k) {
    // keep centers comfortably inside the ellipse
    double ly, lx;
    do {
      ly = cy + rng.uniform(-0.8, 0.8) * ay;
      lx = cx + rng.uniform(-0.8, 0.8) * ax;
    } while (ellipse_r2(ly, lx) > 0.64);
    double radius = rng.uniform(cfg.radius_min, cfg.radius_max);
    double amp = rng.uniform(cfg.contrast_min, cfg.contrast_max);
    double sigma = radius / std::sqrt(2.0 * std::log(2.0));  // half peak at `radius`
    int y0 = std::max(0, static_cast<int>(std::floor(ly - 3 * sigma)));
    int y1 = std::min(h - 1, static_cast<int>(std::ceil(ly + 3 * sigma)));
    int x0 = std::max(0, static_cast<int>(std::floor(lx - 3 * sigma)));
    int x1 = std::min(w - 1, static_cast<int>(std::ceil(lx + 3 * sigma)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double d2 = (y - ly) * (y - ly) + (x - lx) * (x - lx);
        r.image.at(0, y, x) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
        if (d2 <= radius * radius) r.mask.at(0, y, x) = 1.0;
      }
  }

  for (double& v : r.image.data) v = std::clamp(std::floor(v + 0.5), 0.0, 65535.0);
  return r;
}

inline std::vector<SliceRecord> synth_records(const SynthConfig& cfg) {
  std::vector<SliceRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.n_subjects) * cfg.slices_per_subject);
  for (int s = 0; s < cfg.n_subjects; ++s)
    for (int i = 0; i < cfg.slices_per_subject; ++i) out.push_back(synth_slice(cfg, s, i));
  return out;
}

// Writes images/, masks/ and manifest.json under out_dir.
inline std::vector<ManifestEntry> synth_generate(const std::string& out_dir,
                                                 const SynthConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "masks");
  std::vector<ManifestEntry> entries;
  for (int s = 0; s < cfg.n_subjects; ++s)
    for (int i = 0; i < cfg.slices_per_subject; ++i) {
      SliceRecord rec = synth_slice(cfg, s, i);
      char name[64];
      std::snprintf(name, sizeof(name), "subj%03d_s%03d.pgm", s, i);
      ManifestEntry e;
      e.subject_id = rec.subject_id;
      e.slice_index = rec.slice_index;
      e.image = std::string("images/") + name;
      e.mask = std::string("masks/") + name;
      save_slice(rec, (fs::path(out_dir) / e.image).string(), (fs::path(out_dir) / e.mask).string());
      entries.push_back(std::move(e));
    }
  write_manifest((fs::path(out_dir) / "manifest.json").string(), entries);
  return entries;
}

}  // namespace rsrcnn
