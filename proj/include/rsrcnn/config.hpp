#pragma once

// Pipeline configuration, loadable from JSON or flat key=value text
// (dotted keys, comma-separated lists). Unknown keys are rejected.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsrcnn/boxes.hpp"
#include "rsrcnn/data_io.hpp"
#include "rsrcnn/dense_crf.hpp"
#include "rsrcnn/metrics.hpp"
#include "rsrcnn/optim.hpp"

namespace rsrcnn {

struct AnchorConfig {
  int stride = 16;
  std::vector<double> scales = {4, 8, 16};
  std::vector<double> ratios = {0.5, 1, 2};

  int per_cell() const { return static_cast<int>(scales.size() * ratios.size()); }
};

struct BackboneConfig {
  std::vector<int> widths = {16, 32, 64, 128};  // stride-2 stage channels
  int rpn_channels = 32;
};

struct TrainerConfig {
  TrainConfig sgd;            // lr / momentum / weight decay / plateau schedule
  int steps_per_epoch = 0;    // 0 = every training slice once per epoch
  int anchor_batch = 64;
  int rois_per_image = 8;
  int mask_rois_per_image = 2;
  int val_slices_cap = 32;
  bool augment = true;
  bool freeze_backbone = false;
};

struct TuneConfig {
  int budget = 50;
  int init_points = 5;
};

struct AblateConfig {
  std::vector<double> ks = {1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.7, 2, 3};
  int epochs = 2;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 2;
  double k = 1.3;
  bool expansion_enabled = true;  // disabled is equivalent to k = 1
  ExpansionMode expansion_mode = ExpansionMode::kCenterScale;
  int proposal_cap = 50;
  double nms_threshold = 0.7;
  double detection_threshold = 0.5;
  int roialign_samples = 2;
  double delta_clip = 4.0;  // |dh|, |dw| clamp before exp when decoding
  AnchorConfig anchors;
  BackboneConfig backbone;
  int head_hidden = 256;
  CrfParams crf;
  TrainerConfig train;
  AugmentConfig augment;
  SplitRatios split;
  SynthConfig synth;
  TuneConfig tune;
  AblateConfig ablate;

  double effective_k() const { return expansion_enabled ? k : 1.0; }
  ExpansionConfig expansion() const { return {effective_k(), expansion_mode}; }
  int mask_size() const { return roialign2_output_size(effective_k()); }

  void validate() const {
    if (k < 1.0) throw std::invalid_argument("config: k must be >= 1");
    if (proposal_cap < 1) throw std::invalid_argument("config: proposal_cap must be >= 1");
    if (!(nms_threshold > 0 && nms_threshold < 1))
      throw std::invalid_argument("config: nms_threshold must be in (0,1)");
    if (anchors.scales.empty() || anchors.ratios.empty())
      throw std::invalid_argument("config: anchors need scales and ratios");
    if (backbone.widths.size() != 4)
      throw std::invalid_argument("config: backbone.widths must list 4 stage channels");
    crf.validate();
    train.sgd.validate();
    augment.validate();
  }
};

namespace cfgdetail {

template <typename T>
void read_list(const nlohmann::json& j, std::vector<T>& out) {
  if (!j.is_array()) throw std::invalid_argument("expected a list");
  out.clear();
  for (const auto& v : j) out.push_back(v.get<T>());
}

inline void apply_json(PipelineConfig& c, const nlohmann::json& j, const std::string& prefix);

inline void apply_scalar(PipelineConfig& c, const std::string& key, const nlohmann::json& v) {
  auto num = [&] { return v.get<double>(); };
  auto integer = [&] { return v.get<long long>(); };
  auto boolean = [&] {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number()) return v.get<double>() != 0.0;
    std::string s = v.get<std::string>();
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("expected a boolean for " + key);
  };

  if (key == "seed") c.seed = static_cast<std::uint64_t>(integer());
  else if (key == "threads") c.threads = static_cast<int>(integer());
  else if (key == "k") c.k = num();
  else if (key == "expansion_enabled") c.expansion_enabled = boolean();
  else if (key == "expansion_mode") {
    std::string s = v.get<std::string>();
    if (s == "center") c.expansion_mode = ExpansionMode::kCenterScale;
    else if (s == "literal") c.expansion_mode = ExpansionMode::kLiteralOutward;
    else throw std::invalid_argument("expansion_mode must be 'center' or 'literal'");
  } else if (key == "proposal_cap") c.proposal_cap = static_cast<int>(integer());
  else if (key == "nms_threshold") c.nms_threshold = num();
  else if (key == "detection_threshold") c.detection_threshold = num();
  else if (key == "roialign_samples") c.roialign_samples = static_cast<int>(integer());
  else if (key == "delta_clip") c.delta_clip = num();
  else if (key == "head_hidden") c.head_hidden = static_cast<int>(integer());
  else if (key == "anchors.stride") c.anchors.stride = static_cast<int>(integer());
  else if (key == "anchors.scales") read_list(v, c.anchors.scales);
  else if (key == "anchors.ratios") read_list(v, c.anchors.ratios);
  else if (key == "backbone.widths") read_list(v, c.backbone.widths);
  else if (key == "backbone.rpn_channels") c.backbone.rpn_channels = static_cast<int>(integer());
  else if (key == "crf.w_app") c.crf.w_app = num();
  else if (key == "crf.w_smooth") c.crf.w_smooth = num();
  else if (key == "crf.theta_alpha") c.crf.theta_alpha = num();
  else if (key == "crf.theta_beta") c.crf.theta_beta = num();
  else if (key == "crf.theta_gamma") c.crf.theta_gamma = num();
  else if (key == "crf.iterations") c.crf.iterations = static_cast<int>(integer());
  else if (key == "crf.eps") c.crf.eps = num();
  else if (key == "train.lr") c.train.sgd.lr = num();
  else if (key == "train.momentum") c.train.sgd.momentum = num();
  else if (key == "train.weight_decay") c.train.sgd.weight_decay = num();
  else if (key == "train.patience") c.train.sgd.patience = static_cast<int>(integer());
  else if (key == "train.lr_factor") c.train.sgd.lr_factor = num();
  else if (key == "train.max_epochs") c.train.sgd.max_epochs = static_cast<int>(integer());
  else if (key == "train.steps_per_epoch") c.train.steps_per_epoch = static_cast<int>(integer());
  else if (key == "train.anchor_batch") c.train.anchor_batch = static_cast<int>(integer());
  else if (key == "train.rois_per_image") c.train.rois_per_image = static_cast<int>(integer());
  else if (key == "train.mask_rois_per_image") c.train.mask_rois_per_image = static_cast<int>(integer());
  else if (key == "train.val_slices_cap") c.train.val_slices_cap = static_cast<int>(integer());
  else if (key == "train.augment") c.train.augment = boolean();
  else if (key == "train.freeze_backbone") c.train.freeze_backbone = boolean();
  else if (key == "augment.d_min") c.augment.d_min = num();
  else if (key == "augment.d_max") c.augment.d_max = num();
  else if (key == "augment.flip_prob") c.augment.flip_prob = num();
  else if (key == "split.train") c.split.train = num();
  else if (key == "split.val") c.split.val = num();
  else if (key == "split.test") c.split.test = num();
  else if (key == "synth.n_subjects") c.synth.n_subjects = static_cast<int>(integer());
  else if (key == "synth.slices_per_subject") c.synth.slices_per_subject = static_cast<int>(integer());
  else if (key == "synth.max_lesions") c.synth.max_lesions = static_cast<int>(integer());
  else if (key == "synth.radius_min") c.synth.radius_min = num();
  else if (key == "synth.radius_max") c.synth.radius_max = num();
  else if (key == "synth.contrast_min") c.synth.contrast_min = num();
  else if (key == "synth.contrast_max") c.synth.contrast_max = num();
  else if (key == "tune.budget") c.tune.budget = static_cast<int>(integer());
  else if (key == "tune.init_points") c.tune.init_points = static_cast<int>(integer());
  else if (key == "ablate.ks") read_list(v, c.ablate.ks);
  else if (key == "ablate.epochs") c.ablate.epochs = static_cast<int>(integer());
  else throw std::invalid_argument("unknown config key: " + key);
}

inline void apply_json(PipelineConfig& c, const nlohmann::json& j, const std::string& prefix) {
  for (const auto& [key, value] : j.items()) {
    std::string full = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object())
      apply_json(c, value, full);
    else
      apply_scalar(c, full, value);
  }
}

}  // namespace cfgdetail

inline PipelineConfig parse_config_json(const std::string& text) {
  PipelineConfig c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  cfgdetail::apply_json(c, j, "");
  c.validate();
  return c;
}

// key=value lines; '#' starts a comment; lists are comma-separated.
inline PipelineConfig parse_config_kv(const std::string& text) {
  PipelineConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    nlohmann::json v;
    if (value.find(',') != std::string::npos) {
      v = nlohmann::json::array();
      std::istringstream vs(value);
      std::string item;
      while (std::getline(vs, item, ',')) v.push_back(std::stod(strip(item)));
    } else if (value == "true" || value == "false") {
      v = (value == "true");
    } else if (key == "expansion_mode") {
      v = value;
    } else {
      try {
        std::size_t pos = 0;
        double d = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        if (d == std::floor(d) && std::abs(d) < 9e15)
          v = static_cast<long long>(d);
        else
          v = d;
      } catch (const std::exception&) {
        v = value;
      }
    }
    try {
      cfgdetail::apply_scalar(c, key, v);
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

inline PipelineConfig parse_config_text(const std::string& text) {
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return parse_config_json(text);
  return parse_config_kv(text);
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  return {
      {"seed", c.seed},
      {"threads", c.threads},
      {"k", c.k},
      {"expansion_enabled", c.expansion_enabled},
      {"expansion_mode", c.expansion_mode == ExpansionMode::kCenterScale ? "center" : "literal"},
      {"proposal_cap", c.proposal_cap},
      {"nms_threshold", c.nms_threshold},
      {"detection_threshold", c.detection_threshold},
      {"roialign_samples", c.roialign_samples},
      {"delta_clip", c.delta_clip},
      {"head_hidden", c.head_hidden},
      {"anchors",
       {{"stride", c.anchors.stride}, {"scales", c.anchors.scales}, {"ratios", c.anchors.ratios}}},
      {"backbone", {{"widths", c.backbone.widths}, {"rpn_channels", c.backbone.rpn_channels}}},
      {"crf",
       {{"w_app", c.crf.w_app},
        {"w_smooth", c.crf.w_smooth},
        {"theta_alpha", c.crf.theta_alpha},
        {"theta_beta", c.crf.theta_beta},
        {"theta_gamma", c.crf.theta_gamma},
        {"iterations", c.crf.iterations},
        {"eps", c.crf.eps}}},
      {"train",
       {{"lr", c.train.sgd.lr},
        {"momentum", c.train.sgd.momentum},
        {"weight_decay", c.train.sgd.weight_decay},
        {"patience", c.train.sgd.patience},
        {"lr_factor", c.train.sgd.lr_factor},
        {"max_epochs", c.train.sgd.max_epochs},
        {"steps_per_epoch", c.train.steps_per_epoch},
        {"anchor_batch", c.train.anchor_batch},
        {"rois_per_image", c.train.rois_per_image},
        {"mask_rois_per_image", c.train.mask_rois_per_image},
        {"val_slices_cap", c.train.val_slices_cap},
        {"augment", c.train.augment},
        {"freeze_backbone", c.train.freeze_backbone}}},
      {"augment",
       {{"d_min", c.augment.d_min}, {"d_max", c.augment.d_max}, {"flip_prob", c.augment.flip_prob}}},
      {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
      {"synth",
       {{"n_subjects", c.synth.n_subjects},
        {"slices_per_subject", c.synth.slices_per_subject},
        {"max_lesions", c.synth.max_lesions},
        {"radius_min", c.synth.radius_min},
        {"radius_max", c.synth.radius_max},
        {"contrast_min", c.synth.contrast_min},
        {"contrast_max", c.synth.contrast_max}}},
      {"tune", {{"budget", c.tune.budget}, {"init_points", c.tune.init_points}}},
      {"ablate", {{"ks", c.ablate.ks}, {"epochs", c.ablate.epochs}}},
  };
}

inline void save_config(const PipelineConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot open " + path + " for writing");
  out << config_to_json(c).dump(2) << "\n";
}

}  // namespace rsrcnn
