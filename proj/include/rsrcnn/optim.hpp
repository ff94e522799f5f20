#pragma once

// Momentum SGD with weight decay and the plateau learning-rate schedule:
// v <- mu*v - lr*(g + wd*theta); theta <- theta + v. The learning rate is
// multiplied by lr_factor when the best validation loss has not improved for
// `patience` consecutive epochs.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rsrcnn/rng.hpp"
#include "rsrcnn/tensor.hpp"

namespace rsrcnn {

struct TrainConfig {
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  int patience = 10;
  double lr_factor = 0.5;
  int max_epochs = 100;

  void validate() const {
    if (lr <= 0 || momentum < 0 || weight_decay < 0 || patience < 1 || lr_factor <= 0 ||
        max_epochs < 1)
      throw std::invalid_argument("TrainConfig: all fields must be positive (patience >= 1)");
  }
};

class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor*> params, double lr, double momentum, double weight_decay)
      : params_(std::move(params)), lr_(lr), momentum_(momentum), wd_(weight_decay) {
    velocities_.reserve(params_.size());
    for (Tensor* p : params_) velocities_.emplace_back(p->shape);
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  // grads must parallel the params passed at construction.
  void step(const std::vector<const Tensor*>& grads) {
    if (grads.size() != params_.size()) throw std::invalid_argument("SgdMomentum: grad count");
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = *params_[k];
      const Tensor& g = *grads[k];
      Tensor& v = velocities_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        v[i] = momentum_ * v[i] - lr_ * (g[i] + wd_ * p[i]);
        p[i] += v[i];
      }
    }
  }

 private:
  std::vector<Tensor*> params_;
  std::vector<Tensor> velocities_;
  double lr_, momentum_, wd_;
};

// Counter resets on any strict improvement of the best validation loss; the
// rate halves when the counter reaches `patience`.
class PlateauScheduler {
 public:
  PlateauScheduler(int patience, double factor) : patience_(patience), factor_(factor) {}

  // Returns true when this observation triggered a rate change.
  bool observe(double val_loss, double& lr) {
    if (val_loss < best_) {
      best_ = val_loss;
      count_ = 0;
      return false;
    }
    if (++count_ >= patience_) {
      lr *= factor_;
      count_ = 0;
      return true;
    }
    return false;
  }

  double best() const { return best_; }

 private:
  int patience_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int count_ = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch
  std::vector<double> lr;          // rate in effect during the epoch
};

// Generic epoch driver. `step_fn(item, lr)` performs one optimizer step on
// training item `item` and returns its loss; `val_fn()` returns the
// validation loss. Shuffling is deterministic under the rng. Aborts on a
// non-finite loss.
inline TrainHistory sgd_train(int n_train, const TrainConfig& cfg,
                              const std::function<double(int, double)>& step_fn,
                              const std::function<double()>& val_fn, Rng& rng,
                              SgdMomentum* optimizer = nullptr,
                              const std::function<void(int)>& epoch_end = {}) {
  cfg.validate();
  if (n_train < 1) throw std::invalid_argument("sgd_train: empty training set");
  TrainHistory hist;
  PlateauScheduler sched(cfg.patience, cfg.lr_factor);
  double lr = cfg.lr;
  std::vector<int> order(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    if (optimizer) optimizer->set_lr(lr);
    double acc = 0.0;
    for (int item : order) {
      double loss = step_fn(item, lr);
      if (!std::isfinite(loss))
        throw std::runtime_error("sgd_train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", item " + std::to_string(item));
      acc += loss;
    }
    double val = val_fn();
    if (!std::isfinite(val))
      throw std::runtime_error("sgd_train: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    hist.train_loss.push_back(acc / n_train);
    hist.val_loss.push_back(val);
    hist.lr.push_back(lr);
    sched.observe(val, lr);
    if (epoch_end) epoch_end(epoch);
  }
  return hist;
}

}  // namespace rsrcnn
