#pragma once

// Gaussian-process Bayesian optimization with Expected Improvement
// (minimization form). Matern 5/2 kernel with per-dimension length-scales,
// inputs normalized to the unit cube, observations standardized before
// fitting. Kernel hyperparameters are picked by multi-start, derivative-free
// maximization of the log marginal likelihood. Deterministic under a seed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsrcnn/rng.hpp"

namespace rsrcnn {

struct SearchDim {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  bool log_scale = false;
};

struct SearchSpace {
  std::vector<SearchDim> dims;

  void validate() const {
    if (dims.empty()) throw std::invalid_argument("SearchSpace: no dimensions");
    for (const auto& d : dims) {
      if (!(d.lower < d.upper))
        throw std::invalid_argument("SearchSpace: lower must be < upper for " + d.name);
      if (d.log_scale && d.lower <= 0)
        throw std::invalid_argument("SearchSpace: log dimension needs positive bounds: " + d.name);
    }
  }

  std::size_t size() const { return dims.size(); }

  std::vector<double> to_unit(const std::vector<double>& x) const {
    std::vector<double> u(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const auto& d = dims[i];
      double v = d.log_scale
                     ? (std::log(x[i]) - std::log(d.lower)) / (std::log(d.upper) - std::log(d.lower))
                     : (x[i] - d.lower) / (d.upper - d.lower);
      u[i] = std::clamp(v, 0.0, 1.0);
    }
    return u;
  }

  std::vector<double> from_unit(const std::vector<double>& u) const {
    std::vector<double> x(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const auto& d = dims[i];
      x[i] = d.log_scale
                 ? std::exp(std::log(d.lower) + u[i] * (std::log(d.upper) - std::log(d.lower)))
                 : d.lower + u[i] * (d.upper - d.lower);
    }
    return x;
  }
};

struct GpHyperParams {
  std::vector<double> lengthscales;  // per-dimension, unit-cube units
  double sigma_f2 = 1.0;             // signal variance
  double sigma_n2 = 1e-6;            // noise variance
};

inline double matern52(const std::vector<double>& a, const std::vector<double>& b,
                       const GpHyperParams& hp) {
  double r2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = (a[i] - b[i]) / hp.lengthscales[i];
    r2 += d * d;
  }
  double r = std::sqrt(r2);
  double s = std::sqrt(5.0) * r;
  return hp.sigma_f2 * (1.0 + s + 5.0 * r2 / 3.0) * std::exp(-s);
}

// Lower-triangular Cholesky; returns false if the matrix is not positive
// definite.
inline bool cholesky(std::vector<double>& a, int n) {
  for (int j = 0; j < n; ++j) {
    double d = a[static_cast<std::size_t>(j) * n + j];
    for (int k = 0; k < j; ++k) {
      double v = a[static_cast<std::size_t>(j) * n + k];
      d -= v * v;
    }
    if (d <= 0.0) return false;
    double l = std::sqrt(d);
    a[static_cast<std::size_t>(j) * n + j] = l;
    for (int i = j + 1; i < n; ++i) {
      double s = a[static_cast<std::size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        s -= a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(j) * n + k];
      a[static_cast<std::size_t>(i) * n + j] = s / l;
    }
    for (int k = j + 1; k < n; ++k) a[static_cast<std::size_t>(j) * n + k] = 0.0;
  }
  return true;
}

inline void solve_lower(const std::vector<double>& l, int n, std::vector<double>& b) {
  for (int i = 0; i < n; ++i) {
    double s = b[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) s -= l[static_cast<std::size_t>(i) * n + k] * b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(i)] = s / l[static_cast<std::size_t>(i) * n + i];
  }
}

inline void solve_upper_transposed(const std::vector<double>& l, int n, std::vector<double>& b) {
  for (int i = n - 1; i >= 0; --i) {
    double s = b[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < n; ++k) s -= l[static_cast<std::size_t>(k) * n + i] * b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(i)] = s / l[static_cast<std::size_t>(i) * n + i];
  }
}

struct GpModel {
  std::vector<std::vector<double>> x;  // points in [0,1]^d
  std::vector<double> y;
  GpHyperParams hp;
  std::vector<double> chol;   // lower-triangular factor of K + sigma_n2*I (+ jitter)
  std::vector<double> alpha;  // (K + sigma_n2*I)^-1 y
  double jitter = 0.0;
};

// Factorizes K + sigma_n2*I, escalating jitter from 1e-10 by x10 up to 1e-6
// if the factorization fails.
inline GpModel gp_fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                      const GpHyperParams& hp) {
  if (x.empty() || x.size() != y.size())
    throw std::invalid_argument("gp_fit: need >= 1 observation with matching y");
  if (hp.lengthscales.size() != x[0].size())
    throw std::invalid_argument("gp_fit: lengthscale count must match dimension");
  for (double l : hp.lengthscales)
    if (l <= 0) throw std::invalid_argument("gp_fit: non-positive lengthscale");

  int n = static_cast<int>(x.size());
  std::vector<double> k(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      k[static_cast<std::size_t>(i) * n + j] =
          matern52(x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(j)], hp) +
          (i == j ? hp.sigma_n2 : 0.0);

  GpModel m;
  m.x = x;
  m.y = y;
  m.hp = hp;
  double jitter = 0.0;
  for (;;) {
    m.chol = k;
    if (jitter > 0.0)
      for (int i = 0; i < n; ++i) m.chol[static_cast<std::size_t>(i) * n + i] += jitter;
    if (cholesky(m.chol, n)) break;
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-6) throw std::runtime_error("gp_fit: covariance irreparably singular");
  }
  m.jitter = jitter;
  m.alpha = y;
  solve_lower(m.chol, n, m.alpha);
  solve_upper_transposed(m.chol, n, m.alpha);
  return m;
}

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

inline GpPrediction gp_predict(const GpModel& m, const std::vector<double>& x) {
  int n = static_cast<int>(m.x.size());
  std::vector<double> ks(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ks[static_cast<std::size_t>(i)] = matern52(m.x[static_cast<std::size_t>(i)], x, m.hp);
  GpPrediction p;
  for (int i = 0; i < n; ++i) p.mean += ks[static_cast<std::size_t>(i)] * m.alpha[static_cast<std::size_t>(i)];
  std::vector<double> v = ks;
  solve_lower(m.chol, n, v);
  double q = 0.0;
  for (double e : v) q += e * e;
  p.variance = std::max(0.0, m.hp.sigma_f2 - q);
  return p;
}

inline double gp_log_marginal_likelihood(const GpModel& m) {
  int n = static_cast<int>(m.x.size());
  double fit = 0.0;
  for (int i = 0; i < n; ++i) fit += m.y[static_cast<std::size_t>(i)] * m.alpha[static_cast<std::size_t>(i)];
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(m.chol[static_cast<std::size_t>(i) * n + i]);
  return -0.5 * fit - logdet - 0.5 * n * std::log(2.0 * 3.14159265358979323846);
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Minimization form: EI = (best - mu) Phi(z) + sigma phi(z), z = (best - mu)/sigma.
inline double expected_improvement(double mean, double variance, double best_so_far) {
  if (variance < 0) throw std::invalid_argument("expected_improvement: negative variance");
  double sigma = std::sqrt(variance);
  double improve = best_so_far - mean;
  if (sigma == 0.0) return std::max(0.0, improve);
  double z = improve / sigma;
  return std::max(0.0, improve * normal_cdf(z) + sigma * normal_pdf(z));
}

// ---------------------------------------------------------------------------
// Bayesian optimization loop

struct BoTraceEntry {
  int iteration = 0;
  std::vector<double> params;  // original (denormalized) space
  double objective = 0.0;      // penalized value when the raw one was non-finite
  double incumbent = 0.0;
};

struct BoResult {
  std::vector<double> best_params;
  double best_value = 0.0;
  std::vector<BoTraceEntry> trace;
};

struct BoOptions {
  int init_points = 5;
  int ei_candidates = 1000;
  int ei_refine_top = 5;
  int hyper_starts = 24;
};

namespace detail {

inline double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  int i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

inline GpHyperParams select_hyperparams(const std::vector<std::vector<double>>& x,
                                        const std::vector<double>& y, int starts, Rng& rng) {
  std::size_t d = x[0].size();
  auto eval = [&](const GpHyperParams& hp) -> double {
    try {
      return gp_log_marginal_likelihood(gp_fit(x, y, hp));
    } catch (const std::runtime_error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  GpHyperParams best;
  best.lengthscales.assign(d, 0.5);
  best.sigma_f2 = 1.0;
  best.sigma_n2 = 1e-6;
  double best_lml = eval(best);

  for (int s = 0; s < starts; ++s) {
    GpHyperParams hp;
    hp.lengthscales.resize(d);
    for (std::size_t i = 0; i < d; ++i) hp.lengthscales[i] = std::exp(rng.uniform(std::log(0.05), std::log(2.0)));
    hp.sigma_f2 = std::exp(rng.uniform(std::log(0.05), std::log(4.0)));
    hp.sigma_n2 = std::exp(rng.uniform(std::log(1e-8), std::log(0.05)));
    double lml = eval(hp);
    if (lml > best_lml) {
      best_lml = lml;
      best = hp;
    }
  }

  // coordinate refinement in log space
  double step = 0.5;
  for (int pass = 0; pass < 3; ++pass) {
    for (std::size_t i = 0; i <= d + 1; ++i) {
      for (double dir : {+1.0, -1.0}) {
        GpHyperParams hp = best;
        double factor = std::exp(dir * step);
        if (i < d)
          hp.lengthscales[i] = std::clamp(hp.lengthscales[i] * factor, 0.01, 10.0);
        else if (i == d)
          hp.sigma_f2 = std::clamp(hp.sigma_f2 * factor, 1e-3, 100.0);
        else
          hp.sigma_n2 = std::clamp(hp.sigma_n2 * factor, 1e-9, 1.0);
        double lml = eval(hp);
        if (lml > best_lml) {
          best_lml = lml;
          best = hp;
        }
      }
    }
    step *= 0.5;
  }
  return best;
}

}  // namespace detail

// Quasi-random warmup (randomly shifted Halton), then GP + EI iterations.
// The incumbent trace is monotone non-increasing; the whole loop is
// bit-reproducible under a fixed seed.
inline BoResult bo_loop(const std::function<double(const std::vector<double>&)>& objective,
                        const SearchSpace& space, int budget, std::uint64_t seed,
                        const BoOptions& opts = {}) {
  space.validate();
  if (budget < opts.init_points)
    throw std::invalid_argument("bo_loop: budget must be >= init_points");
  std::size_t d = space.size();
  Rng rng(seed);
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  if (d > std::size(kPrimes)) throw std::invalid_argument("bo_loop: too many dimensions");
  std::vector<double> shift(d);
  for (auto& s : shift) s = rng.next_double();

  BoResult result;
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  double worst_finite = -std::numeric_limits<double>::infinity();

  auto record = [&](const std::vector<double>& u, int iter) {
    auto params = space.from_unit(u);
    double raw = objective(params);
    double val = raw;
    if (!std::isfinite(raw)) {
      val = std::isfinite(worst_finite) ? worst_finite + 1.0 : 1e6;
    } else {
      worst_finite = std::max(worst_finite, raw);
    }
    xs.push_back(u);
    ys.push_back(val);
    if (result.trace.empty() || val < result.best_value) {
      result.best_value = val;
      result.best_params = params;
    }
    result.trace.push_back({iter, params, val, result.best_value});
  };

  for (int i = 0; i < opts.init_points; ++i) {
    std::vector<double> u(d);
    for (std::size_t j = 0; j < d; ++j) {
      double v = detail::halton(i + 1, kPrimes[j]) + shift[j];
      u[j] = v - std::floor(v);
    }
    record(u, i);
  }

  for (int iter = opts.init_points; iter < budget; ++iter) {
    // standardize observations for the fit
    double mean = 0.0;
    for (double v : ys) mean += v;
    mean /= static_cast<double>(ys.size());
    double var = 0.0;
    for (double v : ys) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / static_cast<double>(ys.size()));
    if (sd < 1e-12) sd = 1.0;
    std::vector<double> ystd(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) ystd[i] = (ys[i] - mean) / sd;

    GpHyperParams hp = detail::select_hyperparams(xs, ystd, opts.hyper_starts, rng);
    GpModel model = gp_fit(xs, ystd, hp);
    double best_std = *std::min_element(ystd.begin(), ystd.end());

    auto ei_at = [&](const std::vector<double>& u) {
      auto p = gp_predict(model, u);
      return expected_improvement(p.mean, p.variance, best_std);
    };

    std::vector<std::pair<double, std::vector<double>>> top;
    for (int c = 0; c < opts.ei_candidates; ++c) {
      std::vector<double> u(d);
      for (auto& v : u) v = rng.next_double();
      double ei = ei_at(u);
      top.emplace_back(ei, std::move(u));
    }
    std::stable_sort(top.begin(), top.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    top.resize(static_cast<std::size_t>(std::min<int>(opts.ei_refine_top, static_cast<int>(top.size()))));

    std::vector<double> best_u = top.front().second;
    double best_ei = top.front().first;
    for (auto& [ei0, u0] : top) {
      std::vector<double> u = u0;
      double cur = ei0;
      double step = 0.1;
      for (int pass = 0; pass < 4; ++pass) {
        for (std::size_t j = 0; j < d; ++j) {
          for (double dir : {+1.0, -1.0}) {
            std::vector<double> cand = u;
            cand[j] = std::clamp(cand[j] + dir * step, 0.0, 1.0);
            double ei = ei_at(cand);
            if (ei > cur) {
              cur = ei;
              u = cand;
            }
          }
        }
        step *= 0.5;
      }
      if (cur > best_ei) {
        best_ei = cur;
        best_u = u;
      }
    }
    record(best_u, iter);
  }
  return result;
}

}  // namespace rsrcnn
