#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "boxdeconv/boxconv.hpp"
#include "boxdeconv/errors.hpp"
#include "boxdeconv/rng.hpp"
#include "boxdeconv/signal.hpp"

namespace boxdeconv {

struct ScanConfig {
  int k = 1;                // sensor pixel covers k x k target pixels
  double noise_sigma = 0.0; // additive Gaussian noise, 0 = noiseless
};

// Pixel-shift scan: the k x k box convolution of the target (each
// measurement pixel sums its window), plus optional Gaussian noise drawn
// deterministically from the seed in row-major order. noise_sigma == 0
// draws nothing and matches convolve2d bit for bit.
inline Image2D simulate_scan(const Image2D& target, const ScanConfig& cfg,
                             std::uint64_t seed) {
  if (cfg.k < 1) throw DimensionError("simulate_scan: k must be >= 1");
  if (cfg.noise_sigma < 0.0) throw PreconditionError("simulate_scan: noise_sigma must be >= 0");
  Image2D out = convolve2d(target, cfg.k);
  if (cfg.noise_sigma > 0.0) {
    Rng rng(seed);
    for (double& v : out.values) v += rng.gaussian(0.0, cfg.noise_sigma);
  }
  return out;
}

// The physical acquisition the scan models: a coarse sensor with k x k
// pixels photographs the target at every (a, b) phase offset, a, b in
// [0, k); interleaving the frames by offset tiles the full valid-window
// grid. Equals convolve2d (each output pixel is one coarse-sensor cell in
// exactly one frame).
inline Image2D scan_interleaved(const Image2D& target, int k) {
  if (k < 1 || k > std::min(target.height, target.width)) {
    throw DimensionError("scan_interleaved: need 1 <= k <= min(h, w)");
  }
  Image2D out;
  out.height = target.height - k + 1;
  out.width = target.width - k + 1;
  out.values.assign(static_cast<std::size_t>(out.height) * out.width, 0.0);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      // One coarse frame: disjoint k x k cells anchored at (a + i*k, b + j*k).
      for (int i = a; i + k <= target.height; i += k) {
        for (int j = b; j + k <= target.width; j += k) {
          double cell = 0.0;
          for (int di = 0; di < k; ++di) {
            for (int dj = 0; dj < k; ++dj) cell += target.at(i + di, j + dj);
          }
          out.at(i, j) = cell;
        }
      }
    }
  }
  return out;
}

// Forward differences: dx is the down-the-rows difference, (h-1) x w, and
// dy the along-the-columns one, h x (w-1).
struct GradientField {
  Image2D dx;
  Image2D dy;
};

inline GradientField gradient(const Image2D& x) {
  GradientField g;
  g.dx.height = std::max(x.height - 1, 0);
  g.dx.width = x.width;
  g.dx.values.assign(static_cast<std::size_t>(g.dx.height) * g.dx.width, 0.0);
  g.dy.height = x.height;
  g.dy.width = std::max(x.width - 1, 0);
  g.dy.values.assign(static_cast<std::size_t>(g.dy.height) * g.dy.width, 0.0);
  for (int i = 0; i + 1 < x.height; ++i) {
    for (int j = 0; j < x.width; ++j) g.dx.at(i, j) = x.at(i + 1, j) - x.at(i, j);
  }
  for (int i = 0; i < x.height; ++i) {
    for (int j = 0; j + 1 < x.width; ++j) g.dy.at(i, j) = x.at(i, j + 1) - x.at(i, j);
  }
  return g;
}

// Exact negative adjoint of gradient: <gradient(x), g> = -<x, divergence(g)>.
inline Image2D divergence(const GradientField& g) {
  const int h = g.dy.height;
  const int w = g.dx.width;
  if (g.dx.height != std::max(h - 1, 0) || g.dy.width != std::max(w - 1, 0)) {
    throw DimensionError("divergence: dx/dy dimensions are inconsistent");
  }
  Image2D out;
  out.height = h;
  out.width = w;
  out.values.assign(static_cast<std::size_t>(h) * w, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double v = 0.0;
      if (i < h - 1) v += g.dx.at(i, j);
      if (i > 0) v -= g.dx.at(i - 1, j);
      if (j < w - 1) v += g.dy.at(i, j);
      if (j > 0) v -= g.dy.at(i, j - 1);
      out.at(i, j) = v;
    }
  }
  return out;
}

struct TvConfig {
  double lambda = 1e-2;  // regularization weight for intensities in [0, 1]
  int max_iters = 500;
  double tol = 1e-9;     // relative iterate-change stopping threshold
  double tau = 0.0;      // primal step; <= 0 derives both steps from the
  double sigma = 0.0;    // operator-norm bound tau = sigma = 1/sqrt(k^4+8)
  int log_every = 10;    // checkpoint cadence for the convergence log
};

struct TvLogEntry {
  int iter = 0;
  double objective = 0.0;      // best objective seen so far (non-increasing)
  double raw_objective = 0.0;  // objective of the current iterate
  double change = 0.0;         // relative iterate change at this checkpoint
};

struct TvResult {
  Image2D x;  // best-objective iterate
  std::vector<TvLogEntry> log;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
};

// Numerical breakdown during the TV solve, with the convergence log so far.
class TvNumericalError : public NumericalError {
 public:
  TvNumericalError(const std::string& what, std::vector<TvLogEntry> partial)
      : NumericalError(what), log(std::move(partial)) {}
  std::vector<TvLogEntry> log;
};

namespace detail {

inline double tv_objective(const Image2D& x, const Image2D& y, int k, double lambda) {
  const Image2D ax = convolve2d(x, k);
  double data = 0.0;
  for (std::size_t i = 0; i < ax.values.size(); ++i) {
    const double d = ax.values[i] - y.values[i];
    data += d * d;
  }
  const GradientField g = gradient(x);
  return data + lambda * (l1_norm(g.dx.values) + l1_norm(g.dy.values));
}

}  // namespace detail

// TV-regularized deconvolution for the pixel-shift pipeline:
//   minimize  ||A x - y||_2^2 + lambda * (sum |dx| + sum |dy|)
// over target_h x target_w images, where A is the k x k box operator.
// First-order primal-dual iteration on the saddle form with both the data
// and TV terms dualized; steps satisfy tau*sigma*(k^4 + 8) <= 1, the square
// of the stacked operator-norm bound. The reported image and objective
// follow the best iterate seen, so the logged objective never increases.
inline TvResult tv_reconstruct(const Image2D& y, int k, int target_h, int target_w,
                               const TvConfig& cfg = {}) {
  if (k < 1 || k > std::min(target_h, target_w)) {
    throw DimensionError("tv_reconstruct: need 1 <= k <= min(target dims)");
  }
  if (y.height != target_h - k + 1 || y.width != target_w - k + 1) {
    throw DimensionError("tv_reconstruct: measurement dimensions do not match target dims");
  }
  if (cfg.lambda <= 0.0) throw PreconditionError("tv_reconstruct: lambda must be > 0");
  if (cfg.max_iters < 1) throw PreconditionError("tv_reconstruct: max_iters must be >= 1");
  if (cfg.tol <= 0.0) throw PreconditionError("tv_reconstruct: tol must be > 0");

  const double kk = static_cast<double>(k) * k;
  const double norm_bound_sq = kk * kk + 8.0;  // ||[A; grad]||^2 upper bound
  const double tau = cfg.tau > 0.0 ? cfg.tau : 1.0 / std::sqrt(norm_bound_sq);
  const double sigma = cfg.sigma > 0.0 ? cfg.sigma : 1.0 / std::sqrt(norm_bound_sq);

  // Back-projection warm start.
  Image2D x = adjoint_convolve2d(y, k, target_h, target_w);
  for (double& v : x.values) v /= kk;
  Image2D xbar = x;

  Image2D p = y;  // dual of the data term
  std::fill(p.values.begin(), p.values.end(), 0.0);
  GradientField q = gradient(x);  // dual of the TV term (shapes only)
  std::fill(q.dx.values.begin(), q.dx.values.end(), 0.0);
  std::fill(q.dy.values.begin(), q.dy.values.end(), 0.0);

  TvResult res;
  res.x = x;
  res.objective = detail::tv_objective(x, y, k, cfg.lambda);

  const auto checkpoint = [&](int iter, double raw, double change) {
    res.log.push_back({iter, res.objective, raw, change});
  };
  checkpoint(0, res.objective, 0.0);

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    // Dual ascent: p <- prox of the conjugated quadratic data term,
    // q <- projection onto the lambda-radius box.
    const Image2D ax = convolve2d(xbar, k);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      p.values[i] = (p.values[i] + sigma * (ax.values[i] - y.values[i])) / (1.0 + sigma / 2.0);
    }
    const GradientField gx = gradient(xbar);
    for (std::size_t i = 0; i < q.dx.values.size(); ++i) {
      q.dx.values[i] =
          std::clamp(q.dx.values[i] + sigma * gx.dx.values[i], -cfg.lambda, cfg.lambda);
    }
    for (std::size_t i = 0; i < q.dy.values.size(); ++i) {
      q.dy.values[i] =
          std::clamp(q.dy.values[i] + sigma * gx.dy.values[i], -cfg.lambda, cfg.lambda);
    }

    // Primal descent: x <- x - tau * (A'p + grad' q), grad' = -divergence.
    const Image2D atp = adjoint_convolve2d(p, k, target_h, target_w);
    const Image2D divq = divergence(q);
    double change_sq = 0.0;
    double base_sq = 0.0;
    Image2D x_new = x;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      const double step = tau * (atp.values[i] - divq.values[i]);
      x_new.values[i] = x.values[i] - step;
      change_sq += step * step;
      base_sq += x.values[i] * x.values[i];
    }
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      xbar.values[i] = 2.0 * x_new.values[i] - x.values[i];
    }
    x = std::move(x_new);

    const double raw = detail::tv_objective(x, y, k, cfg.lambda);
    if (!std::isfinite(raw)) {
      throw TvNumericalError("tv_reconstruct: objective became non-finite", res.log);
    }
    if (raw < res.objective) {
      res.objective = raw;
      res.x = x;
    }
    const double change = std::sqrt(change_sq) / (1.0 + std::sqrt(base_sq));
    res.iterations = iter;

    const bool last = iter == cfg.max_iters || change <= cfg.tol;
    if (iter % std::max(cfg.log_every, 1) == 0 || last) checkpoint(iter, raw, change);
    if (change <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

// Peak signal-to-noise ratio in dB; identical images return +infinity.
inline double psnr(const Image2D& a, const Image2D& b, double peak) {
  if (!a.same_shape(b)) throw DimensionError("psnr: image dimensions differ");
  if (peak <= 0.0) throw PreconditionError("psnr: peak must be > 0");
  if (a.values.empty()) throw DimensionError("psnr: empty images");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.values.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace boxdeconv
