#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "boxdeconv/errors.hpp"

namespace boxdeconv {

// A discrete real-valued signal of length n.
using Signal = std::vector<double>;

// Row-major grid of real intensities.
struct Image2D {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Image2D() = default;
  Image2D(int h, int w, double fill = 0.0)
      : height(h), width(w),
        values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {
    if (h < 1 || w < 1) throw DimensionError("Image2D: dimensions must be positive");
  }

  double& at(int i, int j) {
    return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)];
  }
  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)];
  }

  std::size_t size() const { return values.size(); }

  bool same_shape(const Image2D& other) const {
    return height == other.height && width == other.width;
  }
};

inline double linf_norm(const Signal& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline double l1_norm(const Signal& x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

inline double l2_norm(const Signal& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double dot(const Signal& a, const Signal& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline bool all_finite(const Signal& x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline double linf_norm(const Image2D& img) {
  double m = 0.0;
  for (double v : img.values) m = std::max(m, std::abs(v));
  return m;
}

inline double dot(const Image2D& a, const Image2D& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

inline bool all_finite(const Image2D& img) {
  for (double v : img.values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// Indices of entries with |x_i| > threshold, ascending.
inline std::vector<int> support(const Signal& x, double threshold = 0.0) {
  std::vector<int> s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) > threshold) s.push_back(static_cast<int>(i));
  }
  return s;
}

}  // namespace boxdeconv
