#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "boxdeconv/errors.hpp"
#include "boxdeconv/signal.hpp"

namespace boxdeconv {

enum class BoxMode { Valid, Circular };

inline const char* to_string(BoxMode m) {
  return m == BoxMode::Valid ? "valid" : "circular";
}

// Sliding-sum operator: output i is the sum of the k consecutive entries of
// x starting at i. Valid keeps only fully interior windows (n-k+1 outputs);
// Circular wraps indices modulo n (n outputs). Applications never
// materialize the matrix.
//
// Index convention: everything here is 0-based with residue classes
// {0..k-1}. Formulas stated 1-based with residues {1..k} (residue 0 read as
// k) translate by subtracting one from indices and residues.
struct BoxOperator {
  int k = 1;
  int n = 1;
  BoxMode mode = BoxMode::Valid;

  BoxOperator(int k_, int n_, BoxMode mode_) : k(k_), n(n_), mode(mode_) {
    if (n < 1) throw DimensionError("BoxOperator: n must be >= 1");
    if (k < 1 || k > n) throw DimensionError("BoxOperator: need 1 <= k <= n");
  }

  int output_length() const { return mode == BoxMode::Valid ? n - k + 1 : n; }
};

namespace detail {

// Running sums accumulate O(n) rounding on very long signals; re-seeding
// the window every 2^16 steps bounds the drift without changing the
// asymptotics. Short signals never take this path.
constexpr int kReseedInterval = 1 << 16;
constexpr int kReseedMinLength = 1000000;

inline double window_sum(const Signal& x, int start, int k, int n, bool circular) {
  double s = 0.0;
  for (int j = 0; j < k; ++j) {
    int idx = start + j;
    if (circular && idx >= n) idx -= n;
    s += x[static_cast<std::size_t>(idx)];
  }
  return s;
}

}  // namespace detail

// y = Ax (Valid) or Bx (Circular) via the running-sum recurrence
// y_{i+1} = y_i + x_{i+k} - x_i seeded with y_0 = x_0 + ... + x_{k-1}.
inline Signal convolve(const BoxOperator& op, const Signal& x) {
  if (static_cast<int>(x.size()) != op.n) {
    throw DimensionError("convolve: signal length does not match operator n");
  }
  if (op.k == 1) return x;  // exact identity, no recurrence rounding
  const int n = op.n;
  const int k = op.k;
  const bool circular = op.mode == BoxMode::Circular;
  const int m = op.output_length();
  const bool reseed = n > detail::kReseedMinLength;

  Signal y(static_cast<std::size_t>(m));
  double run = detail::window_sum(x, 0, k, n, circular);
  y[0] = run;
  for (int i = 1; i < m; ++i) {
    if (reseed && (i % detail::kReseedInterval) == 0) {
      run = detail::window_sum(x, i, k, n, circular);
    } else {
      int enter = i + k - 1;
      if (circular && enter >= n) enter -= n;
      run += x[static_cast<std::size_t>(enter)] - x[static_cast<std::size_t>(i - 1)];
    }
    y[static_cast<std::size_t>(i)] = run;
  }
  return y;
}

// x = A^T y (Valid) or B^T y (Circular). The transpose spreads each
// measurement back over its k source indices, which is again a sliding sum
// over y: (A^T y)_j sums y_i for the windows i that cover j.
inline Signal adjoint_convolve(const BoxOperator& op, const Signal& y) {
  if (static_cast<int>(y.size()) != op.output_length()) {
    throw DimensionError("adjoint_convolve: length does not match operator output length");
  }
  if (op.k == 1) return y;  // exact identity, no recurrence rounding
  const int n = op.n;
  const int k = op.k;
  const int m = op.output_length();
  Signal x(static_cast<std::size_t>(n), 0.0);

  if (op.mode == BoxMode::Valid) {
    // Window of y over [j-k+1, j] clipped to [0, m).
    double run = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j < m) run += y[static_cast<std::size_t>(j)];
      if (j - k >= 0) run -= y[static_cast<std::size_t>(j - k)];
      x[static_cast<std::size_t>(j)] = run;
    }
  } else {
    // Circular window of y of length k ending at j.
    double run = 0.0;
    for (int t = 0; t < k; ++t) {
      run += y[static_cast<std::size_t>(((0 - t) % n + n) % n)];
    }
    x[0] = run;
    for (int j = 1; j < n; ++j) {
      const int leave = ((j - k) % n + n) % n;
      run += y[static_cast<std::size_t>(j)] - y[static_cast<std::size_t>(leave)];
      x[static_cast<std::size_t>(j)] = run;
    }
  }
  return x;
}

// Dense 0/1 matrix of the operator: (n-k+1) x n banded Toeplitz for Valid,
// n x n circulant for Circular. Row i has ones at columns i..i+k-1 (mod n
// for Circular). Intended for small n; the guard protects against
// accidental huge allocations.
inline Eigen::MatrixXd materialize(const BoxOperator& op, int guard = 4096) {
  if (op.n > guard) {
    throw CapacityError("materialize: n exceeds dense-storage guard");
  }
  const int m = op.output_length();
  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(m, op.n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < op.k; ++j) {
      int col = i + j;
      if (op.mode == BoxMode::Circular && col >= op.n) col -= op.n;
      mat(i, col) = 1.0;
    }
  }
  return mat;
}

// Basis of ker(A) for the Valid operator. A vector lies in the kernel iff
// it is k-periodic and one period sums to zero; the space has dimension
// k-1. The basis realizes that with integer entries: vector m (m = 1..k-1)
// has +1 on residue class 0, -1 on residue class m, 0 elsewhere, extended
// periodically over the n samples.
struct KernelBasis {
  int k = 1;
  int n = 1;
  std::vector<Signal> vectors;
};

inline KernelBasis kernel_basis(int k, int n) {
  if (k < 1 || n < 1) throw DimensionError("kernel_basis: k and n must be >= 1");
  if (k > n) throw DimensionError("kernel_basis: k must not exceed n");
  KernelBasis basis;
  basis.k = k;
  basis.n = n;
  if (k < 2) return basis;  // A is injective, kernel is trivial
  basis.vectors.reserve(static_cast<std::size_t>(k - 1));
  for (int m = 1; m < k; ++m) {
    Signal v(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
      const int r = j % k;
      if (r == 0) {
        v[static_cast<std::size_t>(j)] = 1.0;
      } else if (r == m) {
        v[static_cast<std::size_t>(j)] = -1.0;
      }
    }
    basis.vectors.push_back(std::move(v));
  }
  return basis;
}

// Kernel membership test. Valid mode: z must be k-periodic with a
// zero-sum period. Circular mode additionally requires Bz = 0, which is
// automatic when k divides n but a real restriction otherwise. The
// tolerance scales with the magnitude of z since inputs typically come out
// of floating-point solvers.
inline bool in_kernel(const Signal& z, int k, BoxMode mode) {
  const int n = static_cast<int>(z.size());
  if (k < 1) throw DimensionError("in_kernel: k must be >= 1");
  if (n < k) throw DimensionError("in_kernel: signal shorter than k");
  const double eps = 1e-9 * (1.0 + linf_norm(z));

  for (int j = 0; j + k < n; ++j) {
    if (std::abs(z[static_cast<std::size_t>(j + k)] - z[static_cast<std::size_t>(j)]) > eps) return false;
  }
  double head = 0.0;
  for (int j = 0; j < k; ++j) head += z[static_cast<std::size_t>(j)];
  if (std::abs(head) > eps) return false;

  if (mode == BoxMode::Circular) {
    const Signal r = convolve(BoxOperator(k, n, BoxMode::Circular), z);
    if (linf_norm(r) > eps) return false;
  }
  return true;
}

namespace detail {

// Valid 1D pass along each row of img (length w -> w-k+1).
inline Image2D row_pass(const Image2D& img, int k) {
  const int h = img.height;
  const int w = img.width;
  Image2D out(h, w - k + 1);
  for (int i = 0; i < h; ++i) {
    double run = 0.0;
    for (int j = 0; j < k; ++j) run += img.at(i, j);
    out.at(i, 0) = run;
    for (int j = 1; j <= w - k; ++j) {
      run += img.at(i, j + k - 1) - img.at(i, j - 1);
      out.at(i, j) = run;
    }
  }
  return out;
}

// Valid 1D pass along each column of img (height h -> h-k+1).
inline Image2D col_pass(const Image2D& img, int k) {
  const int h = img.height;
  const int w = img.width;
  Image2D out(h - k + 1, w);
  for (int j = 0; j < w; ++j) {
    double run = 0.0;
    for (int i = 0; i < k; ++i) run += img.at(i, j);
    out.at(0, j) = run;
    for (int i = 1; i <= h - k; ++i) {
      run += img.at(i + k - 1, j) - img.at(i - 1, j);
      out.at(i, j) = run;
    }
  }
  return out;
}

// Adjoint of row_pass: length w-k+1 -> w per row.
inline Image2D row_pass_adjoint(const Image2D& img, int k, int target_w) {
  const int h = img.height;
  const int m = img.width;  // target_w - k + 1
  Image2D out(h, target_w);
  for (int i = 0; i < h; ++i) {
    double run = 0.0;
    for (int j = 0; j < target_w; ++j) {
      if (j < m) run += img.at(i, j);
      if (j - k >= 0) run -= img.at(i, j - k);
      out.at(i, j) = run;
    }
  }
  return out;
}

inline Image2D col_pass_adjoint(const Image2D& img, int k, int target_h) {
  const int w = img.width;
  const int m = img.height;  // target_h - k + 1
  Image2D out(target_h, w);
  for (int j = 0; j < w; ++j) {
    double run = 0.0;
    for (int i = 0; i < target_h; ++i) {
      if (i < m) run += img.at(i, j);
      if (i - k >= 0) run -= img.at(i - k, j);
      out.at(i, j) = run;
    }
  }
  return out;
}

}  // namespace detail

// Valid 2D convolution with the k x k all-ones box: each output pixel is
// the sum of a k x k window. Separable: a row pass followed by a column
// pass, both using the 1D recurrence. Output is (h-k+1) x (w-k+1).
inline Image2D convolve2d(const Image2D& x, int k) {
  if (k < 1 || k > std::min(x.height, x.width)) {
    throw DimensionError("convolve2d: need 1 <= k <= min(height, width)");
  }
  if (k == 1) return x;  // exact identity, no recurrence rounding
  return detail::col_pass(detail::row_pass(x, k), k);
}

// Transpose of convolve2d as a linear map onto a target_h x target_w grid.
inline Image2D adjoint_convolve2d(const Image2D& y, int k, int target_h, int target_w) {
  if (k < 1 || k > std::min(target_h, target_w)) {
    throw DimensionError("adjoint_convolve2d: need 1 <= k <= min(target dims)");
  }
  if (y.height != target_h - k + 1 || y.width != target_w - k + 1) {
    throw DimensionError("adjoint_convolve2d: measurement dims do not match target dims");
  }
  if (k == 1) return y;  // exact identity, no recurrence rounding
  // convolve2d = col_pass . row_pass, so the adjoint runs the transposed
  // passes in reverse order.
  return detail::row_pass_adjoint(detail::col_pass_adjoint(y, k, target_h), k, target_w);
}

}  // namespace boxdeconv
