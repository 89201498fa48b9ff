#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "boxdeconv/boxconv.hpp"
#include "boxdeconv/rng.hpp"
#include "boxdeconv/signal.hpp"

using namespace boxdeconv;

namespace {

// Independent oracle: each output as a freshly summed window, no recurrence.
Signal convolve_oracle(const BoxOperator& op, const Signal& x) {
  const int m = op.output_length();
  Signal y(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < op.k; ++j) {
      int idx = i + j;
      if (op.mode == BoxMode::Circular && idx >= op.n) idx -= op.n;
      s += x[static_cast<std::size_t>(idx)];
    }
    y[static_cast<std::size_t>(i)] = s;
  }
  return y;
}

// Independent 2D oracle: direct k x k window sums.
Image2D convolve2d_oracle(const Image2D& x, int k) {
  Image2D y(x.height - k + 1, x.width - k + 1);
  for (int i = 0; i < y.height; ++i) {
    for (int j = 0; j < y.width; ++j) {
      double s = 0.0;
      for (int di = 0; di < k; ++di) {
        for (int dj = 0; dj < k; ++dj) s += x.at(i + di, j + dj);
      }
      y.at(i, j) = s;
    }
  }
  return y;
}

Signal random_signal(int n, Rng& rng) {
  Signal x(static_cast<std::size_t>(n));
  for (double& v : x) v = rng.uniform(-10.0, 10.0);
  return x;
}

Image2D random_image(int h, int w, Rng& rng) {
  Image2D img(h, w);
  for (double& v : img.values) v = rng.uniform(-5.0, 5.0);
  return img;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / (1.0 + std::abs(want));
}

}  // namespace

TEST_CASE("convolve matches hand-computed windows") {
  const Signal x{1, 2, 3, 4, 5, 6};

  SECTION("valid mode, n=6 k=3") {
    const Signal y = convolve(BoxOperator(3, 6, BoxMode::Valid), x);
    REQUIRE(y == Signal{6, 9, 12, 15});
  }
  SECTION("circular mode, n=6 k=3") {
    const Signal y = convolve(BoxOperator(3, 6, BoxMode::Circular), x);
    REQUIRE(y == Signal{6, 9, 12, 15, 12, 9});
  }
  SECTION("k=1 is the identity in both modes") {
    REQUIRE(convolve(BoxOperator(1, 6, BoxMode::Valid), x) == x);
    REQUIRE(convolve(BoxOperator(1, 6, BoxMode::Circular), x) == x);
  }
  SECTION("k=n sums everything") {
    REQUIRE(convolve(BoxOperator(6, 6, BoxMode::Valid), x) == Signal{21});
    const Signal yc = convolve(BoxOperator(6, 6, BoxMode::Circular), x);
    REQUIRE(yc.size() == 6);
    for (double v : yc) REQUIRE(v == 21.0);
  }
}

TEST_CASE("adjoint_convolve matches hand-computed spread") {
  // Valid n=6 k=3: column j of A is hit by windows max(0, j-k+1) .. min(j, m-1).
  const Signal y{1, 1, 1, 1};
  const Signal x = adjoint_convolve(BoxOperator(3, 6, BoxMode::Valid), y);
  REQUIRE(x == Signal{1, 2, 3, 3, 2, 1});
}

TEST_CASE("operator and adjoint agree with the dense matrix on all shapes") {
  Rng rng(0x5eedbeef);
  for (int n = 1; n <= 24; ++n) {
    for (int k = 1; k <= n; ++k) {
      for (BoxMode mode : {BoxMode::Valid, BoxMode::Circular}) {
        const BoxOperator op(k, n, mode);
        const Eigen::MatrixXd M = materialize(op);
        REQUIRE(M.rows() == op.output_length());
        REQUIRE(M.cols() == n);

        const Signal x = random_signal(n, rng);
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
        const Eigen::VectorXd want = M * xv;
        const Signal got = convolve(op, x);
        for (int i = 0; i < op.output_length(); ++i) {
          REQUIRE(rel_err(got[static_cast<std::size_t>(i)], want(i)) <= 1e-12);
        }

        const Signal y = random_signal(op.output_length(), rng);
        const Eigen::Map<const Eigen::VectorXd> yv(y.data(), op.output_length());
        const Eigen::VectorXd want_t = M.transpose() * yv;
        const Signal got_t = adjoint_convolve(op, y);
        for (int i = 0; i < n; ++i) {
          REQUIRE(rel_err(got_t[static_cast<std::size_t>(i)], want_t(i)) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("recurrence agrees with fresh window sums everywhere") {
  Rng rng(0xfeed5eed);
  for (int n : {1, 2, 3, 5, 8, 13, 21, 34, 64}) {
    for (int k = 1; k <= n; ++k) {
      for (BoxMode mode : {BoxMode::Valid, BoxMode::Circular}) {
        const BoxOperator op(k, n, mode);
        const Signal x = random_signal(n, rng);
        const Signal got = convolve(op, x);
        const Signal want = convolve_oracle(op, x);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
          REQUIRE(rel_err(got[i], want[i]) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("long-signal path keeps rounding drift in check") {
  // Long enough to cross several re-seed boundaries.
  const int n = 1'200'000;
  const int k = 5;
  Rng rng(0xabcdef01);
  Signal x(static_cast<std::size_t>(n));
  for (double& v : x) v = rng.uniform(-1.0, 1.0);

  const BoxOperator op(k, n, BoxMode::Valid);
  const Signal y = convolve(op, x);
  REQUIRE(static_cast<int>(y.size()) == n - k + 1);

  // Spot-check fresh sums at positions straddling the re-seed interval.
  for (int i : {0, 1, 65535, 65536, 65537, 131072, 500000, n - k}) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += x[static_cast<std::size_t>(i + j)];
    REQUIRE(std::abs(y[static_cast<std::size_t>(i)] - s) <= 1e-9);
  }
}

TEST_CASE("adjoint identity <Ax, y> == <x, A'y>") {
  Rng rng(0x77aa77aa);
  int draws = 0;
  while (draws < 120) {
    const int n = rng.uniform_int(1, 41);
    const int k = rng.uniform_int(1, n);
    const BoxMode mode = rng.next_bool() ? BoxMode::Valid : BoxMode::Circular;
    const BoxOperator op(k, n, mode);
    const Signal x = random_signal(n, rng);
    const Signal y = random_signal(op.output_length(), rng);
    const double lhs = dot(convolve(op, x), y);
    const double rhs = dot(x, adjoint_convolve(op, y));
    REQUIRE(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(lhs)));
    ++draws;
  }
}

TEST_CASE("valid operator has full row rank n-k+1") {
  for (int n = 1; n <= 32; ++n) {
    for (int k = 1; k <= n; ++k) {
      const Eigen::MatrixXd A = materialize(BoxOperator(k, n, BoxMode::Valid));
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
      REQUIRE(qr.rank() == n - k + 1);
    }
  }
}

TEST_CASE("circular operator rank drops by gcd structure") {
  // B is injective iff gcd(n, k) == 1; when k | n the kernel has dim k-1.
  for (int n = 2; n <= 20; ++n) {
    for (int k = 2; k <= n; ++k) {
      const Eigen::MatrixXd B = materialize(BoxOperator(k, n, BoxMode::Circular));
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
      qr.setThreshold(1e-9);
      if (std::gcd(n, k) == 1) {
        REQUIRE(qr.rank() == n);
      } else if (n % k == 0) {
        REQUIRE(qr.rank() == n - (k - 1));
      } else {
        REQUIRE(qr.rank() < n);
      }
    }
  }
}

TEST_CASE("kernel basis matches the frozen small cases") {
  SECTION("k=3 n=6") {
    const auto basis = kernel_basis(3, 6);
    REQUIRE(basis.vectors.size() == 2);
    REQUIRE(basis.vectors[0] == Signal{1, -1, 0, 1, -1, 0});
    REQUIRE(basis.vectors[1] == Signal{1, 0, -1, 1, 0, -1});
  }
  SECTION("k=2 n=4") {
    const auto basis = kernel_basis(2, 4);
    REQUIRE(basis.vectors.size() == 1);
    REQUIRE(basis.vectors[0] == Signal{1, -1, 1, -1});
  }
  SECTION("k=1 kernel is trivial") {
    REQUIRE(kernel_basis(1, 7).vectors.empty());
  }
  SECTION("period does not divide length") {
    const auto basis = kernel_basis(3, 7);
    REQUIRE(basis.vectors.size() == 2);
    REQUIRE(basis.vectors[0] == Signal{1, -1, 0, 1, -1, 0, 1});
  }
}

TEST_CASE("kernel basis vectors annihilate the valid operator exactly") {
  for (int n = 2; n <= 24; ++n) {
    for (int k = 2; k <= n; ++k) {
      const BoxOperator op(k, n, BoxMode::Valid);
      const auto basis = kernel_basis(k, n);
      REQUIRE(static_cast<int>(basis.vectors.size()) == k - 1);
      for (const auto& v : basis.vectors) {
        const Signal out = convolve(op, v);
        for (double o : out) REQUIRE(o == 0.0);  // integer arithmetic: exact
        REQUIRE(in_kernel(v, k, BoxMode::Valid));
      }
    }
  }
}

TEST_CASE("kernel basis spans the whole nullspace") {
  for (int n = 2; n <= 16; ++n) {
    for (int k = 2; k <= n; ++k) {
      const Eigen::MatrixXd A = materialize(BoxOperator(k, n, BoxMode::Valid));
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
      REQUIRE(qr.rank() + static_cast<Eigen::Index>(kernel_basis(k, n).vectors.size()) == n);

      // Basis vectors are linearly independent.
      const auto basis = kernel_basis(k, n);
      Eigen::MatrixXd V(n, basis.vectors.size());
      for (std::size_t j = 0; j < basis.vectors.size(); ++j) {
        for (int i = 0; i < n; ++i) V(i, static_cast<Eigen::Index>(j)) = basis.vectors[j][static_cast<std::size_t>(i)];
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> vqr(V);
      REQUIRE(vqr.rank() == static_cast<Eigen::Index>(basis.vectors.size()));
    }
  }
}

TEST_CASE("in_kernel separates the two modes") {
  // k-periodic zero-sum but cut off mid-period: valid yes, circular no.
  const Signal z{1, -1, 0, 1, -1};
  REQUIRE(in_kernel(z, 3, BoxMode::Valid));
  REQUIRE_FALSE(in_kernel(z, 3, BoxMode::Circular));

  // When k divides n the same pattern is circular-kernel too.
  const Signal z6{1, -1, 0, 1, -1, 0};
  REQUIRE(in_kernel(z6, 3, BoxMode::Valid));
  REQUIRE(in_kernel(z6, 3, BoxMode::Circular));

  // Not periodic.
  REQUIRE_FALSE(in_kernel(Signal{1, -1, 0, 1, 1, 0}, 3, BoxMode::Valid));
  // Periodic but period sum nonzero.
  REQUIRE_FALSE(in_kernel(Signal{1, 1, 1, 1, 1, 1}, 3, BoxMode::Valid));
}

TEST_CASE("circular kernel membership via the dense matrix") {
  Rng rng(0x12344321);
  for (int n = 2; n <= 14; ++n) {
    for (int k = 2; k <= n; ++k) {
      const Eigen::MatrixXd B = materialize(BoxOperator(k, n, BoxMode::Circular));
      // Random combinations of valid-kernel basis vectors.
      const auto basis = kernel_basis(k, n);
      for (int trial = 0; trial < 5; ++trial) {
        Signal z(static_cast<std::size_t>(n), 0.0);
        for (const auto& v : basis.vectors) {
          const double c = rng.uniform(-2.0, 2.0);
          for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] += c * v[static_cast<std::size_t>(i)];
        }
        if (linf_norm(z) < 1e-9) continue;
        const Eigen::Map<const Eigen::VectorXd> zv(z.data(), n);
        const bool matrix_says = (B * zv).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + linf_norm(z));
        REQUIRE(in_kernel(z, k, BoxMode::Circular) == matrix_says);
      }
    }
  }
}

TEST_CASE("2D convolution and adjoint") {
  Rng rng(0x2d2d2d2d);

  SECTION("matches direct window sums") {
    for (int trial = 0; trial < 20; ++trial) {
      const int h = rng.uniform_int(2, 13);
      const int w = rng.uniform_int(2, 13);
      const int k = rng.uniform_int(1, std::min(h, w));
      const Image2D x = random_image(h, w, rng);
      const Image2D got = convolve2d(x, k);
      const Image2D want = convolve2d_oracle(x, k);
      REQUIRE(got.same_shape(want));
      for (std::size_t i = 0; i < got.values.size(); ++i) {
        REQUIRE(rel_err(got.values[i], want.values[i]) <= 1e-12);
      }
    }
  }

  SECTION("adjoint identity <Ax, y> == <x, A'y>") {
    int draws = 0;
    while (draws < 120) {
      const int h = rng.uniform_int(2, 13);
      const int w = rng.uniform_int(2, 13);
      const int k = rng.uniform_int(1, std::min(h, w));
      const Image2D x = random_image(h, w, rng);
      const Image2D y = random_image(h - k + 1, w - k + 1, rng);
      const double lhs = dot(convolve2d(x, k), y);
      const double rhs = dot(x, adjoint_convolve2d(y, k, h, w));
      REQUIRE(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(lhs)));
      ++draws;
    }
  }

  SECTION("k=1 is the identity") {
    const Image2D x = random_image(4, 5, rng);
    const Image2D y = convolve2d(x, 1);
    REQUIRE(y.values == x.values);
  }
}

TEST_CASE("shape and capacity guards") {
  REQUIRE_THROWS_AS(BoxOperator(0, 5, BoxMode::Valid), DimensionError);
  REQUIRE_THROWS_AS(BoxOperator(6, 5, BoxMode::Valid), DimensionError);
  REQUIRE_THROWS_AS(BoxOperator(1, 0, BoxMode::Valid), DimensionError);

  const BoxOperator op(3, 6, BoxMode::Valid);
  REQUIRE_THROWS_AS(convolve(op, Signal{1, 2, 3}), DimensionError);
  REQUIRE_THROWS_AS(adjoint_convolve(op, Signal{1, 2, 3}), DimensionError);

  REQUIRE_THROWS_AS(materialize(BoxOperator(3, 5000, BoxMode::Valid)), CapacityError);
  REQUIRE_NOTHROW(materialize(BoxOperator(3, 5000, BoxMode::Valid), 8192));

  REQUIRE_THROWS_AS(kernel_basis(0, 5), DimensionError);
  REQUIRE_THROWS_AS(kernel_basis(6, 5), DimensionError);
  REQUIRE_THROWS_AS(in_kernel(Signal{1, 2}, 3, BoxMode::Valid), DimensionError);

  const Image2D img(4, 4);
  REQUIRE_THROWS_AS(convolve2d(img, 5), DimensionError);
  REQUIRE_THROWS_AS(adjoint_convolve2d(img, 2, 4, 4), DimensionError);  // dims mismatch
}
