#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "boxdeconv/boxconv.hpp"
#include "boxdeconv/errors.hpp"
#include "boxdeconv/lp.hpp"
#include "boxdeconv/rng.hpp"
#include "boxdeconv/signal.hpp"

namespace boxdeconv {

enum class Uniqueness { Unique, TieDetected, Unknown };

inline const char* to_string(Uniqueness u) {
  switch (u) {
    case Uniqueness::Unique: return "Unique";
    case Uniqueness::TieDetected: return "TieDetected";
    case Uniqueness::Unknown: return "Unknown";
  }
  return "?";
}

using SupportSet = std::vector<int>;  // sorted 0-based indices

struct RecoveryConfig {
  lp::SolverConfig solver;
  double tol_zero = 1e-7;      // |entry| below this snaps to exactly 0
  double tol_tie = 1e-7;       // equal-objective tolerance for tie witnesses
  int random_directions = 64;  // random kernel combinations tried per search
  std::uint64_t seed = 0x8d1319efba1a6d1bULL;
  bool check_ties = true;      // run the uniqueness analysis after the solve
};

struct RecoveryResult {
  Signal xhat;
  double l1_norm = 0.0;    // the minimized objective (‖xhat‖₁, or ‖D xhat‖₁
                           // for the sparse-derivative variant)
  double residual = 0.0;   // ‖op(xhat) − y‖∞
  Uniqueness unique = Uniqueness::Unknown;
  // Two distinct feasible points with equal objective; present iff
  // unique == TieDetected. First element is xhat itself.
  std::optional<std::pair<Signal, Signal>> certificate;
  lp::SolveReport report;  // the underlying LP solve, for diagnostics
};

struct TieVerdict {
  Uniqueness verdict = Uniqueness::Unknown;
  std::optional<std::pair<Signal, Signal>> certificate;
};

struct NullspaceCheck {
  bool holds = false;
  double gap = 0.0;  // max over |S| ≤ s of ‖z_S‖₁ − ‖z_{S̄}‖₁; holds iff < 0
};

namespace detail {

inline Eigen::VectorXd to_eigen(const Signal& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Signal from_eigen(const Eigen::VectorXd& v) {
  return Signal(v.data(), v.data() + v.size());
}

inline void snap_small(Signal& x, double tol_zero) {
  for (double& v : x) {
    if (std::abs(v) <= tol_zero) v = 0.0;
  }
}

// Unconstrained least-squares misfit min_x ||op(x) - y||_inf, the distance
// of y from the range of the operator.
inline double range_misfit(const Eigen::MatrixXd& M, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  const Eigen::VectorXd x = qr.solve(y);
  return (M * x - y).lpNorm<Eigen::Infinity>();
}

// Directions spanning ker(op), each scaled to unit max-norm: the stride-k
// basis for Valid mode, filtered through the circulant's extra constraints
// for Circular mode. Empty means the kernel is trivial and any feasible
// point is the only one.
inline std::vector<Signal> kernel_directions(const BoxOperator& op) {
  const auto basis = kernel_basis(op.k, op.n).vectors;
  if (basis.empty()) return {};
  if (op.mode == BoxMode::Valid) return basis;

  const Eigen::Index n = op.n;
  const Eigen::Index d = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd V(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    V.col(j) = to_eigen(basis[static_cast<std::size_t>(j)]);
  }
  const Eigen::MatrixXd BV = materialize(op) * V;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(BV);
  lu.setThreshold(1e-9);
  const Eigen::MatrixXd K = lu.kernel();  // d x q (one zero column when q = 0)
  std::vector<Signal> dirs;
  if (lu.dimensionOfKernel() == 0) return dirs;
  for (Eigen::Index j = 0; j < K.cols(); ++j) {
    Eigen::VectorXd z = V * K.col(j);
    const double zmax = z.lpNorm<Eigen::Infinity>();
    if (zmax <= 0.0) continue;
    dirs.push_back(from_eigen(z / zmax));
  }
  return dirs;
}

// Exact minimization of the piecewise-linear t -> sum_i |a_i + t*b_i| over
// the breakpoints, looking for a step of magnitude >= t_min that keeps the
// objective within tol of its value at t = 0. Returns the largest such step
// (the most clearly distinct witness), or nothing.
inline std::optional<double> equal_value_step(const Eigen::VectorXd& a,
                                              const Eigen::VectorXd& b, double tol,
                                              double t_min) {
  const double phi0 = a.lpNorm<1>();
  std::vector<double> candidates;
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (std::abs(b(i)) > 1e-12) candidates.push_back(-a(i) / b(i));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::optional<double> best;
  for (double t : candidates) {
    if (std::abs(t) < t_min || !std::isfinite(t)) continue;
    const double phi = (a + t * b).lpNorm<1>();
    if (std::abs(phi - phi0) <= tol) {
      if (!best || std::abs(t) > std::abs(*best)) best = t;
    }
  }
  return best;
}

// Shared witness search: try every direction, with the objective measured
// through the linear map L (identity for plain ℓ1, the difference matrix for
// the sparse-derivative variant).
inline std::optional<std::pair<Signal, Signal>> find_tie_witness(
    const BoxOperator& op, const Signal& xhat, const Eigen::MatrixXd& L,
    const RecoveryConfig& cfg) {
  auto dirs = kernel_directions(op);
  if (dirs.empty()) return std::nullopt;

  // Deterministic random combinations widen the search beyond the axes of
  // the kernel basis.
  Rng rng(mix_seed(cfg.seed, {static_cast<std::uint64_t>(op.n),
                              static_cast<std::uint64_t>(op.k),
                              static_cast<std::uint64_t>(op.mode == BoxMode::Circular)}));
  const std::size_t base_count = dirs.size();
  for (int r = 0; r < cfg.random_directions; ++r) {
    Signal z(static_cast<std::size_t>(op.n), 0.0);
    for (std::size_t j = 0; j < base_count; ++j) {
      const double coeff = rng.uniform(-1.0, 1.0);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += coeff * dirs[j][i];
    }
    const double zmax = linf_norm(z);
    if (zmax < 1e-12) continue;
    for (double& v : z) v /= zmax;
    dirs.push_back(std::move(z));
  }

  const Eigen::VectorXd x = to_eigen(xhat);
  const Eigen::VectorXd a = L * x;
  for (const auto& dir : dirs) {
    const Eigen::VectorXd z = to_eigen(dir);
    const Eigen::VectorXd b = L * z;
    const auto step = equal_value_step(a, b, cfg.tol_tie, 1e-6);
    if (!step) continue;
    Signal alt = from_eigen(x + *step * z);
    snap_small(alt, cfg.tol_zero);
    return std::make_pair(xhat, std::move(alt));
  }
  return std::nullopt;
}

inline Eigen::MatrixXd forward_difference(Eigen::Index n) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n - 1, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    D(i, i) = -1.0;
    D(i, i + 1) = 1.0;
  }
  return D;
}

inline lp::SolveReport solve_or_throw(const lp::LinearProgram& prog,
                                      const Eigen::MatrixXd& M, const Eigen::VectorXd& y,
                                      const lp::SolverConfig& cfg, const char* who) {
  auto rep = lp::solve_lp(prog, cfg);
  if (rep.status == lp::SolveStatus::Infeasible) {
    throw InfeasibleError(std::string(who) + ": measurements outside the operator range",
                          range_misfit(M, y));
  }
  if (rep.status != lp::SolveStatus::Optimal) {
    throw lp::SolverError(std::string(who) + ": LP solver returned " +
                              lp::to_string(rep.status),
                          rep);
  }
  return rep;
}

}  // namespace detail

// Sparsity level below which a feasible point is certifiably the unique
// solution (and the unique ℓ1 minimizer).
inline int exact_recovery_bound(int n, int k) { return n / k; }

// Indicator of the 0-based residue class r modulo k, length n.
inline Signal residue_indicator(int n, int k, int r) {
  if (k < 1 || n < 1 || r < 0 || r >= k) {
    throw DimensionError("residue_indicator: need 1 <= k, n and 0 <= r < k");
  }
  Signal x(static_cast<std::size_t>(n), 0.0);
  for (int i = r; i < n; i += k) x[static_cast<std::size_t>(i)] = 1.0;
  return x;
}

// The tightness construction: two indicator signals on adjacent residue
// classes. Both map to the all-ones measurement under either operator mode,
// and both have ℓ1 norm n/k — so sparsity exactly n/k is not recoverable.
// Requires k >= 2 and k | n.
inline std::pair<Signal, Signal> ambiguous_pair(int k, int n) {
  if (k < 2) throw PreconditionError("ambiguous_pair: need k >= 2");
  if (n < k || n % k != 0) throw PreconditionError("ambiguous_pair: need k | n");
  return {residue_indicator(n, k, 0), residue_indicator(n, k, 1)};
}

// Uniqueness analysis for a feasible point xhat: certified Unique when the
// support is small enough for the recovery theorem (or the kernel is
// trivial), TieDetected with an explicit equal-objective witness when the
// line search finds one, Unknown otherwise. Never falsely Unique.
inline TieVerdict detect_tie(const BoxOperator& op, const Signal& y, const Signal& xhat,
                             const RecoveryConfig& cfg = {}) {
  if (static_cast<int>(xhat.size()) != op.n) {
    throw DimensionError("detect_tie: xhat length must equal n");
  }
  if (static_cast<int>(y.size()) != op.output_length()) {
    throw DimensionError("detect_tie: y length must match the operator output");
  }

  TieVerdict out;
  const Signal forward = convolve(op, xhat);
  double fit = 0.0;
  for (std::size_t i = 0; i < forward.size(); ++i) fit = std::max(fit, std::abs(forward[i] - y[i]));
  const bool feasible = fit <= 1e-6 * (1.0 + linf_norm(y));

  const auto dirs_empty = detail::kernel_directions(op).empty();
  if (feasible && dirs_empty) {
    out.verdict = Uniqueness::Unique;  // trivial kernel: one feasible point total
    return out;
  }
  // The recovery theorem certifies uniqueness for any feasible point with
  // fewer than n/k nonzeros. Compare as sparsity * k < n so the real-valued
  // bound is not floored away when k does not divide n.
  const int sparsity = static_cast<int>(support(xhat, cfg.tol_zero).size());
  if (feasible && static_cast<long long>(sparsity) * op.k < op.n) {
    out.verdict = Uniqueness::Unique;
    return out;
  }

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(op.n, op.n);
  if (auto witness = detail::find_tie_witness(op, xhat, I, cfg)) {
    out.verdict = Uniqueness::TieDetected;
    out.certificate = std::move(witness);
    return out;
  }
  out.verdict = Uniqueness::Unknown;
  return out;
}

// Minimum-ℓ1 solution of op(x) = y through the sign-split LP
// min Σ(x⁺+x⁻) s.t. [M,−M][x⁺;x⁻] = y, x± ≥ 0. Entries of the solution
// with magnitude below tol_zero are snapped to exactly zero.
inline RecoveryResult basis_pursuit(const BoxOperator& op, const Signal& y,
                                    const RecoveryConfig& cfg = {}) {
  if (static_cast<int>(y.size()) != op.output_length()) {
    throw DimensionError("basis_pursuit: y length must match the operator output");
  }
  const Eigen::Index n = op.n;
  const Eigen::MatrixXd M = materialize(op);
  const Eigen::VectorXd yv = detail::to_eigen(y);

  lp::LinearProgram prog;
  prog.eq_matrix.resize(M.rows(), 2 * n);
  prog.eq_matrix << M, -M;
  prog.eq_rhs = yv;
  prog.cost = Eigen::VectorXd::Ones(2 * n);

  RecoveryResult res;
  res.report = detail::solve_or_throw(prog, M, yv, cfg.solver, "basis_pursuit");

  Signal xhat(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    xhat[static_cast<std::size_t>(i)] = res.report.solution(i) - res.report.solution(n + i);
  }
  detail::snap_small(xhat, cfg.tol_zero);

  res.xhat = std::move(xhat);
  res.l1_norm = l1_norm(res.xhat);
  const Signal forward = convolve(op, res.xhat);
  res.residual = 0.0;
  for (std::size_t i = 0; i < forward.size(); ++i) {
    res.residual = std::max(res.residual, std::abs(forward[i] - y[i]));
  }

  if (cfg.check_ties) {
    auto tie = detect_tie(op, y, res.xhat, cfg);
    res.unique = tie.verdict;
    res.certificate = std::move(tie.certificate);
  }
  return res;
}

// Worst-case nullspace gap max_{|S| <= s} ‖z_S‖₁ − ‖z_{S̄}‖₁ for a kernel
// vector z. The maximizing S takes the s largest magnitudes — for a
// (k-periodic) kernel vector those sit in the residue class of the largest
// entry, which is the structure the recovery proof exploits. Recovery of
// all s-sparse signals needs a strictly negative gap for every kernel z.
inline NullspaceCheck nullspace_property_check(int k, int n, int s, const Signal& z) {
  if (s < 0) throw PreconditionError("nullspace_property_check: need s >= 0");
  if (static_cast<int>(z.size()) != n) {
    throw DimensionError("nullspace_property_check: z length must equal n");
  }
  if (l1_norm(z) == 0.0) {
    throw PreconditionError("nullspace_property_check: z must be nonzero");
  }
  if (!in_kernel(z, k, BoxMode::Valid)) {
    throw PreconditionError("nullspace_property_check: z is not in the operator kernel");
  }
  std::vector<double> mags(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) mags[i] = std::abs(z[i]);
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  double top = 0.0;
  for (int i = 0; i < s && i < static_cast<int>(mags.size()); ++i) top += mags[static_cast<std::size_t>(i)];

  NullspaceCheck out;
  out.gap = 2.0 * top - l1_norm(z);
  out.holds = out.gap < 0.0;
  return out;
}

// Exhaustive minimum-support solver: enumerates supports by increasing
// size, solves each restricted least-squares system, and returns every
// exact solution (residual <= 1e-8) at the first size where one exists.
// Combinatorial guard: n <= 24.
inline std::vector<Signal> l0_oracle(const BoxOperator& op, const Signal& y,
                                     int max_support) {
  if (op.n > 24) throw CapacityError("l0_oracle: n > 24 is out of enumeration range");
  if (static_cast<int>(y.size()) != op.output_length()) {
    throw DimensionError("l0_oracle: y length must match the operator output");
  }
  const int n = op.n;
  max_support = std::clamp(max_support, 0, n);
  const Eigen::MatrixXd M = materialize(op);
  const Eigen::VectorXd yv = detail::to_eigen(y);
  const double tol = 1e-8;

  for (int size = 0; size <= max_support; ++size) {
    std::vector<Signal> found;
    if (size == 0) {
      if (yv.size() == 0 || yv.lpNorm<Eigen::Infinity>() <= tol) {
        found.emplace_back(static_cast<std::size_t>(n), 0.0);
      }
    } else {
      std::vector<int> comb(static_cast<std::size_t>(size));
      for (int i = 0; i < size; ++i) comb[static_cast<std::size_t>(i)] = i;
      while (true) {
        Eigen::MatrixXd Ms(M.rows(), size);
        for (int j = 0; j < size; ++j) Ms.col(j) = M.col(comb[static_cast<std::size_t>(j)]);
        const Eigen::VectorXd xs = Ms.colPivHouseholderQr().solve(yv);
        if ((Ms * xs - yv).lpNorm<Eigen::Infinity>() <= tol) {
          Signal x(static_cast<std::size_t>(n), 0.0);
          for (int j = 0; j < size; ++j) {
            x[static_cast<std::size_t>(comb[static_cast<std::size_t>(j)])] = xs(j);
          }
          found.push_back(std::move(x));
        }
        // next combination in lexicographic order
        int pos = size - 1;
        while (pos >= 0 && comb[static_cast<std::size_t>(pos)] == n - size + pos) --pos;
        if (pos < 0) break;
        ++comb[static_cast<std::size_t>(pos)];
        for (int j = pos + 1; j < size; ++j) {
          comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
        }
      }
    }
    if (!found.empty()) return found;
  }
  return {};
}

// Minimum total-variation solution: min ‖Dx‖₁ s.t. op(x) = y, with D the
// forward-difference operator. Encoded with x = x⁺−x⁻ and a d⁺/d⁻ split of
// Dx so the auxiliary pair realizes |Dx| at the optimum. No uniqueness
// theory is attached to this objective, so the verdict stays Unknown unless
// an explicit equal-objective witness turns up.
inline RecoveryResult sparse_derivative_recover(const BoxOperator& op, const Signal& y,
                                                const RecoveryConfig& cfg = {}) {
  if (static_cast<int>(y.size()) != op.output_length()) {
    throw DimensionError("sparse_derivative_recover: y length must match the operator output");
  }
  const Eigen::Index n = op.n;
  const Eigen::Index nd = n - 1;
  const Eigen::Index m = op.output_length();
  const Eigen::MatrixXd M = materialize(op);
  const Eigen::VectorXd yv = detail::to_eigen(y);
  const Eigen::MatrixXd D = nd > 0 ? detail::forward_difference(n) : Eigen::MatrixXd(0, n);

  // Variables [x⁺ x⁻ d⁺ d⁻]; rows: op(x⁺−x⁻)=y and D(x⁺−x⁻)−d⁺+d⁻=0.
  lp::LinearProgram prog;
  const Eigen::Index p = 2 * n + 2 * nd;
  prog.eq_matrix = Eigen::MatrixXd::Zero(m + nd, p);
  prog.eq_matrix.block(0, 0, m, n) = M;
  prog.eq_matrix.block(0, n, m, n) = -M;
  if (nd > 0) {
    prog.eq_matrix.block(m, 0, nd, n) = D;
    prog.eq_matrix.block(m, n, nd, n) = -D;
    prog.eq_matrix.block(m, 2 * n, nd, nd) = -Eigen::MatrixXd::Identity(nd, nd);
    prog.eq_matrix.block(m, 2 * n + nd, nd, nd) = Eigen::MatrixXd::Identity(nd, nd);
  }
  prog.eq_rhs = Eigen::VectorXd::Zero(m + nd);
  prog.eq_rhs.head(m) = yv;
  prog.cost = Eigen::VectorXd::Zero(p);
  prog.cost.tail(2 * nd).setOnes();

  // The sign-split of x carries zero cost, so the dual feasible set has an
  // empty interior and the interior-point path has no central path to
  // follow. The simplex path has no such requirement.
  lp::SolverConfig scfg = cfg.solver;
  scfg.force_simplex = true;

  RecoveryResult res;
  res.report = detail::solve_or_throw(prog, M, yv, scfg, "sparse_derivative_recover");

  Signal xhat(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    xhat[static_cast<std::size_t>(i)] = res.report.solution(i) - res.report.solution(n + i);
  }
  detail::snap_small(xhat, cfg.tol_zero);
  res.xhat = std::move(xhat);

  const Eigen::VectorXd xv = detail::to_eigen(res.xhat);
  res.l1_norm = nd > 0 ? (D * xv).lpNorm<1>() : 0.0;
  const Signal forward = convolve(op, res.xhat);
  res.residual = 0.0;
  for (std::size_t i = 0; i < forward.size(); ++i) {
    res.residual = std::max(res.residual, std::abs(forward[i] - y[i]));
  }

  res.unique = Uniqueness::Unknown;
  if (cfg.check_ties) {
    // A constant shift preserves ‖D·‖₁ outright; it is a witness whenever it
    // stays feasible.
    Signal shifted = res.xhat;
    for (double& v : shifted) v += 1.0;
    const Signal fs = convolve(op, shifted);
    double shift_fit = 0.0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      shift_fit = std::max(shift_fit, std::abs(fs[i] - y[i]));
    }
    if (shift_fit <= 1e-9 * (1.0 + linf_norm(y))) {
      res.unique = Uniqueness::TieDetected;
      res.certificate = std::make_pair(res.xhat, std::move(shifted));
      return res;
    }
    if (nd > 0) {
      if (auto witness = detail::find_tie_witness(op, res.xhat, D, cfg)) {
        res.unique = Uniqueness::TieDetected;
        res.certificate = std::move(witness);
      }
    }
  }
  return res;
}

}  // namespace boxdeconv
