#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "boxdeconv/errors.hpp"

namespace boxdeconv::lp {

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::IterationLimit: return "IterationLimit";
  }
  return "?";
}

// min c'u  s.t.  Eu = f, u >= 0, with dense E (m x p, m <= p).
struct LinearProgram {
  Eigen::VectorXd cost;       // p
  Eigen::MatrixXd eq_matrix;  // m x p
  Eigen::VectorXd eq_rhs;     // m
};

struct SolverConfig {
  double tol_feas = 1e-9;
  double tol_opt = 1e-9;
  int max_iters = 100;            // interior-point iterations
  int simplex_max_iters = 50000;  // pivot cap for the fallback
  bool force_simplex = false;     // skip the interior-point stage entirely
  bool allow_simplex_fallback = true;
};

struct SolveReport {
  SolveStatus status = SolveStatus::IterationLimit;
  Eigen::VectorXd solution;  // p, the primal point u
  double objective = 0.0;
  int iterations = 0;
  // ||Eu - f||_inf against the original (un-presolved) system.
  double primal_residual = std::numeric_limits<double>::infinity();
  // ||E'y + s - c||_inf with the reported duals.
  double dual_residual = std::numeric_limits<double>::infinity();
  Eigen::VectorXd dual;   // m; presolve-dropped rows carry weight 0
  Eigen::VectorXd slack;  // p
  double dual_objective = 0.0;
  double complementarity = 0.0;  // u's/p
  bool degenerate = false;       // optimum is non-unique or a degenerate vertex
  std::string note;
};

// Solver failure surfaced to callers that cannot continue without a
// solution; the offending report rides along.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, SolveReport rep)
      : std::runtime_error(what), report(std::move(rep)) {}
  SolveReport report;
};

namespace detail {

inline void validate(const LinearProgram& prog) {
  const auto m = prog.eq_matrix.rows();
  const auto p = prog.eq_matrix.cols();
  if (p < 1) throw DimensionError("solve_lp: need at least one variable");
  if (m > p) throw DimensionError("solve_lp: more equality rows than variables");
  if (prog.cost.size() != p) throw DimensionError("solve_lp: cost length mismatch");
  if (prog.eq_rhs.size() != m) throw DimensionError("solve_lp: rhs length mismatch");
  if (!prog.cost.allFinite() || !prog.eq_matrix.allFinite() || !prog.eq_rhs.allFinite()) {
    throw DimensionError("solve_lp: non-finite entries");
  }
}

struct Presolved {
  Eigen::MatrixXd E;  // r x p, numerically full row rank
  Eigen::VectorXd f;  // r
  std::vector<Eigen::Index> kept_rows;
  bool infeasible = false;
  double ls_residual = 0.0;  // min_u ||Eu - f||_inf, unconstrained
};

// Keep a maximal independent row set and check that the dropped equations
// are implied. Infeasibility here means f is not in the range of E.
inline Presolved presolve_rows(const Eigen::MatrixXd& E, const Eigen::VectorXd& f,
                               double tol_feas) {
  Presolved out;
  const Eigen::Index m = E.rows();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_rows(E.transpose());
  const Eigen::Index r = qr_rows.rank();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_ls(E);
  const Eigen::VectorXd u_ls = qr_ls.solve(f);
  out.ls_residual = (E * u_ls - f).lpNorm<Eigen::Infinity>();
  if (out.ls_residual > tol_feas * (1.0 + f.lpNorm<Eigen::Infinity>())) {
    out.infeasible = true;
    return out;
  }

  const auto& perm = qr_rows.colsPermutation().indices();
  out.kept_rows.assign(perm.data(), perm.data() + r);
  std::sort(out.kept_rows.begin(), out.kept_rows.end());

  out.E.resize(r, E.cols());
  out.f.resize(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    out.E.row(i) = E.row(out.kept_rows[static_cast<std::size_t>(i)]);
    out.f(i) = f(out.kept_rows[static_cast<std::size_t>(i)]);
  }
  (void)m;
  return out;
}

// Largest alpha in (0, 1] with v + alpha*dv >= 0.
inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

struct IpmOutcome {
  bool converged = false;
  Eigen::VectorXd x, y, s;
  int iterations = 0;
};

// Mehrotra predictor-corrector on the presolved system (full row rank).
// Returns converged=false on stall, divergence, or the iteration cap; the
// caller decides what to do next.
inline IpmOutcome interior_point(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                 const Eigen::VectorXd& c, const SolverConfig& cfg) {
  const Eigen::Index p = A.cols();
  IpmOutcome out;

  // Least-squares starting point with positivity pushes.
  Eigen::MatrixXd AAt = A * A.transpose();
  const double reg0 = 1e-12 * (1.0 + AAt.diagonal().cwiseAbs().maxCoeff());
  AAt.diagonal().array() += reg0;
  Eigen::LDLT<Eigen::MatrixXd> ldlt0(AAt);
  if (ldlt0.info() != Eigen::Success) return out;

  Eigen::VectorXd x = A.transpose() * ldlt0.solve(b);
  Eigen::VectorXd y = ldlt0.solve(A * c);
  Eigen::VectorXd s = c - A.transpose() * y;

  const double dx0 = std::max(-1.5 * x.minCoeff(), 0.0);
  const double ds0 = std::max(-1.5 * s.minCoeff(), 0.0);
  x.array() += dx0;
  s.array() += ds0;
  const double xs = x.dot(s);
  const double sum_s = s.sum();
  const double sum_x = x.sum();
  const double push_x = (sum_s > 0.0 && xs > 0.0) ? 0.5 * xs / sum_s : 1.0;
  const double push_s = (sum_x > 0.0 && xs > 0.0) ? 0.5 * xs / sum_x : 1.0;
  x.array() += push_x;
  s.array() += push_s;

  const double bnorm = 1.0 + b.lpNorm<Eigen::Infinity>();
  const double cnorm = 1.0 + c.lpNorm<Eigen::Infinity>();
  double best_merit = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    out.iterations = iter;
    const Eigen::VectorXd rb = A * x - b;
    const Eigen::VectorXd rc = A.transpose() * y + s - c;
    const double mu = x.dot(s) / static_cast<double>(p);

    const double rel_rb = rb.lpNorm<Eigen::Infinity>() / bnorm;
    const double rel_rc = rc.lpNorm<Eigen::Infinity>() / cnorm;
    const double pobj = c.dot(x);
    const double dobj = b.dot(y);
    const double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

    if (rel_rb <= cfg.tol_feas && rel_rc <= cfg.tol_opt && rel_gap <= cfg.tol_opt) {
      out.converged = true;
      out.x = x;
      out.y = y;
      out.s = s;
      return out;
    }
    if (!x.allFinite() || !s.allFinite() || !y.allFinite()) return out;
    if (x.lpNorm<Eigen::Infinity>() > 1e16 || s.lpNorm<Eigen::Infinity>() > 1e16) {
      return out;  // diverging: infeasible or unbounded, let the fallback decide
    }

    const double merit = std::max({rel_rb, rel_rc, rel_gap});
    if (merit < 0.9 * best_merit) {
      best_merit = merit;
      stall = 0;
    } else if (++stall > 12) {
      return out;
    }

    Eigen::VectorXd d2 = x.cwiseQuotient(s);
    for (Eigen::Index i = 0; i < p; ++i) d2(i) = std::min(d2(i), 1e16);

    Eigen::MatrixXd M = A * d2.asDiagonal() * A.transpose();
    double reg = 1e-14 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    for (int attempt = 0; attempt < 4; ++attempt) {
      Eigen::MatrixXd Mreg = M;
      Mreg.diagonal().array() += reg;
      ldlt.compute(Mreg);
      if (ldlt.info() == Eigen::Success) break;
      reg *= 1e4;
    }
    if (ldlt.info() != Eigen::Success) return out;

    const auto newton = [&](const Eigen::VectorXd& rxs, Eigen::VectorXd& dx,
                            Eigen::VectorXd& dy, Eigen::VectorXd& ds) {
      const Eigen::VectorXd rhs =
          -rb - A * (d2.cwiseProduct(rc) + rxs.cwiseQuotient(s));
      dy = ldlt.solve(rhs);
      dx = d2.cwiseProduct(A.transpose() * dy + rc) + rxs.cwiseQuotient(s);
      ds = (rxs - s.cwiseProduct(dx)).cwiseQuotient(x);
    };

    // Predictor.
    Eigen::VectorXd dx_aff, dy_aff, ds_aff;
    newton(-x.cwiseProduct(s), dx_aff, dy_aff, ds_aff);
    const double ap_aff = max_step(x, dx_aff);
    const double ad_aff = max_step(s, ds_aff);
    const double mu_aff =
        (x + ap_aff * dx_aff).dot(s + ad_aff * ds_aff) / static_cast<double>(p);
    double sigma = (mu > 0.0) ? std::pow(mu_aff / mu, 3.0) : 0.0;
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector on top of the affine direction.
    Eigen::VectorXd rxs = -x.cwiseProduct(s) - dx_aff.cwiseProduct(ds_aff);
    rxs.array() += sigma * mu;
    Eigen::VectorXd dx, dy, ds;
    newton(rxs, dx, dy, ds);

    constexpr double eta = 0.99995;
    const double ap = std::min(1.0, eta * max_step(x, dx));
    const double ad = std::min(1.0, eta * max_step(s, ds));
    if (ap < 1e-12 && ad < 1e-12) return out;  // stuck

    x += ap * dx;
    y += ad * dy;
    s += ad * ds;
  }
  return out;
}

struct SimplexOutcome {
  SolveStatus status = SolveStatus::IterationLimit;
  Eigen::VectorXd x, y, s;
  int iterations = 0;
  bool degenerate = false;
};

// Two-phase revised simplex with Bland's rule on the presolved system.
// The basis is refactorized every pivot; fine at fallback problem sizes and
// immune to update drift.
inline SimplexOutcome revised_simplex(const Eigen::MatrixXd& Ein, const Eigen::VectorXd& fin,
                                      const Eigen::VectorXd& c, const SolverConfig& cfg) {
  const Eigen::Index r = Ein.rows();
  const Eigen::Index p = Ein.cols();
  SimplexOutcome out;

  Eigen::MatrixXd A = Ein;
  Eigen::VectorXd b = fin;
  for (Eigen::Index i = 0; i < r; ++i) {
    if (b(i) < 0.0) {
      A.row(i) *= -1.0;
      b(i) *= -1.0;
    }
  }

  const double piv_eps = 1e-9;
  const double cost_eps = 1e-10 * (1.0 + c.lpNorm<Eigen::Infinity>());

  std::vector<Eigen::Index> basis(static_cast<std::size_t>(r));
  std::iota(basis.begin(), basis.end(), p);  // artificials

  const auto column = [&](Eigen::Index j) -> Eigen::VectorXd {
    if (j < p) return A.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(r);
    e(j - p) = 1.0;
    return e;
  };
  const auto cost_of = [&](Eigen::Index j, int phase) -> double {
    if (phase == 1) return j >= p ? 1.0 : 0.0;
    return j >= p ? 0.0 : c(j);
  };

  Eigen::MatrixXd B(r, r);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu, lu_t;
  Eigen::VectorXd xb(r);

  const auto refactor = [&]() {
    for (Eigen::Index i = 0; i < r; ++i) B.col(i) = column(basis[static_cast<std::size_t>(i)]);
    lu.compute(B);
    lu_t.compute(B.transpose());
    xb = lu.solve(b);
  };

  int iters = 0;
  std::vector<bool> is_basic(static_cast<std::size_t>(p + r), false);
  for (auto j : basis) is_basic[static_cast<std::size_t>(j)] = true;

  const auto pivot = [&](Eigen::Index row, Eigen::Index enter) {
    is_basic[static_cast<std::size_t>(basis[static_cast<std::size_t>(row)])] = false;
    basis[static_cast<std::size_t>(row)] = enter;
    is_basic[static_cast<std::size_t>(enter)] = true;
    refactor();
  };

  refactor();
  for (int phase = 1; phase <= 2; ++phase) {
    const double entry_eps = phase == 1 ? 1e-10 : cost_eps;
    while (true) {
      if (++iters > cfg.simplex_max_iters) {
        out.iterations = iters;
        return out;  // IterationLimit
      }
      Eigen::VectorXd cb(r);
      for (Eigen::Index i = 0; i < r; ++i) cb(i) = cost_of(basis[static_cast<std::size_t>(i)], phase);
      const Eigen::VectorXd y = lu_t.solve(cb);

      // Bland: smallest-index original column with negative reduced cost.
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (is_basic[static_cast<std::size_t>(j)]) continue;
        const double dj = cost_of(j, phase) - y.dot(A.col(j));
        if (dj < -entry_eps) {
          enter = j;
          break;
        }
      }
      if (enter < 0) break;  // phase optimal

      const Eigen::VectorXd w = lu.solve(A.col(enter));
      Eigen::Index leave = -1;
      double best_ratio = 0.0;
      for (Eigen::Index i = 0; i < r; ++i) {
        if (w(i) > piv_eps) {
          const double ratio = xb(i) / w(i);
          if (leave < 0 || ratio < best_ratio - 1e-12 ||
              (std::abs(ratio - best_ratio) <= 1e-12 &&
               basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
            leave = i;
            best_ratio = ratio;
          }
        }
      }
      if (leave < 0) {
        if (phase == 2) {
          out.status = SolveStatus::Unbounded;
          out.iterations = iters;
          return out;
        }
        break;  // phase-1 objective is bounded; treat as phase optimum
      }
      pivot(leave, enter);
    }

    if (phase == 1) {
      double art_sum = 0.0;
      for (Eigen::Index i = 0; i < r; ++i) {
        if (basis[static_cast<std::size_t>(i)] >= p) art_sum += std::abs(xb(i));
      }
      if (art_sum > cfg.tol_feas * (1.0 + b.lpNorm<Eigen::Infinity>()) + 1e-12) {
        out.status = SolveStatus::Infeasible;
        out.iterations = iters;
        return out;
      }
      // Drive leftover zero-level artificials out of the basis.
      for (Eigen::Index i = 0; i < r; ++i) {
        if (basis[static_cast<std::size_t>(i)] < p) continue;
        Eigen::Index found = -1;
        for (Eigen::Index j = 0; j < p && found < 0; ++j) {
          if (is_basic[static_cast<std::size_t>(j)]) continue;
          const Eigen::VectorXd wj = lu.solve(A.col(j));
          if (std::abs(wj(i)) > 1e-7) found = j;
        }
        if (found >= 0) pivot(i, found);
        // else: numerically dependent row survived presolve; the artificial
        // stays basic at level zero and phase 2 proceeds.
      }
    }
  }

  out.iterations = iters;
  out.status = SolveStatus::Optimal;
  out.x = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (basis[static_cast<std::size_t>(i)] < p) out.x(basis[static_cast<std::size_t>(i)]) = xb(i);
  }
  Eigen::VectorXd cb(r);
  for (Eigen::Index i = 0; i < r; ++i) cb(i) = cost_of(basis[static_cast<std::size_t>(i)], 2);
  out.y = lu_t.solve(cb);
  out.s = c - A.transpose() * out.y;

  // Degeneracy diagnostics: a basic variable at zero, or a nonbasic column
  // with zero reduced cost (alternative optima).
  const double zero_eps = 1e-9 * (1.0 + b.lpNorm<Eigen::Infinity>());
  for (Eigen::Index i = 0; i < r && !out.degenerate; ++i) {
    if (basis[static_cast<std::size_t>(i)] < p && std::abs(xb(i)) <= zero_eps) out.degenerate = true;
  }
  for (Eigen::Index j = 0; j < p && !out.degenerate; ++j) {
    if (!is_basic[static_cast<std::size_t>(j)] && std::abs(out.s(j)) <= cost_eps) out.degenerate = true;
  }

  // Undo the row flips in the duals.
  for (Eigen::Index i = 0; i < r; ++i) {
    if (fin(i) < 0.0) out.y(i) *= -1.0;
  }
  return out;
}

}  // namespace detail

// Solves min c'u s.t. Eu = f, u >= 0.
//
// Mehrotra predictor-corrector is the default path; a two-phase revised
// simplex settles anything the interior point cannot certify (infeasible
// and unbounded instances included). Infeasible and Unbounded are reported
// through the status, never thrown. Deterministic for fixed inputs and
// configuration.
inline SolveReport solve_lp(const LinearProgram& prog, const SolverConfig& cfg = {}) {
  detail::validate(prog);
  const Eigen::Index m = prog.eq_matrix.rows();
  const Eigen::Index p = prog.eq_matrix.cols();

  SolveReport rep;
  rep.solution = Eigen::VectorXd::Zero(p);
  rep.dual = Eigen::VectorXd::Zero(m);
  rep.slack = prog.cost;

  const auto finalize = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y_presolved,
                            const Eigen::VectorXd& s,
                            const std::vector<Eigen::Index>& kept_rows, SolveStatus status,
                            int iterations, bool degenerate, const std::string& note) {
    rep.status = status;
    rep.solution = x;
    rep.objective = prog.cost.dot(x);
    rep.iterations = iterations;
    rep.degenerate = degenerate;
    rep.note = note;
    rep.dual = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < y_presolved.size(); ++i) {
      rep.dual(kept_rows[static_cast<std::size_t>(i)]) = y_presolved(i);
    }
    rep.slack = s;
    rep.primal_residual =
        m == 0 ? 0.0 : (prog.eq_matrix * x - prog.eq_rhs).lpNorm<Eigen::Infinity>();
    rep.dual_residual =
        (prog.eq_matrix.transpose() * rep.dual + rep.slack - prog.cost).lpNorm<Eigen::Infinity>();
    rep.dual_objective = prog.eq_rhs.dot(rep.dual);
    rep.complementarity = std::abs(x.dot(rep.slack)) / static_cast<double>(p);
  };

  const auto certified = [&]() {
    const double fn = 1.0 + prog.eq_rhs.lpNorm<Eigen::Infinity>();
    const double cn = 1.0 + prog.cost.lpNorm<Eigen::Infinity>();
    if (rep.primal_residual > cfg.tol_feas * fn) return false;
    if (rep.solution.minCoeff() < -cfg.tol_feas) return false;
    if (rep.dual_residual > 10.0 * cfg.tol_opt * cn) return false;
    const double gap = std::abs(rep.objective - rep.dual_objective);
    return gap <= 10.0 * cfg.tol_opt * (1.0 + std::abs(rep.objective) + std::abs(rep.dual_objective));
  };

  // No effective constraints: u = 0 unless some cost direction is free to grow.
  const auto solve_unconstrained = [&](const std::vector<Eigen::Index>& kept) {
    if (prog.cost.minCoeff() < 0.0) {
      finalize(Eigen::VectorXd::Zero(p), Eigen::VectorXd(), prog.cost, kept,
               SolveStatus::Unbounded, 0, false, "unbounded cost direction with no constraints");
    } else {
      finalize(Eigen::VectorXd::Zero(p), Eigen::VectorXd(), prog.cost, kept,
               SolveStatus::Optimal, 0, prog.cost.minCoeff() == 0.0,
               "trivial: no effective constraints");
    }
  };

  if (m == 0) {
    solve_unconstrained({});
    return rep;
  }

  auto pre = detail::presolve_rows(prog.eq_matrix, prog.eq_rhs, cfg.tol_feas);
  if (pre.infeasible) {
    rep.status = SolveStatus::Infeasible;
    rep.primal_residual = prog.eq_rhs.lpNorm<Eigen::Infinity>();
    rep.note = "presolve: rhs outside the row space, min ||Eu-f||_inf = " +
               std::to_string(pre.ls_residual);
    return rep;
  }
  if (pre.E.rows() == 0) {
    solve_unconstrained({});
    return rep;
  }

  if (!cfg.force_simplex) {
    const auto ipm = detail::interior_point(pre.E, pre.f, prog.cost, cfg);
    if (ipm.converged) {
      finalize(ipm.x, ipm.y, ipm.s, pre.kept_rows, SolveStatus::Optimal, ipm.iterations,
               false, "interior point");
      if (certified()) {
        // Non-uniqueness shows up as an interior solution: more essentially
        // positive entries than the constraint rank, or an index where both
        // the variable and its slack vanish.
        const double scale = 1.0 + rep.solution.lpNorm<Eigen::Infinity>();
        const double sscale = 1.0 + rep.slack.lpNorm<Eigen::Infinity>();
        Eigen::Index positives = 0;
        bool both_small = false;
        for (Eigen::Index j = 0; j < p; ++j) {
          const bool xpos = rep.solution(j) > 1e-7 * scale;
          if (xpos) ++positives;
          if (!xpos && rep.slack(j) <= 1e-7 * sscale) both_small = true;
        }
        rep.degenerate = positives > pre.E.rows() || both_small;
        return rep;
      }
      if (!cfg.allow_simplex_fallback) return rep;
    } else if (!cfg.allow_simplex_fallback) {
      rep.status = SolveStatus::IterationLimit;
      rep.iterations = ipm.iterations;
      rep.note = "interior point did not converge and fallback is disabled";
      return rep;
    }
  }

  const auto sx = detail::revised_simplex(pre.E, pre.f, prog.cost, cfg);
  if (sx.status == SolveStatus::Optimal) {
    finalize(sx.x, sx.y, sx.s, pre.kept_rows, SolveStatus::Optimal, sx.iterations,
             sx.degenerate, "revised simplex");
    if (!certified()) {
      rep.status = SolveStatus::IterationLimit;
      rep.note = "simplex solution failed certification";
    }
    return rep;
  }
  rep.status = sx.status;
  rep.iterations = sx.iterations;
  rep.note = sx.status == SolveStatus::Infeasible
                 ? "simplex phase 1: no nonnegative solution"
                 : (sx.status == SolveStatus::Unbounded ? "simplex phase 2: unbounded ray"
                                                        : "simplex iteration limit");
  return rep;
}

}  // namespace boxdeconv::lp
