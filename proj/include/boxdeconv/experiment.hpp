#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "boxdeconv/boxconv.hpp"
#include "boxdeconv/recovery.hpp"
#include "boxdeconv/rng.hpp"
#include "boxdeconv/signal.hpp"

namespace boxdeconv {

struct ExperimentSpec {
  std::vector<int> n_list{24};
  std::vector<int> k_list{4};
  int sparsity_min = 1;
  int sparsity_max = 0;  // 0 = sweep 1..floor(n/k) per cell
  int trials = 100;
  std::uint64_t seed = 1;
  BoxMode mode = BoxMode::Valid;
  bool adversarial = false;  // at s = n/k with k | n, use the ambiguous
                             // indicator construction instead of random draws
  bool timing = false;       // populate wall_time (off keeps CSV byte-stable)
  RecoveryConfig recovery;
};

struct TrialRecord {
  int n = 0;
  int k = 0;
  int sparsity = 0;
  int trial = 0;
  std::uint64_t seed = 0;  // the mixed per-trial seed actually used
  bool recovered = false;  // ||xhat - x||_inf <= 1e-6
  double l1 = 0.0;
  double wall_time = 0.0;  // seconds; 0 unless timing was requested
  std::string note;        // "ok", a verdict, or a failure class
};

struct PhaseCell {
  int n = 0, k = 0, sparsity = 0;
  int trials = 0, successes = 0;
  double rate = 0.0;
  int bound_exact = 0;          // floor(n/k): recovery guaranteed strictly below
  double bound_classical = 0.0; // n/(2(k-1)): the weaker time-frequency bound
};

struct PhaseResult {
  std::vector<TrialRecord> records;
  std::vector<PhaseCell> cells;
};

// Sparse test signal: s distinct positions, magnitudes uniform in [1, 10]
// with random signs — bounded away from zero so "recovered" is unambiguous.
inline Signal random_sparse_signal(int n, int s, Rng& rng) {
  Signal x(static_cast<std::size_t>(n), 0.0);
  for (int i : rng.sample_indices(n, s)) {
    const double mag = rng.uniform(1.0, 10.0);
    x[static_cast<std::size_t>(i)] = rng.next_bool() ? mag : -mag;
  }
  return x;
}

// Recovery-rate sweep over the (n, k, sparsity) grid. Every trial derives
// its seed as mix(root, n, k, s, trial), so results are independent of
// execution and cell order. Solver failures are recorded, never thrown.
inline PhaseResult run_phase(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw PreconditionError("run_phase: trials must be >= 1");
  PhaseResult out;

  for (int n : spec.n_list) {
    for (int k : spec.k_list) {
      if (k < 1 || k > n) continue;
      const BoxOperator op{k, n, spec.mode};
      const int s_hi = spec.sparsity_max > 0 ? std::min(spec.sparsity_max, n)
                                             : std::max(exact_recovery_bound(n, k), 1);
      for (int s = std::max(spec.sparsity_min, 0); s <= s_hi; ++s) {
        PhaseCell cell;
        cell.n = n;
        cell.k = k;
        cell.sparsity = s;
        cell.bound_exact = exact_recovery_bound(n, k);
        cell.bound_classical = k > 1 ? n / (2.0 * (k - 1))
                                     : std::numeric_limits<double>::infinity();

        for (int trial = 0; trial < spec.trials; ++trial) {
          TrialRecord rec;
          rec.n = n;
          rec.k = k;
          rec.sparsity = s;
          rec.trial = trial;
          rec.seed = mix_seed(spec.seed, {static_cast<std::uint64_t>(n),
                                          static_cast<std::uint64_t>(k),
                                          static_cast<std::uint64_t>(s),
                                          static_cast<std::uint64_t>(trial)});
          Rng rng(rec.seed);

          const bool adversarial_trial =
              spec.adversarial && k >= 2 && n % k == 0 && s == n / k;
          const Signal x = adversarial_trial ? residue_indicator(n, k, trial % k)
                                             : random_sparse_signal(n, s, rng);
          const Signal y = convolve(op, x);

          RecoveryConfig rcfg = spec.recovery;
          rcfg.check_ties = adversarial_trial;  // verdicts only where they matter

          const auto t0 = std::chrono::steady_clock::now();
          try {
            const RecoveryResult res = basis_pursuit(op, y, rcfg);
            double err = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
              err = std::max(err, std::abs(res.xhat[i] - x[i]));
            }
            rec.recovered = err <= 1e-6;
            rec.l1 = res.l1_norm;
            rec.note = adversarial_trial ? to_string(res.unique) : "ok";
          } catch (const InfeasibleError&) {
            rec.note = "infeasible";
          } catch (const lp::SolverError& e) {
            rec.note = std::string("solver:") + lp::to_string(e.report.status);
          }
          if (spec.timing) {
            rec.wall_time =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          }

          ++cell.trials;
          if (rec.recovered) ++cell.successes;
          out.records.push_back(std::move(rec));
        }
        cell.rate = static_cast<double>(cell.successes) / cell.trials;
        out.cells.push_back(cell);
      }
    }
  }
  return out;
}

namespace detail {

inline std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

// Stable schema; identical spec and seed reproduce the bytes exactly
// (wall_time stays 0 unless timing was requested).
inline void write_phase_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << "n,k,sparsity,trial,seed,recovered,l1,wall_time,note\n";
  for (const auto& r : records) {
    os << r.n << ',' << r.k << ',' << r.sparsity << ',' << r.trial << ',' << r.seed << ','
       << (r.recovered ? 1 : 0) << ',' << detail::csv_double(r.l1) << ','
       << detail::csv_double(r.wall_time) << ',' << r.note << '\n';
  }
}

inline std::string phase_summary(const std::vector<PhaseCell>& cells) {
  std::string out =
      "n     k     sparsity  trials  successes  rate      bound_exact  bound_classical\n";
  char buf[160];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof(buf), "%-5d %-5d %-9d %-7d %-10d %-9.4f %-12d %.4f\n", c.n, c.k,
                  c.sparsity, c.trials, c.successes, c.rate, c.bound_exact, c.bound_classical);
    out += buf;
  }
  return out;
}

}  // namespace boxdeconv
