#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "boxdeconv/boxdeconv.hpp"

namespace {

using namespace boxdeconv;

BoxMode parse_mode(const std::string& s) {
  if (s == "valid") return BoxMode::Valid;
  if (s == "circular") return BoxMode::Circular;
  throw ParseError("mode must be 'valid' or 'circular', got '" + s + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// ---- conv ----------------------------------------------------------------

struct ConvOpts {
  std::string in, out;
  int k = 1;
  std::string mode = "valid";
  int pgm_maxval = 65535;
};

void run_conv(const ConvOpts& o) {
  if (io::detect_kind(o.in) == io::FileKind::SignalText) {
    const Signal x = io::read_signal(o.in);
    const BoxOperator op{o.k, static_cast<int>(x.size()), parse_mode(o.mode)};
    const Signal y = convolve(op, x);
    io::write_signal(o.out, y);
    std::cout << "conv: n=" << x.size() << " k=" << o.k << " mode=" << o.mode
              << " -> length " << y.size() << "\n";
  } else {
    if (parse_mode(o.mode) != BoxMode::Valid) {
      throw DimensionError("conv: images support valid mode only");
    }
    const Image2D img = io::read_image(o.in);
    if (o.k < 1 || o.k > std::min(img.height, img.width)) {
      throw DimensionError("conv: need 1 <= k <= min(h, w)");
    }
    const Image2D out = convolve2d(img, o.k);
    io::write_image(o.out, out, o.pgm_maxval);
    std::cout << "conv: " << img.height << "x" << img.width << " k=" << o.k << " -> "
              << out.height << "x" << out.width << "\n";
  }
  std::cout << "wrote " << o.out << "\n";
}

// ---- recover ---------------------------------------------------------------

struct RecoverOpts {
  std::string in, out;
  int n = 0;
  int k = 1;
  std::string mode = "valid";
  std::string objective = "l1";
  double tol_zero = 1e-7;
  std::uint64_t seed = 0;  // 0 keeps the built-in tie-search seed
};

void run_recover(const RecoverOpts& o) {
  const Signal y = io::read_signal(o.in);
  const BoxOperator op{o.k, o.n, parse_mode(o.mode)};

  RecoveryConfig cfg;
  cfg.tol_zero = o.tol_zero;
  if (o.seed != 0) cfg.seed = o.seed;

  RecoveryResult res;
  if (o.objective == "l1") {
    res = basis_pursuit(op, y, cfg);
  } else if (o.objective == "tv1d") {
    res = sparse_derivative_recover(op, y, cfg);
  } else {
    throw ParseError("objective must be 'l1' or 'tv1d', got '" + o.objective + "'");
  }

  if (!o.out.empty()) io::write_signal(o.out, res.xhat);
  std::cout << "recover: n=" << o.n << " k=" << o.k << " mode=" << o.mode
            << " objective=" << o.objective << "\n";
  std::cout << "objective=" << fmt(res.l1_norm) << "\n";
  std::cout << "residual=" << fmt(res.residual) << "\n";
  std::cout << "verdict=" << to_string(res.unique) << "\n";
  if (res.certificate) {
    std::cout << "certificate: second point with equal objective found\n";
  }
  if (!o.out.empty()) std::cout << "wrote " << o.out << "\n";
}

// ---- phase -----------------------------------------------------------------

struct PhaseOpts {
  std::vector<int> n_list{24};
  std::vector<int> k_list{4};
  std::string sparsity;  // "s" or "lo:hi"; empty = 1..floor(n/k)
  int trials = 100;
  std::uint64_t seed = 1;
  std::string mode = "valid";
  bool adversarial = false;
  bool timing = false;
  std::string out;
};

void run_phase(const PhaseOpts& o) {
  ExperimentSpec spec;
  spec.n_list = o.n_list;
  spec.k_list = o.k_list;
  spec.trials = o.trials;
  spec.seed = o.seed;
  spec.mode = parse_mode(o.mode);
  spec.adversarial = o.adversarial;
  spec.timing = o.timing;
  if (!o.sparsity.empty()) {
    const auto colon = o.sparsity.find(':');
    try {
      if (colon == std::string::npos) {
        spec.sparsity_min = spec.sparsity_max = std::stoi(o.sparsity);
      } else {
        spec.sparsity_min = std::stoi(o.sparsity.substr(0, colon));
        spec.sparsity_max = std::stoi(o.sparsity.substr(colon + 1));
      }
    } catch (const std::exception&) {
      throw ParseError("--sparsity expects 's' or 'lo:hi', got '" + o.sparsity + "'");
    }
  }

  const PhaseResult result = boxdeconv::run_phase(spec);
  std::ofstream os(o.out);
  if (!os) throw ParseError("cannot open '" + o.out + "' for writing");
  write_phase_csv(os, result.records);
  if (!os.flush()) throw ParseError("write to '" + o.out + "' failed");

  std::cout << phase_summary(result.cells);
  std::cout << "wrote " << o.out << " (" << result.records.size() << " rows)\n";
}

// ---- scan ------------------------------------------------------------------

struct ScanOpts {
  std::string in, out;
  int k = 1;
  double sigma = 0.0;
  std::uint64_t seed = 1;
  int pgm_maxval = 65535;
};

void run_scan(const ScanOpts& o) {
  const Image2D target = io::read_image(o.in);
  ScanConfig cfg;
  cfg.k = o.k;
  cfg.noise_sigma = o.sigma;
  const Image2D meas = simulate_scan(target, cfg, o.seed);
  io::write_image(o.out, meas, o.pgm_maxval);
  std::cout << "scan: " << target.height << "x" << target.width << " k=" << o.k << " -> "
            << meas.height << "x" << meas.width << " sigma=" << fmt(o.sigma) << "\n";
  std::cout << "wrote " << o.out << "\n";
}

// ---- tv2d ------------------------------------------------------------------

struct Tv2dOpts {
  std::string in, out, target, log_path;
  int k = 1;
  double lambda = 1e-2;
  int iters = 500;
  double tol = 1e-9;
  double peak = 0.0;  // 0 = use the target's max value
  int pgm_maxval = 255;
};

void run_tv2d(const Tv2dOpts& o) {
  const Image2D y = io::read_image(o.in);
  const int th = y.height + o.k - 1;
  const int tw = y.width + o.k - 1;

  TvConfig cfg;
  cfg.lambda = o.lambda;
  cfg.max_iters = o.iters;
  cfg.tol = o.tol;
  const TvResult res = tv_reconstruct(y, o.k, th, tw, cfg);

  if (!o.out.empty()) io::write_image(o.out, res.x, o.pgm_maxval);
  if (!o.log_path.empty()) {
    std::ofstream os(o.log_path);
    if (!os) throw ParseError("cannot open '" + o.log_path + "' for writing");
    os << "iter,objective,raw_objective,change\n";
    for (const auto& e : res.log) {
      os << e.iter << ',' << fmt(e.objective) << ',' << fmt(e.raw_objective) << ','
         << fmt(e.change) << "\n";
    }
  }

  std::cout << "tv2d: " << y.height << "x" << y.width << " -> " << th << "x" << tw
            << " k=" << o.k << " lambda=" << fmt(o.lambda) << "\n";
  std::cout << "iterations=" << res.iterations << " converged=" << (res.converged ? 1 : 0)
            << " objective=" << fmt(res.objective) << "\n";
  if (!o.target.empty()) {
    const Image2D target = io::read_image(o.target);
    double peak = o.peak;
    if (peak <= 0.0) {
      peak = 1.0;
      for (double v : target.values) peak = std::max(peak, v);
    }
    std::cout << "psnr=" << fmt(psnr(res.x, target, peak)) << "\n";
  }
  if (!o.out.empty()) std::cout << "wrote " << o.out << "\n";
}

// ---- kernel ----------------------------------------------------------------

struct KernelOpts {
  int k = 1;
  int n = 1;
  std::string mode = "valid";
};

void run_kernel(const KernelOpts& o) {
  const auto basis = kernel_basis(o.k, o.n);
  std::cout << "kernel: k=" << o.k << " n=" << o.n << " dim=" << basis.vectors.size() << "\n";
  if (basis.vectors.empty()) {
    std::cout << "kernel is trivial\n";
    return;
  }
  const BoxOperator op{o.k, o.n, BoxMode::Valid};
  int idx = 0;
  for (const auto& v : basis.vectors) {
    ++idx;
    std::cout << "v" << idx << " = [";
    for (std::size_t i = 0; i < v.size(); ++i) std::cout << (i ? " " : "") << fmt(v[i]);
    std::cout << "]";
    const Signal av = convolve(op, v);
    std::cout << (linf_norm(av) == 0.0 ? "  Av=0 ok" : "  Av=0 FAILED") << "\n";
  }
}

// ---- option wiring and config-file merge -----------------------------------

struct AllOpts {
  ConvOpts conv;
  RecoverOpts rec;
  PhaseOpts ph;
  ScanOpts scan;
  Tv2dOpts tv;
  KernelOpts ker;
  std::string config_path;
};

// Builds the full subcommand tree. The same wiring is used twice per run: a
// probe pass (nothing required, no callbacks) that only discovers which flags
// the user typed and whether --config was given, and the real pass that
// enforces required flags and runs the selected action.
void configure_app(CLI::App& app, AllOpts& o, bool enforce_required, bool attach_callbacks) {
  app.require_subcommand(1);
  const auto req = [enforce_required](CLI::Option* opt) {
    if (enforce_required) opt->required();
    return opt;
  };
  const char* config_help = "flat key=value file supplying defaults for this subcommand";

  auto* sc = app.add_subcommand("conv", "apply the box operator to a signal or image");
  req(sc->add_option("--in", o.conv.in, "input signal/image path"));
  req(sc->add_option("--out", o.conv.out, "output path"));
  req(sc->add_option("--k", o.conv.k, "box width"));
  sc->add_option("--mode", o.conv.mode, "valid|circular (1D only)")
      ->check(CLI::IsMember({"valid", "circular"}));
  sc->add_option("--pgm-maxval", o.conv.pgm_maxval, "maxval when writing PGM output");
  sc->add_option("--config", o.config_path, config_help);
  if (attach_callbacks) sc->callback([&o]() { run_conv(o.conv); });

  auto* sr = app.add_subcommand("recover", "sparse recovery from box measurements");
  req(sr->add_option("--in", o.rec.in, "measurement signal path"));
  sr->add_option("--out", o.rec.out, "solution output path");
  req(sr->add_option("--n", o.rec.n, "signal length"));
  req(sr->add_option("--k", o.rec.k, "box width"));
  sr->add_option("--mode", o.rec.mode, "valid|circular")
      ->check(CLI::IsMember({"valid", "circular"}));
  sr->add_option("--objective", o.rec.objective, "l1|tv1d")
      ->check(CLI::IsMember({"l1", "tv1d"}));
  sr->add_option("--tol-zero", o.rec.tol_zero, "snap-to-zero threshold");
  sr->add_option("--seed", o.rec.seed, "tie-search seed (0 = built-in)");
  sr->add_option("--config", o.config_path, config_help);
  if (attach_callbacks) sr->callback([&o]() { run_recover(o.rec); });

  auto* sp = app.add_subcommand("phase", "recovery-rate sweep over (n, k, sparsity)");
  sp->add_option("--n", o.ph.n_list, "signal lengths")->delimiter(',');
  sp->add_option("--k", o.ph.k_list, "box widths")->delimiter(',');
  sp->add_option("--sparsity", o.ph.sparsity, "sparsity 's' or range 'lo:hi' (default 1..n/k)");
  sp->add_option("--trials", o.ph.trials, "trials per cell");
  sp->add_option("--seed", o.ph.seed, "root seed");
  sp->add_option("--mode", o.ph.mode, "valid|circular")
      ->check(CLI::IsMember({"valid", "circular"}));
  sp->add_flag("--adversarial", o.ph.adversarial,
               "at s = n/k with k | n, use the ambiguous indicator pair");
  sp->add_flag("--timing", o.ph.timing, "record wall time per trial (breaks byte-stability)");
  req(sp->add_option("--out", o.ph.out, "CSV output path"));
  sp->add_option("--config", o.config_path, config_help);
  if (attach_callbacks) sp->callback([&o]() { run_phase(o.ph); });

  auto* ss = app.add_subcommand("scan", "simulate a pixel-shift camera scan");
  req(ss->add_option("--in", o.scan.in, "target image path"));
  req(ss->add_option("--out", o.scan.out, "measurement output path"));
  req(ss->add_option("--k", o.scan.k, "sensor-to-target pixel ratio"));
  ss->add_option("--sigma", o.scan.sigma, "additive Gaussian noise std");
  ss->add_option("--seed", o.scan.seed, "noise seed");
  ss->add_option("--pgm-maxval", o.scan.pgm_maxval, "maxval when writing PGM output");
  ss->add_option("--config", o.config_path, config_help);
  if (attach_callbacks) ss->callback([&o]() { run_scan(o.scan); });

  auto* st = app.add_subcommand("tv2d", "TV-regularized reconstruction from a scan");
  req(st->add_option("--in", o.tv.in, "measurement image path"));
  st->add_option("--out", o.tv.out, "reconstruction output path");
  req(st->add_option("--k", o.tv.k, "box width used in the scan"));
  st->add_option("--lambda", o.tv.lambda, "TV regularization weight");
  st->add_option("--iters", o.tv.iters, "iteration cap");
  st->add_option("--tol", o.tv.tol, "relative iterate-change stop");
  st->add_option("--target", o.tv.target, "ground-truth image for PSNR");
  st->add_option("--peak", o.tv.peak, "PSNR peak (0 = target max)");
  st->add_option("--log", o.tv.log_path, "convergence log CSV path");
  st->add_option("--pgm-maxval", o.tv.pgm_maxval, "maxval when writing PGM output");
  st->add_option("--config", o.config_path, config_help);
  if (attach_callbacks) st->callback([&o]() { run_tv2d(o.tv); });

  auto* sk = app.add_subcommand("kernel", "print and verify the operator kernel basis");
  req(sk->add_option("--k", o.ker.k, "box width"));
  req(sk->add_option("--n", o.ker.n, "signal length"));
  sk->add_option("--config", o.config_path, config_help);
  if (attach_callbacks) sk->callback([&o]() { run_kernel(o.ker); });
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Flat key=value config text: blank lines and #-comments are skipped, later
// occurrences of a key win. No sections, no quoting.
std::map<std::string, std::string> load_flat_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("config: cannot open '" + path + "'");
  std::map<std::string, std::string> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError("config: expected key=value at line " + std::to_string(lineno) + " of '" +
                       path + "'");
    }
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) {
      throw ParseError("config: empty key at line " + std::to_string(lineno) + " of '" + path +
                       "'");
    }
    pairs[key] = trim(body.substr(eq + 1));
  }
  return pairs;
}

// CLI11 only reads config files attached to the root app, and the flat format
// required here has no subcommand sections, so the merge is done by hand:
// parse once to learn which flags the user typed, then re-parse with config
// values spliced in (as --key=value, after the subcommand token) for every
// key the command line left unset. Command line wins over config, config
// wins over built-in defaults.
std::vector<std::string> splice_config_args(const std::vector<std::string>& args,
                                            const std::string& subname,
                                            const CLI::App& sub_probe,
                                            const std::string& config_path) {
  const auto pairs = load_flat_config(config_path);
  std::vector<std::string> extra;
  for (const auto& [key, value] : pairs) {
    if (key == "config" || key == "help") continue;
    const CLI::Option* opt = sub_probe.get_option_no_throw("--" + key);
    if (opt == nullptr) continue;  // not a flag of this subcommand; ignore
    if (opt->count() > 0) continue;  // explicitly set on the command line
    extra.push_back("--" + key + "=" + value);
  }
  std::vector<std::string> merged;
  merged.reserve(args.size() + extra.size());
  for (std::size_t i = 0; i < args.size(); ++i) {
    merged.push_back(args[i]);
    if (args[i] == subname && i == 0) {
      merged.insert(merged.end(), extra.begin(), extra.end());
    }
  }
  return merged;
}

}  // namespace

int main(int argc, char** argv) {
  const char* description =
      "box-kernel convolution, sparse recovery, and pixel-shift imaging toolkit";
  const std::string prog = argc > 0 ? std::filesystem::path(argv[0]).filename().string()
                                    : std::string("boxdeconv");
  std::vector<std::string> args(argv + 1, argv + argc);

  // Probe pass: nothing is required and nothing runs; it only records which
  // flags were typed and whether a config file was named.
  AllOpts probe_opts;
  CLI::App probe_app{description, prog};
  configure_app(probe_app, probe_opts, /*enforce_required=*/false, /*attach_callbacks=*/false);
  std::string subname;
  const CLI::App* sub_probe = nullptr;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    probe_app.parse(reversed);
    const auto parsed = probe_app.get_subcommands();
    if (!parsed.empty()) {
      subname = parsed.front()->get_name();
      sub_probe = parsed.front();
    }
  } catch (...) {
    // Structurally bad command line; the real pass reproduces the error.
    probe_opts.config_path.clear();
  }

  AllOpts opts;
  CLI::App app{description, prog};
  configure_app(app, opts, /*enforce_required=*/true, /*attach_callbacks=*/true);

  try {
    if (!probe_opts.config_path.empty() && sub_probe != nullptr) {
      args = splice_config_args(args, subname, *sub_probe, probe_opts.config_path);
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "E_PARSE: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "E_PARSE: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "E_DIM: " << e.what() << "\n";
    return 2;
  } catch (const CapacityError& e) {
    std::cerr << "E_DIM: " << e.what() << "\n";
    return 2;
  } catch (const PreconditionError& e) {
    std::cerr << "E_DIM: " << e.what() << "\n";
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "E_INFEASIBLE: " << e.what() << " (least-squares misfit "
              << fmt(e.least_squares_residual) << ")\n";
    return 3;
  } catch (const lp::SolverError& e) {
    std::cerr << "E_SOLVER: " << e.what() << "\n";
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "E_SOLVER: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "E_INTERNAL: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
