#include "bbsox/cli_app.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "bbsox/report.hpp"

namespace bbsox {

namespace {

using nlohmann::json;

constexpr const char* kUsage =
    "usage: bbsox <command> <config.toml> [flags]\n"
    "\n"
    "commands:\n"
    "  shoot      solve the two-point problem and export the extremal\n"
    "  check      shoot + verify the pointwise maximality/regularity conditions\n"
    "  certify    full pipeline: shooting, conditions, coercivity, advisory probes\n"
    "  lq-oracle  cross-check the coercivity verdict against the discretized Hessian\n"
    "  probe      flow-invertibility probe and conjugacy residual\n"
    "  perturb    empirical cost comparison over admissible perturbations\n"
    "\n"
    "flags:\n"
    "  --tol X     shooting residual tolerance\n"
    "  --grid N    samples per arc / LQ grid\n"
    "  --margin X  coercivity margin scale\n"
    "  --out DIR   output directory (default .)\n"
    "  --seed N    perturbation RNG seed (default 0)\n"
    "  --n N       oracle discretization size (lq-oracle, default 128)\n"
    "  --trials K  perturbation trial count (perturb/certify, default 100)\n"
    "  --json      machine-readable verdict on stdout\n";

struct Flags {
  std::string config;
  std::optional<double> tol, margin;
  std::optional<int> grid;
  std::string out = ".";
  std::uint64_t seed = 0;
  int oracle_n = 128;
  int trials = 100;
  bool json_out = false;
};

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

Flags parse_flags(const std::vector<std::string>& args, size_t start) {
  Flags f;
  auto need = [&](size_t& i) -> const std::string& {
    if (i + 1 >= args.size()) throw UsageError("flag " + args[i] + " needs a value");
    return args[++i];
  };
  for (size_t i = start; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--tol")
      f.tol = std::stod(need(i));
    else if (a == "--grid")
      f.grid = std::stoi(need(i));
    else if (a == "--margin")
      f.margin = std::stod(need(i));
    else if (a == "--out")
      f.out = need(i);
    else if (a == "--seed")
      f.seed = std::stoull(need(i));
    else if (a == "--n")
      f.oracle_n = std::stoi(need(i));
    else if (a == "--trials")
      f.trials = std::stoi(need(i));
    else if (a == "--json")
      f.json_out = true;
    else if (!a.empty() && a[0] == '-')
      throw UsageError("unknown flag: " + a);
    else if (f.config.empty())
      f.config = a;
    else
      throw UsageError("unexpected argument: " + a);
  }
  if (f.config.empty()) throw UsageError("missing config file argument");
  return f;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

template <typename WriteFn>
void write_csv(const std::filesystem::path& p, WriteFn&& fn) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  fn(out);
}

ExtremalOptions extremal_options(const ProblemConfig& cfg) {
  ExtremalOptions opts;
  opts.residual_tol = cfg.solver.tol;
  opts.samples_per_arc = cfg.solver.grid;
  return opts;
}

struct Pipeline {
  ProblemConfig cfg;
  BracketTable bt;
  PipelineResult res;

  explicit Pipeline(ProblemConfig c) : cfg(std::move(c)), bt(cfg.problem) {
    res.config = cfg;
  }

  const BBSExtremal& ext() const { return res.shooting.extremal; }

  void shoot() {
    auto t0 = std::chrono::steady_clock::now();
    res.shooting = shoot_bbs(bt, cfg.guess, extremal_options(cfg));
    res.runtimes["shooting"] = seconds_since(t0);
  }

  void conditions() {
    auto t0 = std::chrono::steady_clock::now();
    CheckOptions co;
    co.grid = cfg.solver.grid;
    res.conditions = check_conditions(bt, ext(), co);
    res.runtimes["conditions"] = seconds_since(t0);
  }

  ModifiedCost mc;
  LQData lq;
  LQFlow lqflow;

  void coercivity() {
    auto t0 = std::chrono::steady_clock::now();
    mc = build_ctilde(bt, ext());
    LQAssembleOptions ao;
    ao.grid = cfg.solver.grid;
    lq = assemble_lq(bt, ext(), mc, ao);
    lqflow = lq_hamiltonian_flow(lq, cfg.solver.grid);
    CoercivityOptions co;
    co.margin_scale = cfg.solver.margin;
    res.coercivity = coercivity_test(lq, lqflow, &mc, co);
    res.cost_case = mc.kind;
    res.has_coercivity = true;
    res.runtimes["coercivity"] = seconds_since(t0);
  }

  void oracle(int N) {
    auto t0 = std::chrono::steady_clock::now();
    res.oracle = coercivity_oracle(lq, N);
    res.has_oracle = true;
    res.runtimes["oracle"] = seconds_since(t0);
  }

  void probe() {
    auto t0 = std::chrono::steady_clock::now();
    OvermaxMachinery mach(bt, ext());
    res.probe = invertibility_probe(mach, mc);
    res.has_probe = true;
    res.runtimes["probe"] = seconds_since(t0);
  }

  void conjugacy() {
    auto t0 = std::chrono::steady_clock::now();
    OvermaxMachinery mach(bt, ext());
    res.iota = iota_conjugacy_check(mach, mc, lq, lqflow);
    res.has_iota = true;
    res.runtimes["conjugacy"] = seconds_since(t0);
  }

  void perturb(int trials, std::uint64_t seed) {
    auto t0 = std::chrono::steady_clock::now();
    res.perturb = compare_admissible(bt, ext(), trials, seed);
    res.has_perturb = true;
    res.runtimes["perturbation"] = seconds_since(t0);
  }

  void settle_certificate() {
    if (!res.conditions.all_passed())
      res.failed_stage = "conditions";
    else if (res.has_coercivity && !res.coercivity.pass)
      res.failed_stage = "coercivity";
    res.certified = res.failed_stage.empty() && res.has_coercivity;
  }
};

void emit(const Flags& f, const PipelineResult& res, std::ostream& out) {
  if (f.json_out) {
    out << verdict_json(res).dump(2) << "\n";
    return;
  }
  const BBSExtremal& ext = res.shooting.extremal;
  out << "switching times: tau1 = " << ext.tau1 << ", tau2 = " << ext.tau2
      << " (residual " << res.shooting.residual_norm << ", " << res.shooting.iterations
      << " iterations)\n";
  for (const auto& c : res.conditions.checks) {
    const char* v = c.verdict == CheckVerdict::Pass     ? "pass"
                    : c.verdict == CheckVerdict::Fail   ? "FAIL"
                                                        : "skipped";
    out << "  " << c.name << ": " << v;
    if (c.verdict != CheckVerdict::Skipped) out << " (margin " << c.margin << ")";
    out << "\n";
  }
  if (res.has_coercivity) {
    out << "coercivity: " << (res.coercivity.pass ? "pass" : "FAIL")
        << " (min zeta singular value " << res.coercivity.min_zeta_sv;
    if (res.coercivity.boundary_checked)
      out << ", boundary value " << res.coercivity.boundary_value;
    out << ")\n";
  }
  if (res.has_oracle)
    out << "oracle: min eigenvalue " << res.oracle.min_eigenvalue << " over "
        << res.oracle.nvars << " variables -> "
        << (res.oracle.coercive ? "coercive" : "not coercive") << "\n";
  if (res.has_probe)
    out << "invertibility probe: min singular value " << res.probe.min_sv << " (junction "
        << res.probe.junction_min_sv << ")" << (res.probe.flagged ? " FLAGGED" : "") << "\n";
  if (res.has_iota)
    out << "conjugacy residual: " << res.iota.max_residual << "\n";
  if (res.has_perturb) {
    out << "perturbations: min gap " << res.perturb.min_gap << " over "
        << res.perturb.trials.size() << " trials (" << res.perturb.discarded
        << " discarded)";
    if (res.perturb.has_exponent)
      out << ", dither exponent " << res.perturb.dither_exponent;
    out << "\n";
  }
  if (res.has_coercivity)
    out << (res.certified ? "certificate: certified strict strong local minimizer"
                          : "certificate: not certified (" + res.failed_stage + ")")
        << "\n";
}

int dispatch(const std::string& cmd, const Flags& f, std::ostream& out) {
  ProblemConfig cfg = load_problem_config(f.config);
  if (f.tol) cfg.solver.tol = *f.tol;
  if (f.grid) cfg.solver.grid = *f.grid;
  if (f.margin) cfg.solver.margin = *f.margin;

  std::filesystem::create_directories(f.out);
  const std::filesystem::path outdir(f.out);
  Pipeline p(std::move(cfg));

  p.shoot();
  write_csv(outdir / "extremal.csv",
            [&](std::ostream& os) { write_extremal_csv(os, p.bt, p.ext()); });

  if (cmd == "shoot") {
    p.res.config = p.cfg;
    emit(f, p.res, out);
    return 0;
  }

  p.conditions();
  if (cmd == "check") {
    p.settle_certificate();
    emit(f, p.res, out);
    return p.res.conditions.all_passed() ? 0 : 1;
  }

  p.coercivity();
  write_csv(outdir / "lq.csv", [&](std::ostream& os) { write_lq_csv(os, p.lq); });

  if (cmd == "lq-oracle") {
    p.oracle(f.oracle_n);
    p.settle_certificate();
    emit(f, p.res, out);
    return p.res.oracle.coercive == p.res.coercivity.pass ? 0 : 1;
  }

  if (cmd == "probe") {
    p.probe();
    p.conjugacy();
    write_csv(outdir / "probe.csv",
              [&](std::ostream& os) { write_probe_csv(os, p.res.probe); });
    p.settle_certificate();
    emit(f, p.res, out);
    return p.res.probe.flagged ? 1 : 0;
  }

  if (cmd == "perturb") {
    p.perturb(f.trials, f.seed);
    write_csv(outdir / "perturb.csv",
              [&](std::ostream& os) { write_perturb_csv(os, p.res.perturb); });
    p.settle_certificate();
    emit(f, p.res, out);
    return p.res.perturb.min_gap >= -1e-9 ? 0 : 1;
  }

  // certify: advisory stages cannot flip the mathematical certificate.
  p.probe();
  p.conjugacy();
  write_csv(outdir / "probe.csv", [&](std::ostream& os) { write_probe_csv(os, p.res.probe); });
  p.perturb(f.trials, f.seed);
  write_csv(outdir / "perturb.csv",
            [&](std::ostream& os) { write_perturb_csv(os, p.res.perturb); });
  p.settle_certificate();
  write_file(outdir / "verdict.json", verdict_json(p.res).dump(2) + "\n");
  emit(f, p.res, out);
  return p.res.certified ? 0 : 1;
}

int report_error(const Flags* f, std::ostream& out, std::ostream& err, int code,
                 const std::string& msg) {
  if (f && f->json_out) {
    json j;
    j["error"] = msg;
    j["exit"] = code;
    out << j.dump(2) << "\n";
  }
  err << "error: " << msg << "\n";
  return code;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
    out << kUsage;
    return args.empty() ? 2 : 0;
  }
  const std::string cmd = args[0];
  const bool known = cmd == "shoot" || cmd == "check" || cmd == "certify" ||
                     cmd == "lq-oracle" || cmd == "probe" || cmd == "perturb";
  if (!known) {
    err << "error: unknown command '" << cmd << "'\n" << kUsage;
    return 2;
  }
  std::optional<Flags> flags;
  try {
    flags = parse_flags(args, 1);
    return dispatch(cmd, *flags, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << kUsage;
    return 2;
  } catch (const ParseError& e) {
    return report_error(flags ? &*flags : nullptr, out, err, 2, e.what());
  } catch (const std::invalid_argument& e) {
    return report_error(flags ? &*flags : nullptr, out, err, 2, e.what());
  } catch (const ShootingError& e) {
    return report_error(&*flags, out, err, 3, e.what());
  } catch (const SglcDegenerateError& e) {
    return report_error(&*flags, out, err, 3, e.what());
  } catch (const AssumptionViolation& e) {
    return report_error(&*flags, out, err, 3, e.what());
  } catch (const IntegrationError& e) {
    return report_error(&*flags, out, err, 3, e.what());
  } catch (const std::exception& e) {
    return report_error(flags ? &*flags : nullptr, out, err, 3, e.what());
  }
}

}  // namespace bbsox
