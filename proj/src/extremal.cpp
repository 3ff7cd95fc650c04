#include "bbsox/extremal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace bbsox {

namespace {

// Cubic Hermite on one interval.
Eigen::VectorXd hermite(double t, double t0, double t1, const Eigen::VectorXd& y0,
                        const Eigen::VectorXd& m0, const Eigen::VectorXd& y1,
                        const Eigen::VectorXd& m1) {
  const double h = t1 - t0;
  if (h == 0.0) return y0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * y0 + h * h10 * m0 + h01 * y1 + h * h11 * m1;
}

CotangentPoint interp_arc(const ArcSamples& arc, double t) {
  const auto& ts = arc.t;
  if (ts.size() == 1) return arc.l.front();
  auto hi = std::upper_bound(ts.begin(), ts.end(), t);
  size_t i1 = std::clamp<size_t>(hi - ts.begin(), 1, ts.size() - 1);
  size_t i0 = i1 - 1;
  const int n = arc.l[i0].dim();
  Eigen::VectorXd y0(2 * n), y1(2 * n), m0(2 * n), m1(2 * n);
  y0 << arc.l[i0].x, arc.l[i0].p;
  y1 << arc.l[i1].x, arc.l[i1].p;
  m0 << arc.xdot[i0], arc.pdot[i0];
  m1 << arc.xdot[i1], arc.pdot[i1];
  return CotangentPoint::unpack(hermite(t, ts[i0], ts[i1], y0, m0, y1, m1));
}

}  // namespace

int BBSExtremal::arc_index(double t) const {
  if (t < tau1) return 0;
  if (t < tau2) return 1;
  return 2;
}

CotangentPoint BBSExtremal::state_at(double t) const {
  switch (arc_index(t)) {
    case 0: return interp_arc(arc1, t);
    case 1: return interp_arc(arc2, t);
    default: return interp_arc(arc3, t);
  }
}

bool ConditionReport::all_passed() const {
  for (const auto& c : checks)
    if (c.verdict == CheckVerdict::Fail) return false;
  return true;
}

namespace {

// Adjoint rhs of the singular feedback field h2 + u_S(l) f1, with SGLC and
// saturation monitoring.
struct SingularRhs {
  const BracketTable& bt;
  double sglc_floor;
  double saturation_margin;
  mutable bool saturated = false;
  mutable double worst_u = 0.5;

  Eigen::VectorXd operator()(double, const Eigen::VectorXd& y) const {
    CotangentPoint l = CotangentPoint::unpack(y);
    const double Lv = bt.L(l);
    if (std::abs(Lv) < sglc_floor)
      throw SglcDegenerateError("L(l) = " + std::to_string(Lv) +
                                " crossed the SGLC floor on the singular arc");
    const double u = bt.H232(l) / Lv;
    if (u < saturation_margin || u > 1.0 - saturation_margin) {
      saturated = true;
      if (std::abs(u - 0.5) > std::abs(worst_u - 0.5)) worst_u = u;
    }
    const int n = l.dim();
    const SmoothField& h2 = bt.problem().h2();
    const SmoothField& f1 = bt.field("f");
    Eigen::MatrixXd J = h2.jacobian(l.x) + u * f1.jacobian(l.x);
    Eigen::VectorXd dy(2 * n);
    dy.head(n) = h2(l.x) + u * f1(l.x);
    dy.tail(n) = -J.transpose() * l.p;
    return dy;
  }
};

ArcSamples sample_arc(const OdeRhs& rhs, const BracketTable& bt, const CotangentPoint& from,
                      double t_from, double t_to, int samples, bool singular,
                      const OdeOptions& ode) {
  // Integrates from t_from to t_to (backward) but stores ascending in time.
  std::vector<double> times = linspace(t_from, t_to, samples);
  auto ys = integrate_sampled(rhs, t_from, t_to, from.packed(), times, ode);
  ArcSamples arc;
  const size_t m = times.size();
  arc.t.resize(m);
  arc.l.resize(m);
  arc.xdot.resize(m);
  arc.pdot.resize(m);
  arc.u.assign(m, 0.0);
  for (size_t i = 0; i < m; ++i) {
    const size_t j = m - 1 - i;  // reverse into ascending order
    arc.t[j] = times[i];
    CotangentPoint l = CotangentPoint::unpack(ys[i]);
    Eigen::VectorXd dy = rhs(times[i], ys[i]);
    const int n = l.dim();
    arc.xdot[j] = dy.head(n);
    arc.pdot[j] = dy.tail(n);
    if (singular) arc.u[j] = bt.singular_control(l);
    arc.l[j] = std::move(l);
  }
  return arc;
}

}  // namespace

BBSExtremal integrate_reference(const BracketTable& bt, const CotangentPoint& lT, double tau1,
                                double tau2, const ExtremalOptions& opts) {
  const ControlAffineProblem& prob = bt.problem();
  const double T = prob.T;
  if (!(0 < tau1 && tau1 <= tau2 && tau2 <= T))
    throw std::invalid_argument("integrate_reference requires 0 < tau1 <= tau2 <= T");

  BBSExtremal ext;
  ext.tau1 = tau1;
  ext.tau2 = tau2;
  ext.T = T;
  ext.lT = lT;

  SingularRhs srhs{bt, opts.sglc_floor, opts.saturation_margin};
  OdeRhs singular_rhs = [&srhs](double t, const Eigen::VectorXd& y) { return srhs(t, y); };
  if (tau2 < T) {
    ext.arc3 = sample_arc(singular_rhs, bt, lT, T, tau2, opts.samples_per_arc, true, opts.ode);
  } else {
    // Degenerate singular arc of zero length.
    ext.arc3.t = {T};
    ext.arc3.l = {lT};
    Eigen::VectorXd dy = singular_rhs(T, lT.packed());
    ext.arc3.xdot = {dy.head(lT.dim())};
    ext.arc3.pdot = {dy.tail(lT.dim())};
    ext.arc3.u = {bt.singular_control(lT)};
  }
  if (srhs.saturated) {
    std::ostringstream w;
    w << "singular control left [" << opts.saturation_margin << ", "
      << 1.0 - opts.saturation_margin << "]: worst value " << srhs.worst_u;
    ext.warnings.push_back(w.str());
  }
  ext.l2 = ext.arc3.l.front();

  OdeRhs rhs2 = adjoint_rhs(TimeField::from(prob.h2()));
  ext.arc2 = sample_arc(rhs2, bt, ext.l2, tau2, tau1, opts.samples_per_arc, false, opts.ode);
  ext.l1 = ext.arc2.l.front();

  OdeRhs rhs1 = adjoint_rhs(TimeField::from(prob.h1()));
  ext.arc1 = sample_arc(rhs1, bt, ext.l1, tau1, 0.0, opts.samples_per_arc, false, opts.ode);
  ext.l0 = ext.arc1.l.front();
  return ext;
}

namespace {

// Endpoint-only backward pass for the shooting residuals (no sampling).
struct EndpointPass {
  CotangentPoint l_tau1;  // state entering the first bang arc
  CotangentPoint l_0;
};

EndpointPass backward_endpoints(const BracketTable& bt, const CotangentPoint& lT, double tau1,
                                double tau2, const ExtremalOptions& opts) {
  const ControlAffineProblem& prob = bt.problem();
  SingularRhs srhs{bt, opts.sglc_floor, opts.saturation_margin};
  OdeRhs singular_rhs = [&srhs](double t, const Eigen::VectorXd& y) { return srhs(t, y); };
  Eigen::VectorXd y = lT.packed();
  if (tau2 < prob.T) y = integrate(singular_rhs, prob.T, tau2, y, opts.ode);
  y = integrate(adjoint_rhs(TimeField::from(prob.h2())), tau2, tau1, y, opts.ode);
  EndpointPass out;
  out.l_tau1 = CotangentPoint::unpack(y);
  y = integrate(adjoint_rhs(TimeField::from(prob.h1())), tau1, 0.0, y, opts.ode);
  out.l_0 = CotangentPoint::unpack(y);
  return out;
}

}  // namespace

ShootingResult shoot_bbs(const BracketTable& bt, const ShootingGuess& guess,
                         const ExtremalOptions& opts) {
  const ControlAffineProblem& prob = bt.problem();
  const int n = prob.dim();
  if (guess.x_T.size() != n) throw std::invalid_argument("shooting guess x_T has wrong dimension");
  if (!(0 < guess.tau1 && guess.tau1 < guess.tau2 && guess.tau2 < prob.T))
    throw std::invalid_argument("shooting guess must satisfy 0 < tau1 < tau2 < T");

  const double w_state = 1.0 / std::max(1.0, prob.x0.lpNorm<Eigen::Infinity>());

  auto residual = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    Eigen::VectorXd x_T = z.head(n);
    double t1 = z[n], t2 = z[n + 1];
    if (!(0 < t1 && t1 < t2 && t2 < prob.T))
      throw ShootingError("iterate left the admissible region 0 < tau1 < tau2 < T");
    CotangentPoint lT(x_T, -prob.cost.gradient(x_T));
    const double w_brk =
        1.0 / std::max(1.0, std::max(lT.x.lpNorm<Eigen::Infinity>(),
                                     lT.p.lpNorm<Eigen::Infinity>()));
    EndpointPass ep = backward_endpoints(bt, lT, t1, t2, opts);
    Eigen::VectorXd r(n + 3);
    r.head(n) = w_state * (ep.l_0.x - prob.x0);
    r[n] = w_brk * bt.F1(lT);
    r[n + 1] = w_brk * bt.H23(lT);
    r[n + 2] = w_brk * (lifted_value(prob.h1(), ep.l_tau1) - lifted_value(prob.h2(), ep.l_tau1));
    return r;
  };

  // Fallback residual for rough guesses whose full backward pass diverges:
  // the bang arcs are control-determined, so the state is simulated forward
  // from x0 (the stable direction) and matched at tau2 against a backward
  // pass that only covers the singular arc.  The covector for the switch
  // condition is transported backward along the matched arc.  Both residuals
  // vanish exactly at the same solutions.
  auto residual_hybrid = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    Eigen::VectorXd x_T = z.head(n);
    double t1 = z[n], t2 = z[n + 1];
    if (!(0 < t1 && t1 < t2 && t2 < prob.T))
      throw ShootingError("iterate left the admissible region 0 < tau1 < tau2 < T");
    CotangentPoint lT(x_T, -prob.cost.gradient(x_T));
    const double w_brk =
        1.0 / std::max(1.0, std::max(lT.x.lpNorm<Eigen::Infinity>(),
                                     lT.p.lpNorm<Eigen::Infinity>()));
    Eigen::VectorXd x_fwd = flow(FlowSegment::of(prob.h1(), 0.0, t1, opts.ode), prob.x0);
    x_fwd = flow(FlowSegment::of(prob.h2(), t1, t2, opts.ode), x_fwd);

    SingularRhs srhs{bt, opts.sglc_floor, opts.saturation_margin};
    OdeRhs singular_rhs = [&srhs](double t, const Eigen::VectorXd& y) { return srhs(t, y); };
    Eigen::VectorXd y = lT.packed();
    if (t2 < prob.T) y = integrate(singular_rhs, prob.T, t2, y, opts.ode);
    CotangentPoint l2 = CotangentPoint::unpack(y);

    // Transport the covector to tau1 along the matched (forward) bang arc.
    Eigen::VectorXd y1 = CotangentPoint(x_fwd, l2.p).packed();
    y1 = integrate(adjoint_rhs(TimeField::from(prob.h2())), t2, t1, y1, opts.ode);
    CotangentPoint l1 = CotangentPoint::unpack(y1);

    Eigen::VectorXd r(n + 3);
    r.head(n) = w_state * (l2.x - x_fwd);
    r[n] = w_brk * bt.F1(lT);
    r[n + 1] = w_brk * bt.H23(lT);
    r[n + 2] = w_brk * (lifted_value(prob.h1(), l1) - lifted_value(prob.h2(), l1));
    return r;
  };

  struct SolveAttempt {
    bool converged = false;
    Eigen::VectorXd z, r;
    double rnorm = 0;
    int iter = 0;
    std::string error;
  };

  auto newton_from = [&](Eigen::VectorXd z) -> SolveAttempt {
    SolveAttempt out;
    // The plain backward residual is preferred; rough guesses whose full
    // backward pass diverges fall back to the hybrid formulation.
    bool hybrid = false;
    auto eval = [&](const Eigen::VectorXd& zz) {
      return hybrid ? residual_hybrid(zz) : residual(zz);
    };
    try {
      Eigen::VectorXd r;
      try {
        r = eval(z);
      } catch (const IntegrationError&) {
        hybrid = true;
        r = eval(z);
      }
      double rnorm = r.norm();
      int iter = 0;
      while (rnorm > opts.residual_tol && iter < opts.max_iterations) {
        // Central-difference Jacobian.
        Eigen::MatrixXd J(r.size(), z.size());
        for (int j = 0; j < z.size(); ++j) {
          const double h = 1e-6 * std::max(1.0, std::abs(z[j]));
          Eigen::VectorXd zp = z, zm = z;
          zp[j] += h;
          zm[j] -= h;
          J.col(j) = (eval(zp) - eval(zm)) / (2.0 * h);
        }
        // Truncated-SVD least-squares step (the residual set may be rank
        // deficient, e.g. F1(l_T) identically zero).
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Eigen::VectorXd sv = svd.singularValues();
        const double cut = 1e-10 * sv[0];
        Eigen::VectorXd inv_sv = sv;
        for (int i = 0; i < sv.size(); ++i) inv_sv[i] = (sv[i] > cut) ? 1.0 / sv[i] : 0.0;
        Eigen::VectorXd step =
            -svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose() * r;

        double alpha = 1.0;
        bool accepted = false;
        for (int bt_i = 0; bt_i < 10; ++bt_i) {
          Eigen::VectorXd z_try = z + alpha * step;
          try {
            Eigen::VectorXd r_try = eval(z_try);
            const double rn = r_try.norm();
            if (rn < rnorm) {
              z = z_try;
              r = r_try;
              rnorm = rn;
              accepted = true;
              break;
            }
          } catch (const ShootingError&) {
            // iterate wandered outside 0 < tau1 < tau2 < T, shrink the step
          } catch (const IntegrationError&) {
            // backward pass diverged at the trial point, shrink the step
          }
          alpha *= 0.5;
        }
        ++iter;
        if (!accepted) {
          out.error = "shooting stalled at residual norm " + std::to_string(rnorm) +
                      " after " + std::to_string(iter) + " iterations";
          return out;
        }
      }
      out.z = z;
      out.r = r;
      out.rnorm = rnorm;
      out.iter = iter;
      out.converged = rnorm <= opts.residual_tol;
      if (!out.converged)
        out.error = "shooting did not converge: residual norm " + std::to_string(rnorm) +
                    " after " + std::to_string(iter) + " iterations";
    } catch (const IntegrationError& e) {
      out.error = e.what();
    } catch (const ShootingError& e) {
      out.error = e.what();
    }
    return out;
  };

  // A converged root is accepted only if it has the assumed structure: two
  // bang arcs of positive length and a singular control strictly inside (0,1).
  auto accept = [&](const SolveAttempt& a, ShootingResult* res) -> bool {
    const double t1 = a.z[n], t2 = a.z[n + 1];
    if (!(0 < t1 && t1 < t2 && t2 < prob.T)) return false;
    if (t1 <= 1e-6 * prob.T || t2 - t1 <= 1e-6 * prob.T) return false;
    Eigen::VectorXd x_T = a.z.head(n);
    CotangentPoint lT(x_T, -prob.cost.gradient(x_T));
    BBSExtremal ext;
    try {
      ext = integrate_reference(bt, lT, t1, t2, opts);
    } catch (const std::exception&) {
      return false;
    }
    for (double u : ext.arc3.u)
      if (!(u > 0.0 && u < 1.0)) return false;
    *res = ShootingResult{std::move(ext), a.iter, a.rnorm, a.r};
    return true;
  };

  // Deterministic start list: the guess itself, the endpoint reached by
  // simulating forward with the edge midpoint control on the singular
  // interval, and contracted copies of the guessed endpoint.
  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd z0(n + 2);
  z0.head(n) = guess.x_T;
  z0[n] = guess.tau1;
  z0[n + 1] = guess.tau2;
  starts.push_back(z0);
  try {
    SmoothField mid = prob.h2() + 0.5 * prob.f1();
    Eigen::VectorXd x = flow(FlowSegment::of(prob.h1(), 0.0, guess.tau1, opts.ode), prob.x0);
    x = flow(FlowSegment::of(prob.h2(), guess.tau1, guess.tau2, opts.ode), x);
    x = flow(FlowSegment::of(mid, guess.tau2, prob.T, opts.ode), x);
    Eigen::VectorXd zm = z0;
    zm.head(n) = x;
    starts.push_back(zm);
  } catch (const IntegrationError&) {
    // forward simulation itself diverged; skip this start
  }
  for (double s : {0.5, 0.25}) {
    Eigen::VectorXd zs = z0;
    zs.head(n) = s * guess.x_T;
    starts.push_back(zs);
  }

  std::string first_error;
  bool any_converged = false;
  for (const Eigen::VectorXd& start : starts) {
    SolveAttempt a = newton_from(start);
    if (!a.converged) {
      if (first_error.empty() && !a.error.empty()) first_error = a.error;
      continue;
    }
    any_converged = true;
    ShootingResult res;
    if (accept(a, &res)) return res;
  }
  if (any_converged)
    throw ShootingError(
        "shooting converged only to roots without the assumed bang-bang-singular structure");
  throw ShootingError(first_error.empty() ? "shooting failed to converge from all starts"
                                          : first_error);
}

namespace {

struct GridCheck {
  double margin = std::numeric_limits<double>::infinity();
  double worst_time = 0;
  void update(double value, double t) {
    if (value < margin) {
      margin = value;
      worst_time = t;
    }
  }
};

}  // namespace

ConditionReport check_conditions(const BracketTable& bt, const BBSExtremal& ext,
                                 const CheckOptions& cfg) {
  const ControlAffineProblem& prob = bt.problem();
  ConditionReport rep;
  const double delta = cfg.delta_frac * ext.T;
  const int m = static_cast<int>(prob.fields.size());

  // (a) bang maximality: strict margin on the junction-excluded interior plus
  // a sign-only test on the closed arc.
  struct BangArc {
    const char* name;
    int active;
    double a, b;
  };
  const BangArc bangs[2] = {{"bang-maximality-arc1", prob.edge[0], 0.0, ext.tau1},
                            {"bang-maximality-arc2", prob.edge[1], ext.tau1, ext.tau2}};
  for (const auto& barc : bangs) {
    ConditionCheck c;
    c.name = barc.name;
    GridCheck interior, full;
    for (double t : linspace(barc.a, barc.b, cfg.grid)) {
      CotangentPoint l = ext.state_at(t);
      const double active = lifted_value(prob.fields[barc.active], l);
      for (int i = 0; i < m; ++i) {
        if (i == barc.active) continue;
        const double gap = active - lifted_value(prob.fields[i], l);
        full.update(gap, t);
        if (t >= barc.a + delta && t <= barc.b - delta) interior.update(gap, t);
      }
    }
    c.margin = interior.margin;
    c.worst_time = interior.worst_time;
    c.verdict = (interior.margin > 0 && full.margin >= -cfg.sign_slack) ? CheckVerdict::Pass
                                                                        : CheckVerdict::Fail;
    std::ostringstream d;
    d << "interior margin " << interior.margin << " (junctions excluded by " << delta
      << "); sign-only minimum " << full.margin << " at t=" << full.worst_time;
    c.diagnostics = d.str();
    rep.checks.push_back(std::move(c));
  }

  // (b) singular-arc maximality against vertices off the (h2,h3) edge.
  {
    ConditionCheck c;
    c.name = "singular-maximality";
    bool any = false;
    GridCheck g;
    for (double t : linspace(ext.tau2 + delta, ext.T, cfg.grid)) {
      CotangentPoint l = ext.state_at(t);
      const double H2v = lifted_value(prob.h2(), l);
      const double F1v = bt.F1(l);
      for (int i = 0; i < m; ++i) {
        if (i == prob.edge[1] || i == prob.edge[2]) continue;
        any = true;
        const double Hi = lifted_value(prob.fields[i], l);
        for (double a : {0.0, 0.5, 1.0}) g.update(H2v + a * F1v - Hi, t);
      }
    }
    if (!any) {
      c.verdict = CheckVerdict::Skipped;
      c.diagnostics = "no vertices off the (h2,h3) edge";
    } else {
      c.margin = g.margin;
      c.worst_time = g.worst_time;
      c.verdict = g.margin > 0 ? CheckVerdict::Pass : CheckVerdict::Fail;
    }
    rep.checks.push_back(std::move(c));
  }

  // (c) switching regularity.
  {
    ConditionCheck c;
    c.name = "switch1-regularity";
    c.margin = bt.H12(ext.l1);
    c.worst_time = ext.tau1;
    c.verdict = c.margin > 0 ? CheckVerdict::Pass : CheckVerdict::Fail;
    c.diagnostics = "H12 at the bang-bang switch";
    rep.checks.push_back(std::move(c));
  }
  {
    ConditionCheck c;
    c.name = "junction-regularity";
    c.margin = bt.H232(ext.l2);
    c.worst_time = ext.tau2;
    c.verdict = c.margin > 0 ? CheckVerdict::Pass : CheckVerdict::Fail;
    c.diagnostics = "H232 at the bang-singular junction";
    rep.checks.push_back(std::move(c));
  }

  // (d) strong generalized Legendre condition on the singular arc.
  {
    ConditionCheck c;
    c.name = "sglc";
    GridCheck g;
    for (double t : linspace(ext.tau2, ext.T, cfg.grid)) g.update(bt.L(ext.state_at(t)), t);
    c.margin = g.margin;
    c.worst_time = g.worst_time;
    c.verdict = g.margin > 0 ? CheckVerdict::Pass : CheckVerdict::Fail;
    c.diagnostics = "min R(t) = L(lambda(t)) on [tau2, T]";
    rep.checks.push_back(std::move(c));
  }

  // (e) interior-control signs on (tau2, T].
  {
    ConditionCheck c;
    c.name = "singular-interior-signs";
    GridCheck g;
    for (double t : linspace(ext.tau2 + delta, ext.T, cfg.grid)) {
      CotangentPoint l = ext.state_at(t);
      g.update(std::min(bt.H232(l), bt.H323(l)), t);
    }
    c.margin = g.margin;
    c.worst_time = g.worst_time;
    c.verdict = g.margin > 0 ? CheckVerdict::Pass : CheckVerdict::Fail;
    c.diagnostics = "min of H232 and H323 on (tau2, T]";
    rep.checks.push_back(std::move(c));
  }

  return rep;
}

namespace {

void write_csv_arc(std::ostream& out, const BracketTable& bt, const ArcSamples& arc,
                   double u_code, bool singular, bool skip_first) {
  const int n = arc.l.empty() ? 0 : arc.l.front().dim();
  for (size_t i = skip_first ? 1 : 0; i < arc.t.size(); ++i) {
    const CotangentPoint& l = arc.l[i];
    out << arc.t[i];
    for (int j = 0; j < n; ++j) out << "," << l.x[j];
    for (int j = 0; j < n; ++j) out << "," << l.p[j];
    out << "," << (singular ? arc.u[i] : u_code);
    out << "," << bt.F1(l) << "," << bt.H23(l) << "," << bt.H232(l) << "," << bt.H323(l) << ","
        << bt.L(l) << "\n";
  }
}

}  // namespace

void write_extremal_csv(std::ostream& out, const BracketTable& bt, const BBSExtremal& ext) {
  const int n = ext.lT.dim();
  out << "t";
  for (int j = 1; j <= n; ++j) out << ",x" << j;
  for (int j = 1; j <= n; ++j) out << ",p" << j;
  out << ",u,F1,H23,H232,H323,L\n";
  out.precision(15);
  const auto& edge = bt.problem().edge;
  write_csv_arc(out, bt, ext.arc1, -(edge[0] + 1.0), false, false);
  write_csv_arc(out, bt, ext.arc2, -(edge[1] + 1.0), false, true);
  write_csv_arc(out, bt, ext.arc3, 0.0, true, true);
}

ReferenceField::ReferenceField(const BracketTable& bt, const BBSExtremal& ext)
    : bt_(&bt), ext_(&ext) {}

int ReferenceField::dim() const { return bt_->problem().dim(); }

double ReferenceField::upsilon(double t) const {
  if (t < ext_->tau2) return 0.0;
  return bt_->singular_control(ext_->state_at(t));
}

Eigen::VectorXd ReferenceField::eval(double t, const Eigen::VectorXd& x) const {
  const ControlAffineProblem& prob = bt_->problem();
  if (t < ext_->tau1) return prob.h1()(x);
  if (t < ext_->tau2) return prob.h2()(x);
  return prob.h2()(x) + upsilon(t) * bt_->field("f")(x);
}

Eigen::MatrixXd ReferenceField::jac(double t, const Eigen::VectorXd& x) const {
  const ControlAffineProblem& prob = bt_->problem();
  if (t < ext_->tau1) return prob.h1().jacobian(x);
  if (t < ext_->tau2) return prob.h2().jacobian(x);
  return prob.h2().jacobian(x) + upsilon(t) * bt_->field("f").jacobian(x);
}

std::vector<Eigen::MatrixXd> ReferenceField::hess(double t, const Eigen::VectorXd& x) const {
  const ControlAffineProblem& prob = bt_->problem();
  if (t < ext_->tau1) return prob.h1().hessian(x);
  if (t < ext_->tau2) return prob.h2().hessian(x);
  auto H = prob.h2().hessian(x);
  auto Hf = bt_->field("f").hessian(x);
  const double u = upsilon(t);
  for (size_t k = 0; k < H.size(); ++k) H[k] += u * Hf[k];
  return H;
}

TimeField ReferenceField::time_field() const {
  TimeField tf;
  tf.dim = dim();
  const ReferenceField* self = this;
  tf.eval = [self](double t, const Eigen::VectorXd& x) { return self->eval(t, x); };
  tf.jac = [self](double t, const Eigen::VectorXd& x) { return self->jac(t, x); };
  return tf;
}

std::vector<double> ReferenceField::split_times(double a, double b) const {
  std::vector<double> pts;
  const double lo = std::min(a, b), hi = std::max(a, b);
  for (double tj : {ext_->tau1, ext_->tau2})
    if (tj > lo && tj < hi) pts.push_back(tj);
  if (a > b) std::reverse(pts.begin(), pts.end());
  return pts;
}

Eigen::MatrixXd reference_linearization(const ReferenceField& rf, double t_from, double t_to,
                                        const OdeOptions& opts) {
  const int n = rf.dim();
  const BBSExtremal& ext = rf.extremal();
  // State: (x, p, M) with M the 2n x 2n linearization in (dx, dp) ordering.
  auto rhs = [&rf, n](double t, const Eigen::VectorXd& y) {
    Eigen::VectorXd x = y.head(n), p = y.segment(n, n);
    Eigen::Map<const Eigen::MatrixXd> M(y.data() + 2 * n, 2 * n, 2 * n);
    Eigen::MatrixXd J = rf.jac(t, x);
    auto Hs = rf.hess(t, x);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) C += p[i] * Hs[i];
    Eigen::MatrixXd A(2 * n, 2 * n);
    A.topLeftCorner(n, n) = J;
    A.topRightCorner(n, n).setZero();
    A.bottomLeftCorner(n, n) = -C;
    A.bottomRightCorner(n, n) = -J.transpose();
    Eigen::VectorXd dy(2 * n + 4 * n * n);
    dy.head(n) = rf.eval(t, x);
    dy.segment(n, n) = -J.transpose() * p;
    Eigen::Map<Eigen::MatrixXd>(dy.data() + 2 * n, 2 * n, 2 * n) = A * M;
    return dy;
  };
  Eigen::VectorXd y(2 * n + 4 * n * n);
  CotangentPoint l0 = ext.state_at(t_from);
  y.head(2 * n) = l0.packed();
  Eigen::Map<Eigen::MatrixXd>(y.data() + 2 * n, 2 * n, 2 * n) =
      Eigen::MatrixXd::Identity(2 * n, 2 * n);
  double t = t_from;
  for (double ts : rf.split_times(t_from, t_to)) {
    y = integrate(rhs, t, ts, y, opts);
    t = ts;
  }
  y = integrate(rhs, t, t_to, y, opts);
  return Eigen::Map<const Eigen::MatrixXd>(y.data() + 2 * n, 2 * n, 2 * n);
}

}  // namespace bbsox
