#include "bbsox/overmax.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

namespace bbsox {

namespace {

int steps_for(double span, int per_unit) {
  return std::max(8, static_cast<int>(std::ceil(std::abs(span) * per_unit)));
}

OdeRhs lift_rhs(const SmoothField& f) {
  const int n = f.dim();
  return [f, n](double, const Eigen::VectorXd& y) {
    Eigen::VectorXd x = y.head(n), p = y.tail(n);
    Eigen::VectorXd dy(2 * n);
    dy.head(n) = f(x);
    dy.tail(n) = -f.jacobian(x).transpose() * p;
    return dy;
  };
}

}  // namespace

OvermaxMachinery::OvermaxMachinery(const BracketTable& bt, const BBSExtremal& ext,
                                   const OvermaxOptions& opts)
    : bt_(&bt), ext_(&ext), opts_(opts) {}

CotangentPoint OvermaxMachinery::exp_f1(const CotangentPoint& l, double theta) const {
  if (theta == 0.0) return l;
  auto rhs = lift_rhs(bt_->field("f"));
  return CotangentPoint::unpack(rk4(rhs, 0.0, theta, l.packed(), opts_.exp_steps));
}

double OvermaxMachinery::solve_theta(const CotangentPoint& l) const {
  const double scale = 1.0 + l.p.lpNorm<Eigen::Infinity>();
  double theta = 0.0;
  CotangentPoint lt = l;
  for (int it = 0; it < opts_.newton_max_iter; ++it) {
    const double r = bt_->H23(lt);
    if (std::abs(r) <= opts_.newton_tol * scale) return theta;
    const double slope = bt_->L(lt);
    if (std::abs(slope) < opts_.sglc_floor)
      throw AssumptionViolation("edge slide: Legendre quantity vanished");
    theta -= r / slope;
    lt = exp_f1(l, theta);
  }
  throw AssumptionViolation("edge slide did not converge (point outside validated neighborhood)");
}

double OvermaxMachinery::htilde2(const CotangentPoint& l) const {
  CotangentPoint lt = exp_f1(l, solve_theta(l));
  return lifted_value(bt_->problem().h2(), lt);
}

Eigen::VectorXd OvermaxMachinery::htilde2_vecfield(const CotangentPoint& l) const {
  const int n = l.dim();
  Eigen::VectorXd y = l.packed();
  Eigen::VectorXd grad(2 * n);
  for (int i = 0; i < 2 * n; ++i) {
    const double h = opts_.fd_step * std::max(1.0, std::abs(y[i]));
    auto central = [&](double step) {
      Eigen::VectorXd yp = y, ym = y;
      yp[i] += step;
      ym[i] -= step;
      return (htilde2(CotangentPoint::unpack(yp)) - htilde2(CotangentPoint::unpack(ym))) /
             (2.0 * step);
    };
    const double dh = central(h);
    const double dh2 = central(0.5 * h);
    grad[i] = (4.0 * dh2 - dh) / 3.0;  // Richardson extrapolation
  }
  Eigen::VectorXd field(2 * n);
  field.head(n) = grad.tail(n);   // xdot = dH/dp
  field.tail(n) = -grad.head(n);  // pdot = -dH/dx
  return field;
}

double OvermaxMachinery::t2_solve(const CotangentPoint& ltilde, CotangentPoint* out) const {
  const double tau2hat = ext_->tau2;
  const double scale = 1.0 + ltilde.p.lpNorm<Eigen::Infinity>();
  auto rhs = [this](double, const Eigen::VectorXd& y) {
    return htilde2_vecfield(CotangentPoint::unpack(y));
  };
  double t = tau2hat;
  CotangentPoint l = ltilde;
  for (int it = 0; it < opts_.newton_max_iter; ++it) {
    const double r = bt_->H23(l);
    if (std::abs(r) <= opts_.newton_tol * scale) {
      if (out) *out = l;
      return t;
    }
    const double slope = bt_->ham("2,2f", l);
    if (slope == 0.0) throw AssumptionViolation("junction bracket slope vanished in t2 solve");
    const double tn = t - r / slope;
    l = CotangentPoint::unpack(
        rk4(rhs, t, tn, l.packed(), steps_for(tn - t, opts_.steps_per_unit)));
    t = tn;
  }
  throw AssumptionViolation("t2 solve did not converge");
}

double OvermaxMachinery::tau1_solve(double tau2l, const CotangentPoint& lcorr,
                                    CotangentPoint* out) const {
  auto rhs = adjoint_rhs(TimeField::from(bt_->problem().h2()));
  const double scale = 1.0 + lcorr.p.lpNorm<Eigen::Infinity>();
  double t = tau2l;
  CotangentPoint l = lcorr;
  auto advance = [&](double tn) {
    if (tn == t) return;
    l = CotangentPoint::unpack(
        rk4(rhs, t, tn, l.packed(), steps_for(tn - t, opts_.steps_per_unit)));
    t = tn;
  };
  advance(std::min(ext_->tau1, tau2l));  // reference switch time as the initial guess
  const SmoothField& h1 = bt_->problem().h1();
  const SmoothField& h2 = bt_->problem().h2();
  for (int it = 0; it < opts_.newton_max_iter; ++it) {
    const double r = lifted_value(h1, l) - lifted_value(h2, l);
    if (std::abs(r) <= opts_.newton_tol * scale) {
      if (out) *out = l;
      return t;
    }
    const double slope = -bt_->H12(l);
    if (slope == 0.0) throw AssumptionViolation("switch bracket slope vanished in tau1 solve");
    advance(std::clamp(t - r / slope, 0.0, tau2l));
  }
  throw AssumptionViolation("tau1 solve did not converge");
}

OvermaxTrajectory OvermaxMachinery::flow_sampled(const CotangentPoint& l,
                                                 const std::vector<double>& times) const {
  const double T = ext_->T, tau2hat = ext_->tau2;
  OvermaxTrajectory traj;
  traj.l_start = l;

  // Time-dependent field on the singular window: maximized lift plus the
  // frozen reference singular control times the edge lift.
  ReferenceField rf(*bt_, *ext_);
  auto f1rhs = lift_rhs(bt_->field("f"));
  auto rhsA = [this, &rf, &f1rhs, tau2hat](double t, const Eigen::VectorXd& y) {
    Eigen::VectorXd v = htilde2_vecfield(CotangentPoint::unpack(y));
    // Clamp: rounding can land the last integrator stage one ulp below the
    // junction, where the frozen control drops discontinuously to zero.
    const double ups = rf.upsilon(std::max(t, tau2hat));
    if (ups != 0.0) v += ups * f1rhs(t, y);
    return v;
  };

  double tmin = times.empty() ? 0.0 : times.back();
  const bool smooth_only = tmin >= tau2hat - 1e-12;

  // Singular window, backward from T.
  std::vector<double> sampA;
  for (double tt : times)
    if (tt >= tau2hat) sampA.push_back(tt);
  bool need_tail = sampA.empty() || sampA.back() > tau2hat;
  double stopA = smooth_only ? (sampA.empty() ? T : sampA.back()) : tau2hat;
  if (need_tail && !smooth_only) sampA.push_back(tau2hat);
  std::vector<Eigen::VectorXd> ysA;
  if (stopA < T || !sampA.empty()) {
    if (sampA.empty()) sampA.push_back(stopA);
    ysA = rk4_sampled(rhsA, T, sampA.back(), l.packed(), sampA, opts_.steps_per_unit);
  }
  for (size_t i = 0; i < sampA.size(); ++i) {
    const bool synthetic = need_tail && !smooth_only && i + 1 == sampA.size();
    if (!synthetic || std::find(times.begin(), times.end(), sampA[i]) != times.end()) {
      traj.t.push_back(sampA[i]);
      traj.l.push_back(CotangentPoint::unpack(ysA[i]));
      traj.branch.push_back(0);
    }
  }

  if (smooth_only) {
    traj.t2 = traj.tau2 = traj.tau1 = tau2hat;
    traj.ltilde = traj.lcorr = traj.l1 =
        traj.l.empty() ? l : traj.l.back();
    return traj;
  }

  traj.ltilde = CotangentPoint::unpack(ysA.back());

  // Correction arc: present only when the switching bracket is negative at
  // the singular exit; tau2 = min(t2, reference tau2).
  if (bt_->H23(traj.ltilde) < 0.0) {
    traj.t2 = t2_solve(traj.ltilde, &traj.lcorr);
    traj.tau2 = std::min(traj.t2, tau2hat);
    if (traj.t2 >= tau2hat) traj.lcorr = traj.ltilde;
  } else {
    traj.t2 = traj.tau2 = tau2hat;
    traj.lcorr = traj.ltilde;
  }
  if (traj.tau2 < tau2hat) {
    std::vector<double> sampB;
    for (double tt : times)
      if (tt < tau2hat && tt >= traj.tau2) sampB.push_back(tt);
    if (!sampB.empty()) {
      auto rhsB = [this](double, const Eigen::VectorXd& y) {
        return htilde2_vecfield(CotangentPoint::unpack(y));
      };
      auto ys = rk4_sampled(rhsB, tau2hat, sampB.back(), traj.ltilde.packed(), sampB,
                            opts_.steps_per_unit);
      for (size_t i = 0; i < sampB.size(); ++i) {
        traj.t.push_back(sampB[i]);
        traj.l.push_back(CotangentPoint::unpack(ys[i]));
        traj.branch.push_back(1);
      }
    }
  }

  // Second bang arc down to this trajectory's first switch, then the first
  // bang arc to the requested horizon.
  traj.tau1 = tau1_solve(traj.tau2, traj.lcorr, &traj.l1);
  auto rhs2 = adjoint_rhs(TimeField::from(bt_->problem().h2()));
  std::vector<double> samp2;
  for (double tt : times)
    if (tt < traj.tau2 && tt >= traj.tau1) samp2.push_back(tt);
  if (!samp2.empty()) {
    auto ys = rk4_sampled(rhs2, traj.tau2, samp2.back(), traj.lcorr.packed(), samp2,
                          opts_.steps_per_unit);
    for (size_t i = 0; i < samp2.size(); ++i) {
      traj.t.push_back(samp2[i]);
      traj.l.push_back(CotangentPoint::unpack(ys[i]));
      traj.branch.push_back(2);
    }
  }
  auto rhs1 = adjoint_rhs(TimeField::from(bt_->problem().h1()));
  std::vector<double> samp1;
  for (double tt : times)
    if (tt < traj.tau1) samp1.push_back(tt);
  if (!samp1.empty()) {
    auto ys = rk4_sampled(rhs1, traj.tau1, samp1.back(), traj.l1.packed(), samp1,
                          opts_.steps_per_unit);
    for (size_t i = 0; i < samp1.size(); ++i) {
      traj.t.push_back(samp1[i]);
      traj.l.push_back(CotangentPoint::unpack(ys[i]));
      traj.branch.push_back(3);
    }
  }
  return traj;
}

CotangentPoint OvermaxMachinery::overmax_flow(double t, const CotangentPoint& l) const {
  if (t >= ext_->T) return l;
  OvermaxTrajectory traj = flow_sampled(l, {t});
  return traj.l.back();
}

CotangentPoint OvermaxMachinery::point_on_branch(const OvermaxTrajectory& traj, double t,
                                                 int branch) const {
  if (branch == 2) {
    auto rhs = adjoint_rhs(TimeField::from(bt_->problem().h2()));
    return CotangentPoint::unpack(rk4(rhs, traj.tau2, t, traj.lcorr.packed(),
                                      steps_for(t - traj.tau2, opts_.steps_per_unit)));
  }
  if (branch == 3) {
    auto rhs = adjoint_rhs(TimeField::from(bt_->problem().h1()));
    return CotangentPoint::unpack(rk4(rhs, traj.tau1, t, traj.l1.packed(),
                                      steps_for(t - traj.tau1, opts_.steps_per_unit)));
  }
  if (branch == 1) {
    auto rhs = [this](double, const Eigen::VectorXd& y) {
      return htilde2_vecfield(CotangentPoint::unpack(y));
    };
    return CotangentPoint::unpack(rk4(rhs, ext_->tau2, t, traj.ltilde.packed(),
                                      steps_for(t - ext_->tau2, opts_.steps_per_unit)));
  }
  return overmax_flow(t, traj.l_start);
}

ProbeReport invertibility_probe(const OvermaxMachinery& mach, const ModifiedCost& mc,
                                const ProbeOptions& opts) {
  const BBSExtremal& ext = mach.extremal();
  const int n = ext.lT.dim();
  const Eigen::VectorXd xT = ext.lT.x;
  const double h = opts.fd_step_scale * (1.0 + xT.lpNorm<Eigen::Infinity>());

  std::vector<double> times = linspace(ext.T, 0.0, opts.grid);  // descending
  const double avoid = 1e-4 * ext.T;
  for (double& t : times)
    if (std::abs(t - ext.tau1) < avoid) t = ext.tau1 + (t >= ext.tau1 ? avoid : -avoid);

  // Perturbed points on the graph {p = -grad ctilde(x)} and their composite
  // flows, sampled at every grid time.
  std::vector<OvermaxTrajectory> trajs;
  trajs.reserve(2 * n);
  for (int j = 0; j < n; ++j) {
    for (double sgn : {1.0, -1.0}) {
      Eigen::VectorXd x = xT + sgn * h * Eigen::VectorXd::Unit(n, j);
      CotangentPoint l(x, -mc.ctilde.gradient(x));
      trajs.push_back(mach.flow_sampled(l, times));
    }
  }

  ProbeReport rep;
  rep.radius = h;
  rep.min_sv = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < times.size(); ++i) {
    Eigen::MatrixXd M(n, n);
    for (int j = 0; j < n; ++j)
      M.col(j) = (trajs[2 * j].l[i].x - trajs[2 * j + 1].l[i].x) / (2.0 * h);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    ProbeRow row{times[i], trajs[0].branch[i], svd.singularValues().tail(1)(0)};
    rep.rows.push_back(row);
    rep.min_sv = std::min(rep.min_sv, row.min_sv);
  }

  // First-switch junction: both one-sided linearizations and the convex
  // combinations between them.
  Eigen::MatrixXd M1(n, n), M2(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd a1 = mach.point_on_branch(trajs[2 * j], ext.tau1, 3).x;
    Eigen::VectorXd b1 = mach.point_on_branch(trajs[2 * j + 1], ext.tau1, 3).x;
    Eigen::VectorXd a2 = mach.point_on_branch(trajs[2 * j], ext.tau1, 2).x;
    Eigen::VectorXd b2 = mach.point_on_branch(trajs[2 * j + 1], ext.tau1, 2).x;
    M1.col(j) = (a1 - b1) / (2.0 * h);
    M2.col(j) = (a2 - b2) / (2.0 * h);
  }
  rep.junction_min_sv = std::numeric_limits<double>::infinity();
  for (int ia = 0; ia <= 10; ++ia) {
    const double a = 0.1 * ia;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(((1.0 - a) * M1 + a * M2).eval());
    rep.junction_min_sv = std::min(rep.junction_min_sv, svd.singularValues().tail(1)(0));
  }

  // Pairwise injectivity spot-check: projected separations never collapse
  // relative to the initial separation.
  rep.injectivity_min_ratio = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < trajs.size(); ++a) {
    for (size_t b = a + 1; b < trajs.size(); ++b) {
      const double d0 = (trajs[a].l_start.x - trajs[b].l_start.x).norm();
      if (d0 == 0) continue;
      for (size_t i = 0; i < times.size(); ++i) {
        const double d = (trajs[a].l[i].x - trajs[b].l[i].x).norm();
        rep.injectivity_min_ratio = std::min(rep.injectivity_min_ratio, d / d0);
      }
    }
  }

  rep.flagged = rep.min_sv < opts.sv_floor || rep.junction_min_sv < opts.sv_floor ||
                rep.injectivity_min_ratio < opts.sv_floor;
  rep.disclaimer =
      "sampled evidence only: singular values and injectivity checked at grid "
      "resolution and finite-difference radius, not proven";
  return rep;
}

IotaReport iota_conjugacy_check(const OvermaxMachinery& mach, const ModifiedCost& mc,
                                const LQData& lq, const LQFlow& flow, int grid) {
  const BBSExtremal& ext = mach.extremal();
  const int n = ext.lT.dim();
  std::vector<double> times = linspace(ext.T, ext.tau2, grid - 1);  // grid points, descending

  const LQFlow* phi = &flow;
  LQFlow own;
  const bool reuse = flow.t.size() == times.size() && !flow.t.empty() &&
                     std::abs(flow.t.front() - times.front()) < 1e-12 &&
                     std::abs(flow.t.back() - times.back()) < 1e-12;
  if (!reuse) {
    own = lq_hamiltonian_flow(lq, grid - 1);
    phi = &own;
  }

  // Finite-difference linearization of the maximized flow at the reference
  // endpoint, all 2n packed directions.
  const Eigen::VectorXd y0 = ext.lT.packed();
  const double h = 1e-5 * (1.0 + y0.lpNorm<Eigen::Infinity>());
  std::vector<OvermaxTrajectory> plus, minus;
  for (int i = 0; i < 2 * n; ++i) {
    Eigen::VectorXd yp = y0, ym = y0;
    yp[i] += h;
    ym[i] -= h;
    plus.push_back(mach.flow_sampled(CotangentPoint::unpack(yp), times));
    minus.push_back(mach.flow_sampled(CotangentPoint::unpack(ym), times));
  }

  // Conjugating map A: (mu, zeta) -> (delta x, delta p) on the graph frame.
  Eigen::MatrixXd Hc = mc.ctilde.hessian(ext.lT.x);
  auto makeA = [&](double mu_sign) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    A.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    A.bottomLeftCorner(n, n) = -mu_sign * Eigen::MatrixXd::Identity(n, n);
    A.bottomRightCorner(n, n) = -Hc;
    return A;
  };

  ReferenceField rf(mach.table(), ext);
  IotaReport best;
  best.max_residual = std::numeric_limits<double>::infinity();
  for (double mu_sign : {1.0, -1.0}) {
    Eigen::MatrixXd A = makeA(mu_sign);
    Eigen::MatrixXd Ainv = A.inverse();
    IotaReport rep;
    rep.flipped_sign = mu_sign < 0;
    for (size_t i = 0; i < times.size(); ++i) {
      Eigen::MatrixXd DH(2 * n, 2 * n);
      for (int c = 0; c < 2 * n; ++c)
        DH.col(c) = (plus[c].l[i].packed() - minus[c].l[i].packed()) / (2.0 * h);
      Eigen::MatrixXd back = reference_linearization(rf, times[i], ext.T);
      Eigen::MatrixXd lhs = back * DH;
      Eigen::MatrixXd rhs = A * phi->Phi[i] * Ainv;
      const double res = (lhs - rhs).norm() / std::max(1.0, rhs.norm());
      rep.t.push_back(times[i]);
      rep.residual.push_back(res);
      if (res > rep.max_residual) {
        rep.max_residual = res;
        rep.worst_time = times[i];
      }
    }
    if (rep.max_residual < best.max_residual) best = rep;
  }
  return best;
}

namespace {

// Open-loop control schedule for one comparison trial.
struct Schedule {
  double tau1, tau2, T;
  int needle_vertex = -1;
  double needle_a = 0, needle_b = 0;
  double singular_offset = 0;

  std::vector<double> breakpoints() const {
    std::vector<double> b{0.0, tau1, tau2, T};
    if (needle_vertex >= 0) {
      b.push_back(needle_a);
      b.push_back(needle_b);
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end(),
                        [](double x, double y) { return std::abs(x - y) < 1e-14; }),
            b.end());
    while (!b.empty() && b.front() < 0) b.erase(b.begin());
    return b;
  }
};

}  // namespace

PerturbReport compare_admissible(const BracketTable& bt, const BBSExtremal& ext, int trials,
                                 std::uint64_t seed, const PerturbOptions& opts) {
  const ControlAffineProblem& prob = bt.problem();
  const int n = prob.dim();
  const int nfields = static_cast<int>(prob.fields.size());
  ReferenceField rf(bt, ext);

  auto weights = [&](const Schedule& s, double t) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(nfields);
    if (s.needle_vertex >= 0 && t >= s.needle_a && t < s.needle_b) {
      w[s.needle_vertex] = 1.0;
      return w;
    }
    if (t < s.tau1) {
      w[prob.edge[0]] = 1.0;
    } else if (t < s.tau2) {
      w[prob.edge[1]] = 1.0;
    } else {
      const double u = std::clamp(rf.upsilon(std::max(t, ext.tau2)) + s.singular_offset,
                                  0.0, 1.0);
      w[prob.edge[1]] += 1.0 - u;
      w[prob.edge[2]] += u;
    }
    return w;
  };

  // Fixed-grid integration split at control discontinuities; returns the
  // final state, or nothing if the trajectory leaves the comparison tube.
  auto run = [&](const Schedule& s) -> std::optional<Eigen::VectorXd> {
    Eigen::VectorXd x = prob.x0;
    auto bps = s.breakpoints();
    for (size_t seg = 0; seg + 1 < bps.size(); ++seg) {
      const double a = bps[seg], b = bps[seg + 1];
      auto rhs = [&](double t, const Eigen::VectorXd& xx) {
        // Clamp stage times into the open segment so the control structure is
        // constant across each integration segment.
        Eigen::VectorXd w = weights(s, std::clamp(t, a, b - 1e-13));
        Eigen::VectorXd dx = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < nfields; ++i)
          if (w[i] != 0.0) dx += w[i] * prob.fields[i](xx);
        return dx;
      };
      std::vector<double> samp;
      for (double t = a; t < b; t += 0.05) samp.push_back(t);
      samp.push_back(b);
      auto ys = rk4_sampled(rhs, a, b, x, samp, opts.steps_per_unit);
      for (size_t i = 0; i < samp.size(); ++i) {
        if ((ys[i] - ext.state_at(samp[i]).x).lpNorm<Eigen::Infinity>() > opts.tube_radius)
          return std::nullopt;
      }
      x = ys.back();
    }
    return x;
  };

  Schedule base{ext.tau1, ext.tau2, ext.T};
  auto xb = run(base);
  if (!xb) throw std::runtime_error("reference trajectory failed its own tube check");
  const double cbase = prob.cost(*xb);

  PerturbReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int id = 0; id < trials; ++id) {
    Schedule s = base;
    PerturbationTrial trial;
    trial.id = id;
    std::ostringstream desc;
    switch (id % 3) {
      case 0: {
        trial.kind = PerturbationKind::Needle;
        s.needle_vertex = static_cast<int>(unif(rng) * nfields) % nfields;
        const double len = opts.needle_max_len * (0.1 + 0.9 * unif(rng));
        s.needle_a = unif(rng) * (ext.T - len);
        s.needle_b = s.needle_a + len;
        desc << "needle v" << s.needle_vertex + 1 << " [" << s.needle_a << "," << s.needle_b
             << "]";
        break;
      }
      case 1: {
        trial.kind = PerturbationKind::SingularOffset;
        s.singular_offset = opts.singular_max_offset * (2.0 * unif(rng) - 1.0);
        desc << "singular offset " << s.singular_offset;
        break;
      }
      default: {
        trial.kind = PerturbationKind::SwitchDither;
        const double d1 = opts.dither_max * (2.0 * unif(rng) - 1.0);
        const double d2 = opts.dither_max * (2.0 * unif(rng) - 1.0);
        s.tau1 = std::clamp(ext.tau1 + d1, 0.0, ext.tau2);
        s.tau2 = std::clamp(ext.tau2 + d2, s.tau1, ext.T);
        desc << "dither tau1 " << d1 << " tau2 " << d2;
        break;
      }
    }
    trial.descriptor = desc.str();
    auto xe = run(s);
    if (!xe) {
      trial.discarded = true;
      ++rep.discarded;
    } else {
      trial.gap = prob.cost(*xe) - cbase;
      rep.min_gap = std::min(rep.min_gap, trial.gap);
    }
    rep.trials.push_back(trial);
  }
  if (!std::isfinite(rep.min_gap)) rep.min_gap = 0.0;

  // Quadratic-growth fit: first-switch dithers of graded sizes.
  std::vector<double> logd, logg;
  for (double d : {0.000625, 0.00125, 0.0025, 0.005}) {
    Schedule s = base;
    s.tau1 = ext.tau1 + d;
    auto xe = run(s);
    if (!xe) continue;
    const double g = prob.cost(*xe) - cbase;
    if (g <= 0) continue;
    logd.push_back(std::log(d));
    logg.push_back(std::log(g));
  }
  if (logd.size() >= 3) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < logd.size(); ++i) {
      sx += logd[i];
      sy += logg[i];
      sxx += logd[i] * logd[i];
      sxy += logd[i] * logg[i];
    }
    const double m = static_cast<double>(logd.size());
    rep.dither_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    rep.has_exponent = true;
  }
  return rep;
}

void write_probe_csv(std::ostream& out, const ProbeReport& rep) {
  out << "t,branch,min_singular_value\n";
  out.precision(15);
  for (const auto& r : rep.rows) out << r.t << "," << r.branch << "," << r.min_sv << "\n";
}

void write_perturb_csv(std::ostream& out, const PerturbReport& rep) {
  out << "trial,kind,descriptor,gap,discarded\n";
  out.precision(15);
  for (const auto& tr : rep.trials) {
    const char* kind = tr.kind == PerturbationKind::Needle          ? "needle"
                       : tr.kind == PerturbationKind::SingularOffset ? "singular"
                                                                     : "dither";
    out << tr.id << "," << kind << ",\"" << tr.descriptor << "\"," << tr.gap << ","
        << (tr.discarded ? 1 : 0) << "\n";
  }
}

}  // namespace bbsox
