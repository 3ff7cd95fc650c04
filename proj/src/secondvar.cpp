#include "bbsox/secondvar.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

namespace bbsox {

namespace {

// Cubic (4-point Lagrange) interpolation on a uniform ascending grid.
class GridInterp {
 public:
  GridInterp() = default;
  GridInterp(std::vector<double> t, std::vector<Eigen::VectorXd> v)
      : t_(std::move(t)), v_(std::move(v)) {}

  Eigen::VectorXd operator()(double t) const {
    const int m = static_cast<int>(t_.size());
    if (m == 1) return v_[0];
    const double dt = (t_.back() - t_.front()) / (m - 1);
    int i = static_cast<int>(std::floor((t - t_.front()) / dt));
    i = std::clamp(i, 1, m - 3);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(v_[0].size());
    for (int a = i - 1; a <= i + 2; ++a) {
      double w = 1.0;
      for (int b = i - 1; b <= i + 2; ++b) {
        if (a == b) continue;
        w *= (t - t_[b]) / (t_[a] - t_[b]);
      }
      acc += w * v_[a];
    }
    return acc;
  }

 private:
  std::vector<double> t_;
  std::vector<Eigen::VectorXd> v_;
};

}  // namespace

ModifiedCost build_ctilde(const BracketTable& bt, const BBSExtremal& ext,
                          const ModCostOptions& opts) {
  const ControlAffineProblem& prob = bt.problem();
  const int n = prob.dim();
  const Eigen::VectorXd xf = ext.lT.x;
  SmoothField f1 = bt.field("f");
  ScalarFunction cost = prob.cost;

  auto lf1c = [f1, cost](const Eigen::VectorXd& x) { return cost.gradient(x).dot(f1(x)); };

  // Case detection: sample L_{f1} c at the final point and nearby.
  const double radius = opts.probe_radius * (1.0 + xf.lpNorm<Eigen::Infinity>());
  std::mt19937_64 rng(20240817u);
  std::normal_distribution<double> gauss;
  bool invariant = std::abs(lf1c(xf)) <= opts.invariance_tol;
  for (int i = 0; invariant && i < opts.probe_points; ++i) {
    Eigen::VectorXd d(n);
    for (int j = 0; j < n; ++j) d[j] = gauss(rng);
    d *= radius / std::max(1e-300, d.norm());
    invariant = std::abs(lf1c(xf + d)) <= opts.invariance_tol;
  }

  ModifiedCost mc;
  if (invariant) {
    mc.kind = CostCase::F1Invariant;
    mc.ctilde = cost;  // same evaluators, bit for bit
    return mc;
  }

  // Transverse case: require L^2_{f1} c > 0 at the final point, then flatten
  // the cost along f1 by projecting to the leaf {L_{f1} c = 0}.
  const double h = SmoothField::fd_step_first(xf);
  Eigen::VectorXd grad_lf1c(n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd xp = xf, xm = xf;
    xp[j] += h;
    xm[j] -= h;
    grad_lf1c[j] = (lf1c(xp) - lf1c(xm)) / (2.0 * h);
  }
  const double l2 = grad_lf1c.dot(f1(xf));
  if (l2 <= 0)
    throw AssumptionViolation(
        "cost is neither invariant along f1 nor transversally convex: second Lie derivative " +
        std::to_string(l2));

  OdeOptions ode;
  auto project = [f1, lf1c, opts](const Eigen::VectorXd& x) {
    // Newton in r on L_{f1} c evaluated at exp(-r f1)(x).
    double r = 0.0;
    Eigen::VectorXd z = x;
    OdeOptions oo;
    oo.rtol = 1e-13;
    oo.atol = 1e-14;
    // The residual cannot drop below the integration noise of the slide.
    const double tol =
        std::max(opts.newton_tol, 20.0 * (oo.atol + oo.rtol * (1.0 + x.norm())));
    for (int it = 0; it < opts.newton_max_iter; ++it) {
      const double val = lf1c(z);
      if (std::abs(val) <= tol) return z;
      // Directional derivative of L_{f1}c along f1 by central differences.
      const double hh = SmoothField::fd_step_first(z);
      Eigen::VectorXd dir = f1(z);
      Eigen::VectorXd za = z + hh * dir / std::max(1.0, dir.norm());
      Eigen::VectorXd zb = z - hh * dir / std::max(1.0, dir.norm());
      const double slope =
          (lf1c(za) - lf1c(zb)) / (2.0 * hh) * std::max(1.0, dir.norm());
      if (slope == 0.0) break;
      const double dr = val / slope;
      r += dr;
      auto rhs = [&f1](double, const Eigen::VectorXd& y) { return (-f1(y)).eval(); };
      z = integrate(rhs, 0.0, r, x, oo);
    }
    throw AssumptionViolation("leaf projection Newton did not converge");
  };

  ScalarFunction cbase = cost;
  mc.kind = CostCase::F1Transverse;
  mc.l2f1c = l2;
  mc.ctilde = ScalarFunction::analytic(
      n, [cbase, project](const Eigen::VectorXd& x) { return cbase(project(x)); });
  return mc;
}

LQData LQData::analytic(int n, double tau2, double T, std::function<double(double)> R,
                        std::function<Eigen::VectorXd(double)> gdot,
                        std::function<Eigen::VectorXd(double)> crossform, Eigen::VectorXd k,
                        double H12, double L2k) {
  LQData lq;
  lq.n = n;
  lq.tau2 = tau2;
  lq.T = T;
  lq.R = std::move(R);
  lq.gdot = std::move(gdot);
  lq.crossform = std::move(crossform);
  lq.H12 = H12;
  lq.L2k_ctilde = L2k;
  if (k.size() > 0 && k.norm() > 0) {
    lq.k = k;
    lq.has_k = true;
    lq.omega = k / k.squaredNorm();
  } else {
    lq.k = Eigen::VectorXd::Zero(n);
  }
  for (double t : linspace(tau2, T, 100)) {
    lq.tgrid.push_back(t);
    lq.Rg.push_back(lq.R(t));
    lq.gdotg.push_back(lq.gdot(t));
    lq.crossg.push_back(lq.crossform(t));
  }
  return lq;
}

namespace {

// Backward pass of the reference field with its state variational matrix,
// sampled at the requested (descending) times.
struct VariationalPass {
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::MatrixXd> V;
};

VariationalPass variational_pass(const ReferenceField& rf, const Eigen::VectorXd& y0,
                                 double t_from, const std::vector<double>& times,
                                 const OdeOptions& ode) {
  const int n = rf.dim();
  auto rhs = [&rf, n](double t, const Eigen::VectorXd& y) {
    Eigen::VectorXd x = y.head(n);
    Eigen::Map<const Eigen::MatrixXd> V(y.data() + n, n, n);
    Eigen::MatrixXd J = rf.jac(t, x);
    Eigen::VectorXd dy(n + n * n);
    dy.head(n) = rf.eval(t, x);
    Eigen::Map<Eigen::MatrixXd>(dy.data() + n, n, n) = J * V;
    return dy;
  };
  Eigen::VectorXd y(n + n * n);
  y.head(n) = y0;
  Eigen::Map<Eigen::MatrixXd>(y.data() + n, n, n) = Eigen::MatrixXd::Identity(n, n);

  VariationalPass out;
  double t = t_from;
  for (double tt : times) {
    for (double ts : rf.split_times(t, tt)) {
      y = integrate(rhs, t, ts, y, ode);
      t = ts;
    }
    if (tt != t) y = integrate(rhs, t, tt, y, ode);
    t = tt;
    out.x.push_back(y.head(n));
    out.V.push_back(Eigen::Map<const Eigen::MatrixXd>(y.data() + n, n, n));
  }
  return out;
}

}  // namespace

LQData assemble_lq(const BracketTable& bt, const BBSExtremal& ext, const ModifiedCost& mc,
                   const LQAssembleOptions& opts) {
  const ControlAffineProblem& prob = bt.problem();
  const int n = prob.dim();
  const Eigen::VectorXd xf = ext.lT.x;
  ReferenceField rf(bt, ext);
  const SmoothField& h23 = bt.field("2f");
  const SmoothField h1mh2 = prob.h1() - prob.h2();

  LQData lq;
  lq.n = n;
  lq.tau2 = ext.tau2;
  lq.T = ext.T;

  std::vector<double> grid_desc = linspace(ext.T, ext.tau2, opts.grid);  // descending
  std::vector<double> grid_asc(grid_desc.rbegin(), grid_desc.rend());

  // Reference pass: transported bracket field and Legendre weight on the grid.
  VariationalPass ref = variational_pass(rf, xf, ext.T, grid_desc, opts.ode);
  const SmoothField& Lfield = bt.field("f,2f");
  std::vector<Eigen::VectorXd> gdot_desc(grid_desc.size());
  std::vector<double> R_desc(grid_desc.size());
  for (size_t i = 0; i < grid_desc.size(); ++i) {
    gdot_desc[i] = ref.V[i].partialPivLu().solve(h23(ref.x[i]));
    R_desc[i] = ext.state_at(grid_desc[i]).p.dot(Lfield(ref.x[i]));
  }

  // Transported switching-direction vector at tau1.
  {
    std::vector<double> tail = {ext.tau1};
    auto cont = variational_pass(rf, ref.x.back(), ext.tau2, tail, opts.ode);
    Eigen::MatrixXd V1 = ref.V.back() * Eigen::MatrixXd::Identity(n, n);
    // Compose: V(tau1) = V(tau2->tau1 relative) * V(T->tau2).
    V1 = cont.V[0] * ref.V.back();
    lq.k = V1.partialPivLu().solve(h1mh2(cont.x[0]));
    const double kscale = 1.0 + h1mh2(cont.x[0]).norm();
    lq.has_k = lq.k.norm() > 1e-8 * kscale;
    if (lq.has_k) lq.omega = lq.k / lq.k.squaredNorm();
  }
  lq.H12 = bt.H12(ext.l1);

  // Crossform by central differences of the transported-field Lie derivative.
  const double h = opts.fd_step_scale * (1.0 + xf.lpNorm<Eigen::Infinity>());
  std::vector<Eigen::VectorXd> a_desc(grid_desc.size(), Eigen::VectorXd::Zero(n));
  double L2k = 0.0;
  for (int j = 0; j < n + 1; ++j) {
    // Directions: basis vectors for the crossform, then k-hat for the
    // boundary second Lie derivative.
    Eigen::VectorXd dir;
    if (j < n) {
      dir = Eigen::VectorXd::Unit(n, j);
    } else {
      if (!lq.has_k) break;
      dir = lq.k.normalized();
    }
    double phi[2] = {0, 0};
    double psi[2] = {0, 0};
    for (int s = 0; s < 2; ++s) {
      const double sgn = s == 0 ? 1.0 : -1.0;
      Eigen::VectorXd y0 = xf + sgn * h * dir;
      Eigen::VectorXd c_grad = mc.ctilde.gradient(y0);
      VariationalPass vp = variational_pass(rf, y0, ext.T, grid_desc, opts.ode);
      if (j < n) {
        for (size_t i = 0; i < grid_desc.size(); ++i) {
          Eigen::VectorXd G = vp.V[i].partialPivLu().solve(h23(vp.x[i]));
          double val = c_grad.dot(G);
          a_desc[i][j] += sgn * val / (2.0 * h);
        }
        (void)phi;
      } else {
        std::vector<double> tail = {ext.tau1};
        auto cont = variational_pass(rf, vp.x.back(), ext.tau2, tail, opts.ode);
        Eigen::MatrixXd V1 = cont.V[0] * vp.V.back();
        Eigen::VectorXd K = V1.partialPivLu().solve(h1mh2(cont.x[0]));
        psi[s] = c_grad.dot(K);
      }
    }
    if (j == n) L2k = (psi[0] - psi[1]) / (2.0 * h) * lq.k.norm();
  }
  lq.L2k_ctilde = L2k;

  // Grid snapshots, ascending.
  lq.tgrid = grid_asc;
  lq.Rg.assign(R_desc.rbegin(), R_desc.rend());
  lq.gdotg.assign(gdot_desc.rbegin(), gdot_desc.rend());
  lq.crossg.assign(a_desc.rbegin(), a_desc.rend());

  // Interpolating accessors.  R is exact (re-evaluated from the extremal);
  // gdot and the crossform interpolate the grid.
  auto ext_copy = std::make_shared<BBSExtremal>(ext);
  SmoothField Lcopy = Lfield;
  lq.R = [ext_copy, Lcopy](double t) {
    CotangentPoint l = ext_copy->state_at(t);
    return l.p.dot(Lcopy(l.x));
  };
  auto gi = std::make_shared<GridInterp>(grid_asc, std::vector<Eigen::VectorXd>(
                                                       gdot_desc.rbegin(), gdot_desc.rend()));
  auto ai = std::make_shared<GridInterp>(grid_asc, std::vector<Eigen::VectorXd>(
                                                       a_desc.rbegin(), a_desc.rend()));
  lq.gdot = [gi](double t) { return (*gi)(t); };
  lq.crossform = [ai](double t) { return (*ai)(t); };
  return lq;
}

LQFlow lq_hamiltonian_flow(const LQData& lq, int grid, const OdeOptions& opts) {
  const int n = lq.n;
  auto rhs = [&lq, n](double t, const Eigen::VectorXd& y) {
    Eigen::Map<const Eigen::MatrixXd> Phi(y.data(), 2 * n, 2 * n);
    const double R = lq.R(t);
    Eigen::VectorXd g = lq.gdot(t);
    Eigen::VectorXd a = lq.crossform(t);
    // Stationarity in w gives w = (<mu, g> - <a, zeta>) / R, then
    // mu' = w a and zeta' = w g.
    Eigen::MatrixXd B(2 * n, 2 * n);
    B.topLeftCorner(n, n) = a * g.transpose() / R;
    B.topRightCorner(n, n) = -a * a.transpose() / R;
    B.bottomLeftCorner(n, n) = g * g.transpose() / R;
    B.bottomRightCorner(n, n) = -g * a.transpose() / R;
    Eigen::VectorXd dy(4 * n * n);
    Eigen::Map<Eigen::MatrixXd>(dy.data(), 2 * n, 2 * n) = B * Phi;
    return dy;
  };
  Eigen::VectorXd y0(4 * n * n);
  Eigen::Map<Eigen::MatrixXd>(y0.data(), 2 * n, 2 * n) =
      Eigen::MatrixXd::Identity(2 * n, 2 * n);
  LQFlow out;
  out.n = n;
  out.t = linspace(lq.T, lq.tau2, grid);  // descending
  auto ys = integrate_sampled(rhs, lq.T, lq.tau2, y0, out.t, opts);
  out.Phi.reserve(ys.size());
  for (const auto& y : ys)
    out.Phi.push_back(Eigen::Map<const Eigen::MatrixXd>(y.data(), 2 * n, 2 * n));
  return out;
}

CoercivityReport coercivity_test(const LQData& lq, const LQFlow& flow, const ModifiedCost* mc,
                                 const CoercivityOptions& opts) {
  const int n = lq.n;
  CoercivityReport rep;
  if (mc) rep.cost_case = mc->kind;

  double Rscale = 1.0;
  for (double r : lq.Rg) Rscale = std::max(Rscale, std::abs(r));
  const double margin = opts.margin_scale * Rscale;

  // (a) conjugate-point test on the zeta block.
  double minsv = std::numeric_limits<double>::infinity();
  double worst_t = lq.T;
  int sign_flips = 0;
  double prev_det = 0;
  for (size_t i = 0; i < flow.t.size(); ++i) {
    Eigen::MatrixXd Z = flow.zeta_block(i);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Z);
    const double sv = svd.singularValues().tail(1)(0);
    if (sv < minsv) {
      minsv = sv;
      worst_t = flow.t[i];
    }
    const double det = Z.determinant();
    if (i > 0 && det * prev_det < 0) ++sign_flips;
    prev_det = det;
  }
  rep.min_zeta_sv = minsv;
  rep.worst_time = worst_t;
  rep.det_sign_flips = sign_flips;
  rep.conjugate_pass = (minsv > margin) && (sign_flips == 0);

  // (b) boundary inequality when the switching direction survives transport.
  if (lq.has_k) {
    rep.boundary_checked = true;
    const Eigen::MatrixXd Z2 = flow.Phi.back().bottomRightCorner(n, n);
    const Eigen::MatrixXd M2 = flow.Phi.back().topRightCorner(n, n);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Z2);
    if (!lu.isInvertible()) {
      rep.conjugate_pass = false;
      rep.boundary_pass = false;
      rep.notes += "zeta block singular at tau2; ";
    } else {
      Eigen::VectorXd dx = lu.solve(lq.k);
      Eigen::VectorXd mu2 = M2 * dx;
      // On the solution with zeta(tau2) = k the second variation reduces to
      // gamma'' - <mu(tau2), k>; positivity there settles the k-direction.
      rep.boundary_value = lq.H12 + lq.L2k_ctilde - mu2.dot(lq.k);
      const double bscale = std::max(1.0, std::abs(lq.H12) + std::abs(lq.L2k_ctilde));
      rep.boundary_pass = rep.boundary_value > opts.margin_scale * bscale;
    }
  } else {
    rep.notes += "boundary test skipped: k = 0; ";
  }

  rep.pass = rep.conjugate_pass && rep.boundary_pass;
  return rep;
}

OracleResult coercivity_oracle(const LQData& lq, int N, int fine_per_interval) {
  if (N < 8) throw std::invalid_argument("coercivity_oracle requires N >= 8");
  const int n = lq.n;
  const int fine = std::max(2, fine_per_interval);
  const int Mf = N * fine;  // fine steps
  const double dt = (lq.T - lq.tau2) / Mf;

  // Node, midpoint, and cumulative data on the fine grid.
  std::vector<Eigen::VectorXd> g_node(Mf + 1), g_mid(Mf), a_node(Mf + 1), a_mid(Mf);
  std::vector<double> R_node(Mf + 1), R_mid(Mf);
  for (int i = 0; i <= Mf; ++i) {
    const double t = lq.tau2 + i * dt;
    g_node[i] = lq.gdot(t);
    a_node[i] = lq.crossform(t);
    R_node[i] = lq.R(t);
  }
  for (int i = 0; i < Mf; ++i) {
    const double t = lq.tau2 + (i + 0.5) * dt;
    g_mid[i] = lq.gdot(t);
    a_mid[i] = lq.crossform(t);
    R_mid[i] = lq.R(t);
  }
  // Cumulative integral of gdot (Simpson per fine step): G at nodes and mids.
  std::vector<Eigen::VectorXd> G_node(Mf + 1), G_mid(Mf);
  G_node[0] = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < Mf; ++i) {
    G_mid[i] = G_node[i] + (dt / 24.0) * (5.0 * g_node[i] + 8.0 * g_mid[i] - g_node[i + 1]);
    G_node[i + 1] = G_node[i] + (dt / 6.0) * (g_node[i] + 4.0 * g_mid[i] + g_node[i + 1]);
  }
  // Integral of R per coarse interval (Simpson per fine step).
  std::vector<double> IR(N, 0.0);
  for (int i = 0; i < Mf; ++i)
    IR[i / fine] += (dt / 6.0) * (R_node[i] + 4.0 * R_mid[i] + R_node[i + 1]);

  const int off = lq.has_k ? 1 : 0;
  const int m = off + N;
  const double gamma2 = lq.H12 + lq.L2k_ctilde;

  auto J = [&](const Eigen::VectorXd& v) -> double {
    const double e0 = lq.has_k ? v[0] : 0.0;
    double acc = 0.5 * e0 * e0 * gamma2;
    Eigen::VectorXd zeta = lq.has_k ? (e0 * lq.k).eval() : Eigen::VectorXd::Zero(n);
    for (int j = 0; j < N; ++j) {
      const double w = v[off + j];
      acc += 0.5 * w * w * IR[j];
      // zeta(t) = zeta_j + w (G(t) - G(t_j)) inside interval j; integrate
      // w a.zeta per fine step with Simpson.
      const int i0 = j * fine;
      const Eigen::VectorXd Gj = G_node[i0];
      const Eigen::VectorXd zj = zeta - w * Gj;
      for (int i = i0; i < i0 + fine; ++i) {
        const double f0 = a_node[i].dot(zj + w * G_node[i]);
        const double fm = a_mid[i].dot(zj + w * G_mid[i]);
        const double f1 = a_node[i + 1].dot(zj + w * G_node[i + 1]);
        acc += w * (dt / 6.0) * (f0 + 4.0 * fm + f1);
      }
      zeta = zj + w * G_node[i0 + fine];
    }
    return acc;
  };

  Eigen::MatrixXd Q(m, m);
  std::vector<double> Jd(m);
  for (int i = 0; i < m; ++i) {
    Jd[i] = J(Eigen::VectorXd::Unit(m, i));
    Q(i, i) = 2.0 * Jd[i];
  }
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double q = J(Eigen::VectorXd::Unit(m, i) + Eigen::VectorXd::Unit(m, j)) -
                       Jd[i] - Jd[j];
      Q(i, j) = q;
      Q(j, i) = q;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  OracleResult out;
  out.min_eigenvalue = es.eigenvalues()(0);
  out.coercive = out.min_eigenvalue > 0;
  out.nvars = m;
  return out;
}

void write_lq_csv(std::ostream& out, const LQData& lq) {
  out << "t,R";
  for (int j = 1; j <= lq.n; ++j) out << ",gdot" << j;
  for (int j = 1; j <= lq.n; ++j) out << ",a" << j;
  out << "\n";
  out.precision(15);
  for (size_t i = 0; i < lq.tgrid.size(); ++i) {
    out << lq.tgrid[i] << "," << lq.Rg[i];
    for (int j = 0; j < lq.n; ++j) out << "," << lq.gdotg[i][j];
    for (int j = 0; j < lq.n; ++j) out << "," << lq.crossg[i][j];
    out << "\n";
  }
}

}  // namespace bbsox
