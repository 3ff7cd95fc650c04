#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bbsox/overmax.hpp"
#include "bbsox/problems.hpp"

using namespace bbsox;

namespace {

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

// Certified oscillator extremal and the machinery built on it, shared across
// the cases to keep the suite fast.
struct Fixture {
  ProblemConfig cfg = vanderpol_config();
  BracketTable bt{cfg.problem};
  ShootingResult shot = shoot_bbs(bt, cfg.guess);
  OvermaxMachinery mach{bt, shot.extremal};
  ModifiedCost mc = build_ctilde(bt, shot.extremal);
};

Fixture& fx() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("slide parameter vanishes on the reference singular arc") {
  Fixture& f = fx();
  const BBSExtremal& ext = f.shot.extremal;
  for (double t : linspace(ext.tau2 + 0.05, ext.T, 8)) {
    CotangentPoint l = ext.state_at(t);
    CHECK(std::abs(f.mach.solve_theta(l)) <= 1e-8);
    // With a vanishing slide the maximized lift equals the plain second
    // vertex lift.
    CHECK(f.mach.htilde2(l) ==
          doctest::Approx(lifted_value(f.cfg.problem.h2(), l)).epsilon(1e-8));
  }
}

TEST_CASE("slide parameter off the singular surface") {
  Fixture& f = fx();
  const BBSExtremal& ext = f.shot.extremal;
  CotangentPoint l = ext.state_at(0.5 * (ext.tau2 + ext.T));
  l.p += vec3(1e-3, 0, 0);

  const double h23 = f.bt.H23(l);
  REQUIRE(std::abs(h23) > 1e-6);
  const double theta = f.mach.solve_theta(l);

  // The slide zeroes the switching bracket.
  CotangentPoint moved = f.mach.exp_f1(l, theta);
  CHECK(std::abs(f.bt.H23(moved)) <= 1e-10);

  // First-order magnitude: theta is H23 / L up to sign and curvature.
  const double ratio = theta * f.bt.L(l) / h23;
  CHECK(std::abs(std::abs(ratio) - 1.0) <= 0.05);

  // The edge direction is constant here, so the lifted slide is a plain
  // translation of x and leaves the covector fixed.
  Eigen::VectorXd f1x = f.cfg.problem.f1()(l.x);
  CHECK((moved.x - (l.x + theta * f1x)).norm() <= 1e-10);
  CHECK((moved.p - l.p).norm() <= 1e-10);

  CotangentPoint same = f.mach.exp_f1(l, 0.0);
  CHECK((same.x - l.x).norm() == 0.0);
  CHECK((same.p - l.p).norm() == 0.0);
}

TEST_CASE("composite flow from the reference endpoint reproduces the extremal") {
  Fixture& f = fx();
  const BBSExtremal& ext = f.shot.extremal;
  std::vector<double> times = linspace(ext.T, 0.0, 60);  // descending
  OvermaxTrajectory traj = f.mach.flow_sampled(ext.lT, times);

  CHECK(std::abs(traj.tau2 - ext.tau2) <= 1e-7);
  CHECK(std::abs(traj.tau1 - ext.tau1) <= 1e-7);
  CHECK(std::abs(traj.t2 - ext.tau2) <= 1e-7);

  double worst = 0, worst_f1 = 0, worst_h23 = 0;
  for (size_t i = 0; i < traj.t.size(); ++i) {
    CotangentPoint ref = ext.state_at(traj.t[i]);
    worst = std::max(worst, (traj.l[i].x - ref.x).norm() + (traj.l[i].p - ref.p).norm());
    if (traj.branch[i] == 0) {
      worst_f1 = std::max(worst_f1, std::abs(f.bt.F1(traj.l[i])));
      worst_h23 = std::max(worst_h23, std::abs(f.bt.H23(traj.l[i])));
    }
  }
  CHECK(worst <= 1e-7);
  CHECK(worst_f1 <= 1e-7);
  CHECK(worst_h23 <= 1e-7);

  // Branch extensions agree with the stored junction states.
  CotangentPoint c2 = f.mach.point_on_branch(traj, traj.tau2, 2);
  CHECK((c2.x - traj.lcorr.x).norm() + (c2.p - traj.lcorr.p).norm() <= 1e-9);
  CotangentPoint c3 = f.mach.point_on_branch(traj, traj.tau1, 3);
  CHECK((c3.x - traj.l1.x).norm() + (c3.p - traj.l1.p).norm() <= 1e-9);
  CotangentPoint c1 = f.mach.point_on_branch(traj, ext.tau2, 1);
  CHECK((c1.x - traj.ltilde.x).norm() + (c1.p - traj.ltilde.p).norm() <= 1e-9);
}

TEST_CASE("single-point composite flow matches the sampled one") {
  Fixture& f = fx();
  const BBSExtremal& ext = f.shot.extremal;
  const double t = 0.5 * ext.tau1;
  CotangentPoint a = f.mach.overmax_flow(t, ext.lT);
  CotangentPoint b = ext.state_at(t);
  CHECK((a.x - b.x).norm() + (a.p - b.p).norm() <= 1e-7);
}

TEST_CASE("projected flow linearizations stay invertible") {
  Fixture& f = fx();
  ProbeReport rep = invertibility_probe(f.mach, f.mc);
  CHECK(!rep.flagged);
  CHECK(!rep.rows.empty());
  CHECK(rep.min_sv == doctest::Approx(0.2592784584).epsilon(1e-6));
  CHECK(rep.junction_min_sv == doctest::Approx(0.4837561892).epsilon(1e-6));
  CHECK(rep.injectivity_min_ratio == doctest::Approx(0.6336750664).epsilon(1e-6));
  CHECK(rep.radius > 0);
  for (const auto& row : rep.rows) CHECK(row.min_sv > 0.1);

  std::ostringstream os;
  write_probe_csv(os, rep);
  const std::string s = os.str();
  CHECK(s.rfind("t,", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == static_cast<long>(rep.rows.size()) + 1);
}

TEST_CASE("maximized flow is conjugate to the quadratic model flow") {
  Fixture& f = fx();
  LQData lq = assemble_lq(f.bt, f.shot.extremal, f.mc);
  LQFlow flow = lq_hamiltonian_flow(lq);
  IotaReport rep = iota_conjugacy_check(f.mach, f.mc, lq, flow, 12);
  CHECK(rep.max_residual <= 1e-4);
  CHECK(rep.t.size() == rep.residual.size());
  CHECK(!rep.t.empty());
  // The residual at the anchor time is essentially zero.
  CHECK(rep.residual.front() <= 1e-6);
}

TEST_CASE("admissible perturbations never beat the reference cost") {
  Fixture& f = fx();
  PerturbReport rep = compare_admissible(f.bt, f.shot.extremal, 40, 20240817u);
  CHECK(rep.trials.size() == 40);
  CHECK(rep.min_gap >= -1e-9);
  CHECK(rep.discarded < 40);
  CHECK(rep.has_exponent);
  CHECK(rep.dither_exponent == doctest::Approx(2.0).epsilon(0.15));
  bool saw_kept = false;
  for (const auto& tr : rep.trials)
    if (!tr.discarded) {
      saw_kept = true;
      CHECK(tr.gap >= -1e-9);
    }
  CHECK(saw_kept);

  std::ostringstream os;
  write_perturb_csv(os, rep);
  CHECK(os.str().rfind("trial,", 0) == 0);
}
