#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "bbsox/problems.hpp"

using namespace bbsox;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

// Two-state problem with a closed-form bang-bang-singular extremal:
//   h1 = (-2,   -x1^2/2 - 1/2)
//   h2 = (-1/2, -x1^2/2 + 1)
//   h3 = h2 + (1, 0)
//   c  = -x2, x0 = (3, 0), T = 4.
// The singular surface is {x1 = 0, p1 = 0}; the extremal has tau1 = 1,
// tau2 = 3, x(T) = (0, 0), p2 = 1, singular control 1/2, and H12 = 3/2 at
// the first switch.
ControlAffineProblem toy_problem() {
  auto vars = default_var_names(2);
  auto field = [&](const std::string& e1, const std::string& e2) {
    return SmoothField::polynomial(
        {parse_polynomial(e1, vars), parse_polynomial(e2, vars)});
  };
  ControlAffineProblem prob;
  prob.fields = {field("-2", "-0.5*x1^2 - 0.5"), field("-0.5", "-0.5*x1^2 + 1"),
                 field("0.5", "-0.5*x1^2 + 1")};
  prob.cost = ScalarFunction::polynomial(parse_polynomial("-x2", vars));
  prob.x0 = vec2(3, 0);
  prob.T = 4.0;
  prob.edge = {0, 1, 2};
  return prob;
}

}  // namespace

TEST_CASE("closed-form toy: shooting recovers the hand-solved structure") {
  ControlAffineProblem prob = toy_problem();
  BracketTable bt(prob);

  ShootingGuess guess;
  guess.x_T = vec2(0.1, -0.1);
  guess.tau1 = 0.9;
  guess.tau2 = 2.9;
  ShootingResult res = shoot_bbs(bt, guess);

  CHECK(res.residual_norm <= 1e-9);
  CHECK(std::abs(res.extremal.tau1 - 1.0) <= 1e-6);
  CHECK(std::abs(res.extremal.tau2 - 3.0) <= 1e-6);
  CHECK(res.extremal.lT.x.norm() <= 1e-6);
  CHECK(res.extremal.lT.p.isApprox(vec2(0, 1), 1e-8));
  CHECK(bt.H12(res.extremal.l1) == doctest::Approx(1.5).epsilon(1e-6));

  // Singular control is identically 1/2 and L is identically p2 = 1.
  for (double t : linspace(res.extremal.tau2, res.extremal.T, 20)) {
    CotangentPoint l = res.extremal.state_at(t);
    CHECK(bt.singular_control(l) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(bt.L(l) == doctest::Approx(1.0).epsilon(1e-7));
  }

  // Initial point is reproduced by the backward integration.
  CHECK((res.extremal.state_at(0.0).x - prob.x0).norm() <= 1e-6);
}

TEST_CASE("toy: reference integration from the exact endpoint") {
  ControlAffineProblem prob = toy_problem();
  BracketTable bt(prob);
  CotangentPoint lT(vec2(0, 0), vec2(0, 1));
  BBSExtremal ext = integrate_reference(bt, lT, 1.0, 3.0);

  CHECK((ext.state_at(0.0).x - vec2(3, 0)).norm() <= 1e-8);
  // p(tau1): p1 = -(tau2 - tau1)^2 / 4 = -1 on the closed-form arc.
  CHECK(ext.l1.p[0] == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(ext.l1.p[1] == doctest::Approx(1.0).epsilon(1e-10));
  // Junction continuity of the state samples.
  CHECK((ext.arc1.l.back().x - ext.arc2.l.front().x).norm() <= 1e-9);
  CHECK((ext.arc2.l.back().x - ext.arc3.l.front().x).norm() <= 1e-9);
}

TEST_CASE("oscillator steering: shooting from the documented guess") {
  ProblemConfig cfg = vanderpol_config();
  BracketTable bt(cfg.problem);

  ShootingGuess guess;
  guess.x_T = vec3(0.5, 0, 2);
  guess.tau1 = 1.3;
  guess.tau2 = 2.5;
  ShootingResult res = shoot_bbs(bt, guess);

  CHECK(res.residual_norm <= 1e-9);
  CHECK(std::abs(res.extremal.tau1 - 1.3667) <= 5e-3);
  CHECK(std::abs(res.extremal.tau2 - 2.4601) <= 5e-3);

  const BBSExtremal& ext = res.extremal;

  // Transversality: p(T) = -grad c(x(T)).
  CHECK((ext.lT.p + cfg.problem.cost.gradient(ext.lT.x)).norm() <= 1e-10);

  // Conservation along the singular arc.
  double worst_f1 = 0, worst_h23 = 0;
  for (double t : linspace(ext.tau2, ext.T, 200)) {
    CotangentPoint l = ext.state_at(t);
    worst_f1 = std::max(worst_f1, std::abs(bt.F1(l)));
    worst_h23 = std::max(worst_h23, std::abs(bt.H23(l)));
  }
  CHECK(worst_f1 <= 1e-8);
  CHECK(worst_h23 <= 1e-8);

  // Singular control stays in (0, 1) and matches the state feedback
  // (1 - u_sing)/2 with u_sing = 2 x1 - x2 (1 - x1^2).
  double worst_fb = 0;
  for (double t : linspace(ext.tau2, ext.T, 400)) {
    CotangentPoint l = ext.state_at(t);
    const double us = bt.singular_control(l);
    CHECK(us > 0.0);
    CHECK(us < 1.0);
    const double using_ = 2 * l.x[0] - l.x[1] * (1 - l.x[0] * l.x[0]);
    worst_fb = std::max(worst_fb, std::abs(us - 0.5 * (1.0 - using_)));
  }
  CHECK(worst_fb <= 1e-8);

  // Restarting from the solution converges immediately.
  ShootingGuess exact;
  exact.x_T = ext.lT.x;
  exact.tau1 = ext.tau1;
  exact.tau2 = ext.tau2;
  ShootingResult again = shoot_bbs(bt, exact);
  CHECK(again.iterations <= 1);
  CHECK(again.residual_norm <= 1e-9);
}

TEST_CASE("condition checks on the certified extremal") {
  ProblemConfig cfg = vanderpol_config();
  BracketTable bt(cfg.problem);
  ShootingResult res = shoot_bbs(bt, cfg.guess);
  ConditionReport rep = check_conditions(bt, res.extremal);
  CHECK(rep.all_passed());

  bool saw_sglc = false;
  for (const auto& c : rep.checks) {
    if (c.name == "sglc") {
      saw_sglc = true;
      CHECK(c.margin == doctest::Approx(4.0).epsilon(1e-6));
    }
  }
  CHECK(saw_sglc);
}

TEST_CASE("condition checks flag structurally wrong inputs") {
  ProblemConfig cfg = vanderpol_config();
  BracketTable bt(cfg.problem);
  ShootingResult res = shoot_bbs(bt, cfg.guess);

  // Swapping the first two vertex roles misidentifies the bang maximizers.
  ControlAffineProblem swapped = cfg.problem;
  swapped.edge = {1, 0, 1};
  BracketTable bts(swapped);
  ConditionReport rep = check_conditions(bts, res.extremal);
  CHECK(!rep.all_passed());
  bool bang_failed_negative = false;
  for (const auto& c : rep.checks)
    if (c.name.rfind("bang-maximality", 0) == 0 && c.verdict == CheckVerdict::Fail &&
        c.margin < 0)
      bang_failed_negative = true;
  CHECK(bang_failed_negative);

  // Equal first and second vertex fields force H12 = 0 at the switch.
  ControlAffineProblem degen = cfg.problem;
  degen.fields = {cfg.problem.fields[0], cfg.problem.fields[0], cfg.problem.fields[1]};
  degen.edge = {0, 1, 2};
  BracketTable btd(degen);
  ConditionReport repd = check_conditions(btd, res.extremal);
  CHECK(!repd.all_passed());
  for (const auto& c : repd.checks)
    if (c.name == "switch1-regularity") {
      CHECK(c.verdict == CheckVerdict::Fail);
      CHECK(std::abs(c.margin) <= 1e-10);
    }
}

TEST_CASE("degenerate singular arc of zero length") {
  ControlAffineProblem prob = toy_problem();
  BracketTable bt(prob);
  CotangentPoint lT(vec2(0.5, -1.0), vec2(-0.25, 1.0));
  BBSExtremal ext = integrate_reference(bt, lT, 1.0, 4.0);
  CHECK(ext.tau2 == 4.0);
  CHECK((ext.state_at(4.0).x - lT.x).norm() <= 1e-12);
  // The whole trajectory is bang-bang; flowing the second bang field forward
  // from tau1 reproduces the endpoint.
  Eigen::VectorXd x1 = ext.state_at(1.0).x;
  Eigen::VectorXd fwd = flow(FlowSegment::of(prob.h2(), 1.0, 4.0), x1);
  CHECK((fwd - lT.x).norm() <= 1e-8);
}

TEST_CASE("csv export shape") {
  ProblemConfig cfg = vanderpol_config();
  BracketTable bt(cfg.problem);
  ShootingResult res = shoot_bbs(bt, cfg.guess);
  std::ostringstream os;
  write_extremal_csv(os, bt, res.extremal);
  const std::string s = os.str();
  CHECK(s.rfind("t,", 0) == 0);
  CHECK(s.find("F1") != std::string::npos);
  CHECK(std::count(s.begin(), s.end(), '\n') > 100);
}
