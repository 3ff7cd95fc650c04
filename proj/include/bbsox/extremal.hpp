#pragma once

#include <iosfwd>
#include <optional>

#include "bbsox/problem.hpp"

namespace bbsox {

struct SglcDegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShootingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExtremalOptions {
  OdeOptions ode;                   // defaults rtol 1e-10 / atol 1e-12
  int samples_per_arc = 400;
  double saturation_margin = 1e-6;  // warn if u_S leaves [m, 1-m]
  double sglc_floor = 1e-9;         // |L| below this on the singular arc -> error
  int max_iterations = 60;
  double residual_tol = 1e-9;
};

// One arc of the extremal, sampled on an ascending time grid with exact ODE
// slopes stored for cubic Hermite interpolation.
struct ArcSamples {
  std::vector<double> t;
  std::vector<CotangentPoint> l;
  std::vector<Eigen::VectorXd> xdot, pdot;
  std::vector<double> u;  // singular control on arc 3, else 0
};

// Bang-bang-singular Pontryagin extremal: h1 on [0,tau1], h2 on [tau1,tau2],
// singular (h2 + upsilon f1) on [tau2,T].
struct BBSExtremal {
  double tau1 = 0, tau2 = 0, T = 0;
  ArcSamples arc1, arc2, arc3;
  CotangentPoint l0, l1, l2, lT;
  std::vector<std::string> warnings;

  // Cubic Hermite interpolation of (x, p); clamps to the nearest arc endpoint
  // interval outside [0, T].
  CotangentPoint state_at(double t) const;
  int arc_index(double t) const;  // 0, 1, or 2
};

BBSExtremal integrate_reference(const BracketTable& bt, const CotangentPoint& lT, double tau1,
                                double tau2, const ExtremalOptions& opts = {});

struct ShootingGuess {
  Eigen::VectorXd x_T;
  double tau1 = 0, tau2 = 0;
};

struct ShootingResult {
  BBSExtremal extremal;
  int iterations = 0;
  double residual_norm = 0;
  Eigen::VectorXd residuals;  // weighted: state (n), F1(l_T), H23(l_T), (H1-H2)(l_tau1)
};

ShootingResult shoot_bbs(const BracketTable& bt, const ShootingGuess& guess,
                         const ExtremalOptions& opts = {});

enum class CheckVerdict { Pass, Fail, Skipped };

struct ConditionCheck {
  std::string name;
  CheckVerdict verdict = CheckVerdict::Skipped;
  double margin = 0;
  double worst_time = 0;
  std::string diagnostics;
};

struct ConditionReport {
  std::vector<ConditionCheck> checks;
  bool all_passed() const;
};

struct CheckOptions {
  int grid = 400;            // samples per arc
  double delta_frac = 1e-3;  // junction exclusion = delta_frac * T
  double sign_slack = 1e-9;  // sign-only test tolerance at arc endpoints
};

ConditionReport check_conditions(const BracketTable& bt, const BBSExtremal& ext,
                                 const CheckOptions& cfg = {});

// CSV export: t, x, p, u (active-control encoding: negative 1-based vertex
// index on bang arcs, singular control value on the singular arc), F1, H23,
// H232, H323, L.
void write_extremal_csv(std::ostream& out, const BracketTable& bt, const BBSExtremal& ext);

// The time-dependent reference field f_t: h1, then h2, then h2 + upsilon(t) f1
// with upsilon(t) frozen from the reference extremal.  Defined off the
// reference trajectory as well (upsilon depends on t only).
class ReferenceField {
 public:
  ReferenceField(const BracketTable& bt, const BBSExtremal& ext);

  int dim() const;
  double upsilon(double t) const;  // 0 on the bang arcs
  Eigen::VectorXd eval(double t, const Eigen::VectorXd& x) const;
  Eigen::MatrixXd jac(double t, const Eigen::VectorXd& x) const;
  std::vector<Eigen::MatrixXd> hess(double t, const Eigen::VectorXd& x) const;
  TimeField time_field() const;

  // Arc-junction times strictly inside (a,b) (or (b,a) for backward spans),
  // for splitting integrations at the control discontinuities.
  std::vector<double> split_times(double a, double b) const;

  const BBSExtremal& extremal() const { return *ext_; }

 private:
  const BracketTable* bt_;
  const BBSExtremal* ext_;
};

// Linearization of the cotangent-lifted reference flow along the extremal:
// the 2n x 2n matrix mapping (delta x, delta p) at t_from to t_to.
Eigen::MatrixXd reference_linearization(const ReferenceField& rf, double t_from, double t_to,
                                        const OdeOptions& opts = {});

}  // namespace bbsox
