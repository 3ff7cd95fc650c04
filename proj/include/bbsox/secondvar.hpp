#pragma once

#include "bbsox/extremal.hpp"

namespace bbsox {

struct AssumptionViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CostCase { F1Invariant, F1Transverse };

// Modified terminal cost, flattened along f1 near the reference final point:
// either the original cost (when it is already invariant along f1) or the
// cost evaluated on the leaf {L_{f1} c = 0} reached by sliding along f1.
struct ModifiedCost {
  CostCase kind = CostCase::F1Invariant;
  ScalarFunction ctilde;
  double l2f1c = 0;  // second Lie derivative of c along f1 at the final point
                     // (transverse case only)
};

struct ModCostOptions {
  double invariance_tol = 1e-10;
  double probe_radius = 1e-2;  // neighborhood sampling radius (relative)
  int probe_points = 20;
  double newton_tol = 1e-12;
  int newton_max_iter = 50;
};

ModifiedCost build_ctilde(const BracketTable& bt, const BBSExtremal& ext,
                          const ModCostOptions& opts = {});

// Data of the LQ problem on [tau2, T] describing the second variation
//   J = e0^2 (H12 + L2k_ctilde) / 2 + integral of (w a.zeta + R w^2 / 2),
// with zeta' = w gdot, zeta(tau2) = e0 k, where a_t is the derivative at x_f
// of y -> <grad ctilde(y), gdot_t(y)> (gdot_t being the transported bracket
// field started from y).
struct LQData {
  int n = 0;
  double tau2 = 0, T = 0;
  std::function<double(double)> R;                  // Legendre weight, > 0
  std::function<Eigen::VectorXd(double)> gdot;      // transported bracket field at x_f
  std::function<Eigen::VectorXd(double)> crossform; // covector a_t
  Eigen::VectorXd k;                                // transported h1 - h2 at tau1
  bool has_k = false;
  double H12 = 0;
  double L2k_ctilde = 0;  // second Lie derivative of ctilde along k
  Eigen::VectorXd omega;     // any covector with <omega, k> = 1 (has_k only)

  // Grid snapshots for CSV export / interpolation.
  std::vector<double> tgrid;
  std::vector<double> Rg;
  std::vector<Eigen::VectorXd> gdotg, crossg;

  // Purely functional instance (tests / randomized oracle cross-checks).
  static LQData analytic(int n, double tau2, double T, std::function<double(double)> R,
                         std::function<Eigen::VectorXd(double)> gdot,
                         std::function<Eigen::VectorXd(double)> crossform,
                         Eigen::VectorXd k = {}, double H12 = 0, double L2k = 0);
};

struct LQAssembleOptions {
  int grid = 400;
  double fd_step_scale = 1e-5;  // crossform step = scale * (1 + |x_f|)
  OdeOptions ode;
};

LQData assemble_lq(const BracketTable& bt, const BBSExtremal& ext, const ModifiedCost& mc,
                   const LQAssembleOptions& opts = {});

// Fundamental solution of the LQ Hamiltonian system integrated backward from
// T, sampled on a descending grid.  Phi maps (mu, zeta)(T) to (mu, zeta)(t);
// Phi at T is the identity.
struct LQFlow {
  int n = 0;
  std::vector<double> t;             // descending, t.front() == T
  std::vector<Eigen::MatrixXd> Phi;  // 2n x 2n

  // Blocks of the family started at (mu, zeta)(T) = (0, e_i).
  Eigen::MatrixXd zeta_block(size_t i) const { return Phi[i].bottomRightCorner(n, n); }
  Eigen::MatrixXd mu_block(size_t i) const { return Phi[i].topRightCorner(n, n); }
};

LQFlow lq_hamiltonian_flow(const LQData& lq, int grid = 400, const OdeOptions& opts = {});

struct CoercivityReport {
  CostCase cost_case = CostCase::F1Invariant;
  bool conjugate_pass = false;
  double min_zeta_sv = 0;   // min over the grid of the smallest singular value
  double worst_time = 0;
  int det_sign_flips = 0;
  bool boundary_checked = false;
  double boundary_value = 0;
  bool boundary_pass = true;
  bool pass = false;
  std::string notes;
};

struct CoercivityOptions {
  double margin_scale = 1e-7;  // margin = margin_scale * max(1, max |R|)
};

CoercivityReport coercivity_test(const LQData& lq, const LQFlow& flow,
                                 const ModifiedCost* mc = nullptr,
                                 const CoercivityOptions& opts = {});

// Brute-force check: discretizes w as piecewise constant on N subintervals,
// assembles the quadratic form by polarization, and reports the smallest
// eigenvalue of the resulting symmetric matrix.
struct OracleResult {
  double min_eigenvalue = 0;
  bool coercive = false;
  int nvars = 0;
};

OracleResult coercivity_oracle(const LQData& lq, int N, int fine_per_interval = 8);

void write_lq_csv(std::ostream& out, const LQData& lq);

}  // namespace bbsox
