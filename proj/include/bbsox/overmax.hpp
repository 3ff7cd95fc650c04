#pragma once

#include <cstdint>

#include "bbsox/secondvar.hpp"

namespace bbsox {

struct OvermaxOptions {
  double newton_tol = 1e-12;     // residual tolerance for theta / t2 / tau1 solves
  int newton_max_iter = 40;
  double fd_step = 1e-6;         // symplectic-gradient step for the maximized lift
  int exp_steps = 16;            // fixed RK4 steps for the edge-direction flow
  int steps_per_unit = 200;      // fixed RK4 steps per unit time for branch flows
  double sglc_floor = 1e-9;
  double radius_scale = 0.1;     // validated neighborhood = scale * trajectory scale
};

// One evaluated trajectory of the composite maximized flow, backward from T.
// Branch codes: 0 singular interval, 1 correction arc, 2 second bang arc,
// 3 first bang arc.
struct OvermaxTrajectory {
  CotangentPoint l_start;        // the point fed in at time T
  CotangentPoint ltilde;         // state at the reference singular entry time
  CotangentPoint lcorr;          // state at this trajectory's tau2
  CotangentPoint l1;             // state at this trajectory's tau1
  double t2 = 0, tau2 = 0, tau1 = 0;
  std::vector<double> t;         // descending sample times
  std::vector<CotangentPoint> l;
  std::vector<int> branch;
};

// Solvers and flows for the maximized Hamiltonian built by sliding along the
// edge direction until the switching bracket vanishes.
class OvermaxMachinery {
 public:
  OvermaxMachinery(const BracketTable& bt, const BBSExtremal& ext,
                   const OvermaxOptions& opts = {});

  // Slide parameter: Newton zero of the switching bracket along the
  // edge-direction lifted flow.  Normalized to 0 when the bracket already
  // vanishes.
  double solve_theta(const CotangentPoint& l) const;

  // Lifted edge flow exp(theta F1-vec).
  CotangentPoint exp_f1(const CotangentPoint& l, double theta) const;

  // Maximized second-vertex lift and its finite-difference symplectic
  // gradient (as a cotangent-bundle vector field, packed (x, p)).
  double htilde2(const CotangentPoint& l) const;
  Eigen::VectorXd htilde2_vecfield(const CotangentPoint& l) const;

  // Composite flow from (T, l) backward, sampled at the given descending
  // times in [0, T].
  OvermaxTrajectory flow_sampled(const CotangentPoint& l,
                                 const std::vector<double>& times) const;
  CotangentPoint overmax_flow(double t, const CotangentPoint& l) const;

  // Branch extension: the state at time t obtained by forcing the given
  // branch's field (2 = second bang, 3 = first bang), extending past the
  // trajectory's own switching time if needed.
  CotangentPoint point_on_branch(const OvermaxTrajectory& traj, double t, int branch) const;

  const BBSExtremal& extremal() const { return *ext_; }
  const BracketTable& table() const { return *bt_; }
  const OvermaxOptions& options() const { return opts_; }

 private:
  double t2_solve(const CotangentPoint& ltilde, CotangentPoint* out) const;
  double tau1_solve(double tau2l, const CotangentPoint& lcorr, CotangentPoint* out) const;

  const BracketTable* bt_;
  const BBSExtremal* ext_;
  OvermaxOptions opts_;
};

struct ProbeRow {
  double t = 0;
  int branch = 0;
  double min_sv = 0;
};

struct ProbeReport {
  std::vector<ProbeRow> rows;
  double min_sv = 0;            // over all rows
  double junction_min_sv = 0;   // min over convex combinations of the two
                                // one-sided linearizations at the first switch
  double injectivity_min_ratio = 0;  // min |projected gap| / |initial gap|
  double radius = 0;            // sampling radius actually probed
  bool flagged = false;         // any near-singular value found
  std::string disclaimer;
};

struct ProbeOptions {
  int grid = 50;
  double fd_step_scale = 1e-5;
  double sv_floor = 1e-6;       // below this * scale -> flagged
  int injectivity_pairs = 3;
};

// Finite-difference linearization of the projected composite flow restricted
// to the graph {p = -grad ctilde(x)}, sampled over a time grid.
ProbeReport invertibility_probe(const OvermaxMachinery& mach, const ModifiedCost& mc,
                                const ProbeOptions& opts = {});

struct IotaReport {
  double max_residual = 0;
  double worst_time = 0;
  bool flipped_sign = false;    // second sign convention matched better
  std::vector<double> t;
  std::vector<double> residual;
};

// Compares the finite-difference linearization of (reference flow)^{-1}
// composed with the maximized flow against the conjugated LQ fundamental
// solution over a grid in [tau2, T].
IotaReport iota_conjugacy_check(const OvermaxMachinery& mach, const ModifiedCost& mc,
                                const LQData& lq, const LQFlow& flow, int grid = 20);

enum class PerturbationKind { Needle, SingularOffset, SwitchDither };

struct PerturbationTrial {
  int id = 0;
  PerturbationKind kind = PerturbationKind::Needle;
  std::string descriptor;
  double gap = 0;
  bool discarded = false;       // left the comparison tube
};

struct PerturbReport {
  std::vector<PerturbationTrial> trials;
  double min_gap = 0;
  int discarded = 0;
  double dither_exponent = 0;   // log-log slope of gap vs switch dither size
  bool has_exponent = false;
};

struct PerturbOptions {
  double tube_radius = 0.05;
  int steps_per_unit = 2000;    // fixed RK4 grid shared by all trials
  double needle_max_len = 0.05;
  double singular_max_offset = 0.2;
  double dither_max = 0.02;
};

// Open-loop cost comparison: integrates perturbed admissible controls with
// the same fixed-step integrator as the reference and reports cost gaps.
PerturbReport compare_admissible(const BracketTable& bt, const BBSExtremal& ext,
                                 int trials, std::uint64_t seed,
                                 const PerturbOptions& opts = {});

void write_probe_csv(std::ostream& out, const ProbeReport& rep);
void write_perturb_csv(std::ostream& out, const PerturbReport& rep);

}  // namespace bbsox
