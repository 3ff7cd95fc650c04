#pragma once

#include "bbsox/extremal.hpp"

namespace bbsox {

// Solver settings carried alongside a parsed problem.
struct SolverSettings {
  double tol = 1e-9;
  int grid = 400;
  double margin = 1e-7;
};

// A problem plus everything needed to run the pipeline on it: shooting guess,
// solver settings, and the expression strings it was built from (kept so a
// config can be serialized back out losslessly).
struct ProblemConfig {
  std::string name;
  ControlAffineProblem problem;
  std::vector<std::string> vars;
  std::vector<std::vector<std::string>> field_exprs;  // one expression list per vertex
  std::string cost_expr;
  ShootingGuess guess;
  SolverSettings solver;
};

// Three-state Mayer form of the Van der Pol oscillator steering problem:
// scalar control in [-1, 1] entering the acceleration, quadratic running cost
// accumulated into the third state.
ControlAffineProblem vanderpol_problem();
ProblemConfig vanderpol_config();

// Bilinear ensemble problem with box controls, normalized to the unit box and
// augmented to Mayer form.  State is (N, x_{n+1}); vertex fields enumerate
// f0 + subset sums of the control fields (low bit = first control).
ControlAffineProblem bilinear_to_mayer(const Eigen::MatrixXd& A,
                                       const std::vector<Eigen::MatrixXd>& B,
                                       const Eigen::VectorXd& q, const Eigen::VectorXd& r,
                                       const Eigen::VectorXd& s, const Eigen::VectorXd& u_max,
                                       double T, const Eigen::VectorXd& N0);

// Parses the structured problem-file format ([problem] / [fields] / [cost] /
// [structure] / [solver] sections, infix polynomial expressions).  Problems
// with a running cost are augmented to Mayer form with one extra state.
ProblemConfig parse_problem_config(const std::string& text);
ProblemConfig load_problem_config(const std::string& path);

std::string serialize_problem_config(const ProblemConfig& cfg);

}  // namespace bbsox
