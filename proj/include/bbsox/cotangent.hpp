#pragma once

#include "bbsox/flow.hpp"

namespace bbsox {

// Point of the cotangent bundle in the single global chart: base point x and
// covector p, with pairing <l, v> = p . v.
struct CotangentPoint {
  Eigen::VectorXd x;
  Eigen::VectorXd p;

  CotangentPoint() = default;
  CotangentPoint(Eigen::VectorXd x_, Eigen::VectorXd p_) : x(std::move(x_)), p(std::move(p_)) {
    if (x.size() != p.size()) throw DimensionError("CotangentPoint: x/p dimension mismatch");
  }
  int dim() const { return static_cast<int>(x.size()); }

  Eigen::VectorXd packed() const;  // (x, p) as one vector
  static CotangentPoint unpack(const Eigen::VectorXd& y);
};

// Hamiltonian lift F(l) = <l, f(pi l)> = p . f(x).
double lifted_value(const SmoothField& f, const CotangentPoint& l);

// Canonical symplectic form on (delta_p, delta_x) pairs:
// sigma((dp1,dx1),(dp2,dx2)) = dp1 . dx2 - dp2 . dx1.
double symplectic_form(const Eigen::VectorXd& dp1, const Eigen::VectorXd& dx1,
                       const Eigen::VectorXd& dp2, const Eigen::VectorXd& dx2);

// Right-hand side of the cotangent-lifted (adjoint) flow of a field:
// xdot = f(t,x), pdot = -Df(t,x)^T p.
OdeRhs adjoint_rhs(const TimeField& f);

// Adjoint flow endpoint from l at t_from to t_to (either direction).
CotangentPoint adjoint_flow_to(const TimeField& f, const CotangentPoint& l, double t_from,
                               double t_to, const OdeOptions& opts = {});
CotangentPoint adjoint_flow_to(const SmoothField& f, const CotangentPoint& l, double t_from,
                               double t_to, const OdeOptions& opts = {});

// Sampled adjoint-flow trajectory at the requested times (monotone from t_from
// toward t_to).
std::vector<CotangentPoint> adjoint_flow_sampled(const TimeField& f, const CotangentPoint& l,
                                                 double t_from, double t_to,
                                                 const std::vector<double>& times,
                                                 const OdeOptions& opts = {});

}  // namespace bbsox
