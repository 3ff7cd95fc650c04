#pragma once

#include "bbsox/field.hpp"
#include "bbsox/ode.hpp"

namespace bbsox {

// Possibly time-dependent vector field, as value + Jacobian callbacks.
struct TimeField {
  int dim = 0;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> eval;
  std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> jac;

  static TimeField from(const SmoothField& f);
};

struct FlowSegment {
  TimeField field;
  double t_start = 0.0;
  double t_end = 0.0;  // t_end < t_start flows backward
  OdeOptions tol;

  static FlowSegment of(const SmoothField& f, double t0, double t1, OdeOptions opts = {});
  static FlowSegment of(TimeField f, double t0, double t1, OdeOptions opts = {});
};

enum class TransportDirection { Pushforward, InversePushforward };

// Endpoint of the flow of seg.field started at x at t_start.
Eigen::VectorXd flow(const FlowSegment& seg, const Eigen::VectorXd& x);

// Transports a tangent vector based at x (the segment's start point) along the
// flow.  Pushforward solves the variational equation d/dt delta = Df delta;
// inverse-pushforward solves the adjoint variational equation and realizes the
// pullback of vectors from the segment's endpoint frame back to the start.
Eigen::VectorXd transport_vector(const FlowSegment& seg, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& v, TransportDirection dir);

// Flow endpoint together with the full variational (monodromy) matrix
// V = d(flow)/dx.
struct FlowWithVariational {
  Eigen::VectorXd x_end;
  Eigen::MatrixXd V;
};
FlowWithVariational flow_with_variational(const FlowSegment& seg, const Eigen::VectorXd& x);

}  // namespace bbsox
