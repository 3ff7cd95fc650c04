#include "bbsox/flow.hpp"

namespace bbsox {

TimeField TimeField::from(const SmoothField& f) {
  TimeField tf;
  tf.dim = f.dim();
  SmoothField fc = f;
  tf.eval = [fc](double, const Eigen::VectorXd& x) { return fc(x); };
  tf.jac = [fc](double, const Eigen::VectorXd& x) { return fc.jacobian(x); };
  return tf;
}

FlowSegment FlowSegment::of(const SmoothField& f, double t0, double t1, OdeOptions opts) {
  return FlowSegment{TimeField::from(f), t0, t1, opts};
}

FlowSegment FlowSegment::of(TimeField f, double t0, double t1, OdeOptions opts) {
  return FlowSegment{std::move(f), t0, t1, opts};
}

Eigen::VectorXd flow(const FlowSegment& seg, const Eigen::VectorXd& x) {
  if (x.size() != seg.field.dim) throw DimensionError("flow: point dimension mismatch");
  auto rhs = [&seg](double t, const Eigen::VectorXd& y) { return seg.field.eval(t, y); };
  return integrate(rhs, seg.t_start, seg.t_end, x, seg.tol);
}

Eigen::VectorXd transport_vector(const FlowSegment& seg, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& v, TransportDirection dir) {
  const int n = seg.field.dim;
  if (x.size() != n || v.size() != n)
    throw DimensionError("transport_vector: dimension mismatch");
  if (seg.t_start == seg.t_end) return v;

  auto coupled_rhs = [&seg, n](double t, const Eigen::VectorXd& y) {
    Eigen::VectorXd xi = y.head(n), delta = y.tail(n);
    Eigen::VectorXd dy(2 * n);
    dy.head(n) = seg.field.eval(t, xi);
    dy.tail(n) = seg.field.jac(t, xi) * delta;
    return dy;
  };

  if (dir == TransportDirection::Pushforward) {
    Eigen::VectorXd y0(2 * n);
    y0 << x, v;
    Eigen::VectorXd y1 = integrate(coupled_rhs, seg.t_start, seg.t_end, y0, seg.tol);
    return y1.tail(n);
  }
  // Inverse pushforward: v lives at the segment's endpoint; run the variational
  // equation against the flow back to the start point.
  Eigen::VectorXd x_end = flow(seg, x);
  Eigen::VectorXd y0(2 * n);
  y0 << x_end, v;
  Eigen::VectorXd y1 = integrate(coupled_rhs, seg.t_end, seg.t_start, y0, seg.tol);
  return y1.tail(n);
}

FlowWithVariational flow_with_variational(const FlowSegment& seg, const Eigen::VectorXd& x) {
  const int n = seg.field.dim;
  if (x.size() != n) throw DimensionError("flow_with_variational: dimension mismatch");
  auto rhs = [&seg, n](double t, const Eigen::VectorXd& y) {
    Eigen::VectorXd xi = y.head(n);
    Eigen::MatrixXd V = Eigen::Map<const Eigen::MatrixXd>(y.data() + n, n, n);
    Eigen::MatrixXd J = seg.field.jac(t, xi);
    Eigen::VectorXd dy(n + n * n);
    dy.head(n) = seg.field.eval(t, xi);
    Eigen::Map<Eigen::MatrixXd>(dy.data() + n, n, n) = J * V;
    return dy;
  };
  Eigen::VectorXd y0(n + n * n);
  y0.head(n) = x;
  Eigen::Map<Eigen::MatrixXd>(y0.data() + n, n, n) = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd y1 = integrate(rhs, seg.t_start, seg.t_end, y0, seg.tol);
  FlowWithVariational out;
  out.x_end = y1.head(n);
  out.V = Eigen::Map<const Eigen::MatrixXd>(y1.data() + n, n, n);
  return out;
}

}  // namespace bbsox
