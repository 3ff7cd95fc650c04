#include "bbsox/cotangent.hpp"

namespace bbsox {

Eigen::VectorXd CotangentPoint::packed() const {
  Eigen::VectorXd y(2 * dim());
  y << x, p;
  return y;
}

CotangentPoint CotangentPoint::unpack(const Eigen::VectorXd& y) {
  const int n = static_cast<int>(y.size()) / 2;
  if (y.size() != 2 * n) throw DimensionError("CotangentPoint::unpack: odd-length vector");
  return CotangentPoint(y.head(n), y.tail(n));
}

double lifted_value(const SmoothField& f, const CotangentPoint& l) {
  if (f.dim() != l.dim()) throw DimensionError("lifted_value: dimension mismatch");
  return l.p.dot(f(l.x));
}

double symplectic_form(const Eigen::VectorXd& dp1, const Eigen::VectorXd& dx1,
                       const Eigen::VectorXd& dp2, const Eigen::VectorXd& dx2) {
  return dp1.dot(dx2) - dp2.dot(dx1);
}

OdeRhs adjoint_rhs(const TimeField& f) {
  const int n = f.dim;
  TimeField fc = f;
  return [fc, n](double t, const Eigen::VectorXd& y) {
    Eigen::VectorXd x = y.head(n), p = y.tail(n);
    Eigen::VectorXd dy(2 * n);
    dy.head(n) = fc.eval(t, x);
    dy.tail(n) = -fc.jac(t, x).transpose() * p;
    return dy;
  };
}

CotangentPoint adjoint_flow_to(const TimeField& f, const CotangentPoint& l, double t_from,
                               double t_to, const OdeOptions& opts) {
  if (f.dim != l.dim()) throw DimensionError("adjoint_flow: dimension mismatch");
  return CotangentPoint::unpack(integrate(adjoint_rhs(f), t_from, t_to, l.packed(), opts));
}

CotangentPoint adjoint_flow_to(const SmoothField& f, const CotangentPoint& l, double t_from,
                               double t_to, const OdeOptions& opts) {
  return adjoint_flow_to(TimeField::from(f), l, t_from, t_to, opts);
}

std::vector<CotangentPoint> adjoint_flow_sampled(const TimeField& f, const CotangentPoint& l,
                                                 double t_from, double t_to,
                                                 const std::vector<double>& times,
                                                 const OdeOptions& opts) {
  if (f.dim != l.dim()) throw DimensionError("adjoint_flow: dimension mismatch");
  auto ys = integrate_sampled(adjoint_rhs(f), t_from, t_to, l.packed(), times, opts);
  std::vector<CotangentPoint> out;
  out.reserve(ys.size());
  for (const auto& y : ys) out.push_back(CotangentPoint::unpack(y));
  return out;
}

}  // namespace bbsox
