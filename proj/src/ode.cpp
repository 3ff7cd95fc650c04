#include "bbsox/ode.hpp"

#include <algorithm>
#include <cmath>

namespace bbsox {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

struct Stepper {
  const OdeRhs& rhs;
  const OdeOptions& opts;
  double t;
  Eigen::VectorXd y;
  Eigen::VectorXd k1;  // FSAL
  double h;            // signed
  long nsteps = 0;

  Stepper(const OdeRhs& rhs_, const OdeOptions& opts_, double t0, Eigen::VectorXd y0,
          double direction, double span)
      : rhs(rhs_), opts(opts_), t(t0), y(std::move(y0)) {
    k1 = rhs(t, y);
    double h0 = span * 1e-3;
    if (opts.max_step > 0) h0 = std::min(h0, opts.max_step);
    h = direction * std::max(h0, 1e-12);
  }

  // Advances up to t_target (never beyond).  Throws on failure.
  void advance_to(double t_target) {
    const double dir = (t_target >= t) ? 1.0 : -1.0;
    while (dir * (t_target - t) > 0) {
      if (++nsteps > opts.max_steps)
        throw IntegrationError("ode integrator exceeded max step count", t);
      double hs = h;
      if (dir * hs <= 0) hs = dir * std::abs(h);
      if (std::abs(hs) > std::abs(t_target - t)) hs = t_target - t;
      if (opts.max_step > 0 && std::abs(hs) > opts.max_step) hs = dir * opts.max_step;
      if (std::abs(hs) < 1e-14 * std::max(1.0, std::abs(t)))
        throw IntegrationError("ode integrator step size underflow", t);

      Eigen::VectorXd k2 = rhs(t + c2 * hs, y + hs * (a21 * k1));
      Eigen::VectorXd k3 = rhs(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
      Eigen::VectorXd k4 = rhs(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
      Eigen::VectorXd k5 =
          rhs(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      Eigen::VectorXd k6 =
          rhs(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      Eigen::VectorXd ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      Eigen::VectorXd k7 = rhs(t + hs, ynew);
      Eigen::VectorXd err =
          hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      if (!ynew.allFinite()) throw IntegrationError("ode state became non-finite", t);

      double errnorm = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        double r = err[i] / sc;
        errnorm += r * r;
      }
      errnorm = std::sqrt(errnorm / std::max<Eigen::Index>(1, y.size()));

      if (errnorm <= 1.0) {
        t += hs;
        y = std::move(ynew);
        k1 = std::move(k7);
        double fac = (errnorm == 0.0) ? 5.0
                                      : std::clamp(0.9 * std::pow(errnorm, -0.2), 0.2, 5.0);
        h = hs * fac;
      } else {
        double fac = std::clamp(0.9 * std::pow(errnorm, -0.2), 0.1, 1.0);
        h = hs * fac;
      }
    }
  }
};

}  // namespace

Eigen::VectorXd integrate(const OdeRhs& rhs, double t0, double t1, Eigen::VectorXd y0,
                          const OdeOptions& opts) {
  if (t0 == t1) return y0;
  Stepper s(rhs, opts, t0, std::move(y0), t1 > t0 ? 1.0 : -1.0, std::abs(t1 - t0));
  s.advance_to(t1);
  return s.y;
}

std::vector<Eigen::VectorXd> integrate_sampled(const OdeRhs& rhs, double t0, double t1,
                                               Eigen::VectorXd y0,
                                               const std::vector<double>& times,
                                               const OdeOptions& opts) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(times.size());
  if (t0 == t1) {
    for (size_t i = 0; i < times.size(); ++i) out.push_back(y0);
    return out;
  }
  Stepper s(rhs, opts, t0, std::move(y0), t1 > t0 ? 1.0 : -1.0, std::abs(t1 - t0));
  for (double tt : times) {
    s.advance_to(tt);
    out.push_back(s.y);
  }
  s.advance_to(t1);
  return out;
}

Eigen::VectorXd rk4(const OdeRhs& rhs, double t0, double t1, Eigen::VectorXd y0, int steps) {
  if (steps < 1) steps = 1;
  const double h = (t1 - t0) / steps;
  Eigen::VectorXd y = std::move(y0);
  double t = t0;
  for (int i = 0; i < steps; ++i) {
    Eigen::VectorXd k1 = rhs(t, y);
    Eigen::VectorXd k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
    Eigen::VectorXd k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
    Eigen::VectorXd k4 = rhs(t + h, y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = t0 + (i + 1) * h;
    if (!y.allFinite()) throw IntegrationError("rk4 state became non-finite", t);
  }
  return y;
}

std::vector<Eigen::VectorXd> rk4_sampled(const OdeRhs& rhs, double t0, double t1,
                                         Eigen::VectorXd y0, const std::vector<double>& times,
                                         int steps_per_unit_time) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(times.size());
  Eigen::VectorXd y = std::move(y0);
  double t = t0;
  for (double tt : times) {
    int steps = std::max(1, static_cast<int>(std::ceil(std::abs(tt - t) * steps_per_unit_time)));
    if (tt != t) y = rk4(rhs, t, tt, std::move(y), steps);
    t = tt;
    out.push_back(y);
  }
  (void)t1;  // integration stops at the last sample time
  return out;
}

std::vector<double> linspace(double a, double b, int m) {
  std::vector<double> v;
  v.reserve(m + 1);
  for (int i = 0; i <= m; ++i) v.push_back(a + (b - a) * (static_cast<double>(i) / m));
  v.back() = b;
  return v;
}

}  // namespace bbsox
