#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bbsox {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double max_step = 0.0;  // 0 = unlimited
  long max_steps = 2'000'000;
};

struct IntegrationError : std::runtime_error {
  double last_time;
  IntegrationError(const std::string& msg, double t)
      : std::runtime_error(msg + " (last valid time t=" + std::to_string(t) + ")"),
        last_time(t) {}
};

using OdeRhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

// Adaptive Dormand-Prince 4(5).  Direction of integration follows the sign of
// t1 - t0; t1 < t0 integrates backward.
Eigen::VectorXd integrate(const OdeRhs& rhs, double t0, double t1, Eigen::VectorXd y0,
                          const OdeOptions& opts = {});

// Same, but returns the solution at each requested time.  `times` must be
// monotone from t0 toward t1 (the integrator clips steps to land on them).
std::vector<Eigen::VectorXd> integrate_sampled(const OdeRhs& rhs, double t0, double t1,
                                               Eigen::VectorXd y0,
                                               const std::vector<double>& times,
                                               const OdeOptions& opts = {});

// Fixed-step classical RK4, for right-hand sides too expensive or too noisy
// for adaptive error control.
Eigen::VectorXd rk4(const OdeRhs& rhs, double t0, double t1, Eigen::VectorXd y0, int steps);

std::vector<Eigen::VectorXd> rk4_sampled(const OdeRhs& rhs, double t0, double t1,
                                         Eigen::VectorXd y0, const std::vector<double>& times,
                                         int steps_per_unit_time);

// Uniform grid helper: m+1 points from a to b inclusive.
std::vector<double> linspace(double a, double b, int m);

}  // namespace bbsox
