#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bbsox/poly.hpp"

namespace bbsox {

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FieldKind { Analytic, Polynomial, FiniteDifference };

// Vector field on R^n with value, Jacobian, and second-derivative evaluators.
// Polynomial fields differentiate exactly; analytic fields may supply their own
// derivatives; anything missing falls back to central differences.
class SmoothField {
 public:
  using EvalFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using JacFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
  // hess[k](i,j) = d^2 f_k / dx_i dx_j
  using HessFn = std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&)>;

  SmoothField() = default;

  static SmoothField polynomial(std::vector<Polynomial> components);
  static SmoothField analytic(int dim, EvalFn eval, JacFn jac = nullptr, HessFn hess = nullptr);
  static SmoothField zero(int dim);

  int dim() const { return dim_; }
  FieldKind kind() const { return kind_; }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
  std::vector<Eigen::MatrixXd> hessian(const Eigen::VectorXd& x) const;

  // Non-null only for polynomial fields.
  const std::vector<Polynomial>* polynomials() const;

  // Step used by the finite-difference Jacobian at x (diagnostic).
  static double fd_step_first(const Eigen::VectorXd& x);
  static double fd_step_second(const Eigen::VectorXd& x);

  friend SmoothField operator+(const SmoothField& a, const SmoothField& b);
  friend SmoothField operator-(const SmoothField& a, const SmoothField& b);
  friend SmoothField operator*(double s, const SmoothField& f);

 private:
  int dim_ = 0;
  FieldKind kind_ = FieldKind::Analytic;
  std::shared_ptr<const std::vector<Polynomial>> polys_;
  std::shared_ptr<const std::vector<Polynomial>> poly_jac_;   // row-major n*n
  std::shared_ptr<const std::vector<Polynomial>> poly_hess_;  // k*n*n
  EvalFn eval_;
  JacFn jac_;
  HessFn hess_;

  void check_dim(const Eigen::VectorXd& x) const;
};

// Scalar function on R^n with gradient and Hessian evaluators.
class ScalarFunction {
 public:
  using EvalFn = std::function<double(const Eigen::VectorXd&)>;
  using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using HessFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  ScalarFunction() = default;

  static ScalarFunction polynomial(Polynomial p);
  static ScalarFunction analytic(int dim, EvalFn eval, GradFn grad = nullptr,
                                 HessFn hess = nullptr);

  int dim() const { return dim_; }
  FieldKind kind() const { return kind_; }

  double operator()(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;

  const Polynomial* polynomial_form() const;

 private:
  int dim_ = 0;
  FieldKind kind_ = FieldKind::Analytic;
  std::shared_ptr<const Polynomial> poly_;
  std::shared_ptr<const std::vector<Polynomial>> poly_grad_;
  std::shared_ptr<const std::vector<Polynomial>> poly_hess_;
  EvalFn eval_;
  GradFn grad_;
  HessFn hess_;
};

// Lie bracket [f,g](x) = Dg(x) f(x) - Df(x) g(x).
Eigen::VectorXd lie_bracket(const SmoothField& f, const SmoothField& g, const Eigen::VectorXd& x);

// Bracket as a field.  Exact (symbolic) when both inputs are polynomial;
// otherwise a finite-difference-backed analytic field.
SmoothField lie_bracket_field(const SmoothField& f, const SmoothField& g);

// Directional (Lie) derivative of a scalar function along a field.
double lie_derivative(const SmoothField& f, const ScalarFunction& c, const Eigen::VectorXd& x);

}  // namespace bbsox
