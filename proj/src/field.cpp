#include "bbsox/field.hpp"

#include <cmath>
#include <limits>

namespace bbsox {

namespace {
const double kEps = std::numeric_limits<double>::epsilon();
}

double SmoothField::fd_step_first(const Eigen::VectorXd& x) {
  double scale = x.size() ? x.lpNorm<Eigen::Infinity>() : 0.0;
  return std::cbrt(kEps) * std::max(1.0, scale);
}

double SmoothField::fd_step_second(const Eigen::VectorXd& x) {
  double scale = x.size() ? x.lpNorm<Eigen::Infinity>() : 0.0;
  return std::pow(kEps, 0.25) * std::max(1.0, scale);
}

SmoothField SmoothField::polynomial(std::vector<Polynomial> components) {
  SmoothField f;
  const int n = static_cast<int>(components.size());
  for (const auto& p : components)
    if (p.nvars() != n)
      throw DimensionError("polynomial field: component arity must equal field dimension");
  f.dim_ = n;
  f.kind_ = FieldKind::Polynomial;
  auto jac = std::make_shared<std::vector<Polynomial>>();
  auto hess = std::make_shared<std::vector<Polynomial>>();
  jac->reserve(n * n);
  hess->reserve(n * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) jac->push_back(components[i].derivative(j));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) hess->push_back((*jac)[k * n + i].derivative(j));
  f.polys_ = std::make_shared<std::vector<Polynomial>>(std::move(components));
  f.poly_jac_ = std::move(jac);
  f.poly_hess_ = std::move(hess);
  return f;
}

SmoothField SmoothField::analytic(int dim, EvalFn eval, JacFn jac, HessFn hess) {
  SmoothField f;
  f.dim_ = dim;
  f.kind_ = (jac && hess) ? FieldKind::Analytic : FieldKind::FiniteDifference;
  if (jac && hess) f.kind_ = FieldKind::Analytic;
  f.eval_ = std::move(eval);
  f.jac_ = std::move(jac);
  f.hess_ = std::move(hess);
  return f;
}

SmoothField SmoothField::zero(int dim) {
  std::vector<Polynomial> comps(dim, Polynomial(dim));
  return polynomial(std::move(comps));
}

void SmoothField::check_dim(const Eigen::VectorXd& x) const {
  if (x.size() != dim_)
    throw DimensionError("field evaluation: point dimension " + std::to_string(x.size()) +
                         " != field dimension " + std::to_string(dim_));
}

Eigen::VectorXd SmoothField::operator()(const Eigen::VectorXd& x) const {
  check_dim(x);
  if (polys_) {
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = (*polys_)[i].eval(x);
    return v;
  }
  return eval_(x);
}

Eigen::MatrixXd SmoothField::jacobian(const Eigen::VectorXd& x) const {
  check_dim(x);
  if (poly_jac_) {
    Eigen::MatrixXd J(dim_, dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) J(i, j) = (*poly_jac_)[i * dim_ + j].eval(x);
    return J;
  }
  if (jac_) return jac_(x);
  const double h = fd_step_first(x);
  Eigen::MatrixXd J(dim_, dim_);
  Eigen::VectorXd xp = x, xm = x;
  for (int j = 0; j < dim_; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    J.col(j) = (eval_(xp) - eval_(xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return J;
}

std::vector<Eigen::MatrixXd> SmoothField::hessian(const Eigen::VectorXd& x) const {
  check_dim(x);
  std::vector<Eigen::MatrixXd> H(dim_, Eigen::MatrixXd(dim_, dim_));
  if (poly_hess_) {
    for (int k = 0; k < dim_; ++k)
      for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) H[k](i, j) = (*poly_hess_)[(k * dim_ + i) * dim_ + j].eval(x);
    return H;
  }
  if (hess_) return hess_(x);
  // Central differences of the Jacobian (itself possibly finite-difference).
  const double h = fd_step_second(x);
  Eigen::VectorXd xp = x, xm = x;
  for (int j = 0; j < dim_; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    Eigen::MatrixXd Jp = jacobian(xp), Jm = jacobian(xm);
    Eigen::MatrixXd D = (Jp - Jm) / (2.0 * h);  // D(k,i) = d2 f_k / dx_i dx_j
    for (int k = 0; k < dim_; ++k)
      for (int i = 0; i < dim_; ++i) H[k](i, j) = D(k, i);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  // Symmetrize to kill the FD asymmetry.
  for (int k = 0; k < dim_; ++k) H[k] = 0.5 * (H[k] + H[k].transpose()).eval();
  return H;
}

const std::vector<Polynomial>* SmoothField::polynomials() const { return polys_.get(); }

SmoothField operator+(const SmoothField& a, const SmoothField& b) {
  if (a.dim() != b.dim()) throw DimensionError("field sum: dimension mismatch");
  if (a.polynomials() && b.polynomials()) {
    std::vector<Polynomial> comps;
    comps.reserve(a.dim());
    for (int i = 0; i < a.dim(); ++i)
      comps.push_back((*a.polynomials())[i] + (*b.polynomials())[i]);
    return SmoothField::polynomial(std::move(comps));
  }
  SmoothField fa = a, fb = b;
  return SmoothField::analytic(
      a.dim(), [fa, fb](const Eigen::VectorXd& x) { return (fa(x) + fb(x)).eval(); },
      [fa, fb](const Eigen::VectorXd& x) { return (fa.jacobian(x) + fb.jacobian(x)).eval(); },
      [fa, fb](const Eigen::VectorXd& x) {
        auto ha = fa.hessian(x);
        auto hb = fb.hessian(x);
        for (size_t k = 0; k < ha.size(); ++k) ha[k] += hb[k];
        return ha;
      });
}

SmoothField operator-(const SmoothField& a, const SmoothField& b) { return a + (-1.0 * b); }

SmoothField operator*(double s, const SmoothField& f) {
  if (f.polynomials()) {
    std::vector<Polynomial> comps = *f.polynomials();
    for (auto& p : comps) p *= s;
    return SmoothField::polynomial(std::move(comps));
  }
  SmoothField g = f;
  return SmoothField::analytic(
      f.dim(), [g, s](const Eigen::VectorXd& x) { return (s * g(x)).eval(); },
      [g, s](const Eigen::VectorXd& x) { return (s * g.jacobian(x)).eval(); },
      [g, s](const Eigen::VectorXd& x) {
        auto h = g.hessian(x);
        for (auto& m : h) m *= s;
        return h;
      });
}

ScalarFunction ScalarFunction::polynomial(Polynomial p) {
  ScalarFunction c;
  const int n = p.nvars();
  c.dim_ = n;
  c.kind_ = FieldKind::Polynomial;
  auto grad = std::make_shared<std::vector<Polynomial>>();
  auto hess = std::make_shared<std::vector<Polynomial>>();
  grad->reserve(n);
  hess->reserve(n * n);
  for (int i = 0; i < n; ++i) grad->push_back(p.derivative(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) hess->push_back((*grad)[i].derivative(j));
  c.poly_ = std::make_shared<Polynomial>(std::move(p));
  c.poly_grad_ = std::move(grad);
  c.poly_hess_ = std::move(hess);
  return c;
}

ScalarFunction ScalarFunction::analytic(int dim, EvalFn eval, GradFn grad, HessFn hess) {
  ScalarFunction c;
  c.dim_ = dim;
  c.kind_ = (grad && hess) ? FieldKind::Analytic : FieldKind::FiniteDifference;
  c.eval_ = std::move(eval);
  c.grad_ = std::move(grad);
  c.hess_ = std::move(hess);
  return c;
}

double ScalarFunction::operator()(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw DimensionError("scalar function: dimension mismatch");
  if (poly_) return poly_->eval(x);
  return eval_(x);
}

Eigen::VectorXd ScalarFunction::gradient(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw DimensionError("scalar function: dimension mismatch");
  if (poly_grad_) {
    Eigen::VectorXd g(dim_);
    for (int i = 0; i < dim_; ++i) g[i] = (*poly_grad_)[i].eval(x);
    return g;
  }
  if (grad_) return grad_(x);
  const double h = SmoothField::fd_step_first(x);
  Eigen::VectorXd g(dim_);
  Eigen::VectorXd xp = x, xm = x;
  for (int j = 0; j < dim_; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    g[j] = (eval_(xp) - eval_(xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return g;
}

Eigen::MatrixXd ScalarFunction::hessian(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw DimensionError("scalar function: dimension mismatch");
  if (poly_hess_) {
    Eigen::MatrixXd H(dim_, dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) H(i, j) = (*poly_hess_)[i * dim_ + j].eval(x);
    return H;
  }
  if (hess_) return hess_(x);
  const double h = SmoothField::fd_step_second(x);
  Eigen::MatrixXd H(dim_, dim_);
  Eigen::VectorXd xp = x, xm = x;
  for (int j = 0; j < dim_; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    H.col(j) = (gradient(xp) - gradient(xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return 0.5 * (H + H.transpose());
}

const Polynomial* ScalarFunction::polynomial_form() const { return poly_.get(); }

Eigen::VectorXd lie_bracket(const SmoothField& f, const SmoothField& g, const Eigen::VectorXd& x) {
  if (f.dim() != g.dim() || f.dim() != x.size())
    throw DimensionError("lie_bracket: dimension mismatch");
  return g.jacobian(x) * f(x) - f.jacobian(x) * g(x);
}

SmoothField lie_bracket_field(const SmoothField& f, const SmoothField& g) {
  if (f.dim() != g.dim()) throw DimensionError("lie_bracket_field: dimension mismatch");
  const int n = f.dim();
  if (f.polynomials() && g.polynomials()) {
    const auto& fp = *f.polynomials();
    const auto& gp = *g.polynomials();
    std::vector<Polynomial> comps;
    comps.reserve(n);
    for (int k = 0; k < n; ++k) {
      Polynomial c(n);
      for (int i = 0; i < n; ++i) {
        c += gp[k].derivative(i) * fp[i];
        c -= fp[k].derivative(i) * gp[i];
      }
      comps.push_back(std::move(c));
    }
    return SmoothField::polynomial(std::move(comps));
  }
  SmoothField ff = f, gg = g;
  return SmoothField::analytic(
      n, [ff, gg](const Eigen::VectorXd& x) { return lie_bracket(ff, gg, x); });
}

double lie_derivative(const SmoothField& f, const ScalarFunction& c, const Eigen::VectorXd& x) {
  if (f.dim() != c.dim()) throw DimensionError("lie_derivative: dimension mismatch");
  return c.gradient(x).dot(f(x));
}

}  // namespace bbsox
