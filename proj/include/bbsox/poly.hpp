#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bbsox {

// Error with source position for expression / config parsing.
struct ParseError : std::runtime_error {
  int line;
  int column;
  ParseError(const std::string& msg, int line_, int column_)
      : std::runtime_error(msg + " (line " + std::to_string(line_) + ", column " +
                           std::to_string(column_) + ")"),
        line(line_),
        column(column_) {}
};

// Multivariate polynomial over double coefficients, stored as a sparse
// exponent-vector -> coefficient map.  Differentiation is exact.
class Polynomial {
 public:
  using Monomial = std::vector<int>;  // one exponent per variable

  explicit Polynomial(int nvars = 0) : nvars_(nvars) {}

  static Polynomial constant(int nvars, double c);
  static Polynomial variable(int nvars, int index);

  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  int degree() const;

  double eval(const Eigen::VectorXd& x) const;
  Polynomial derivative(int var) const;
  Polynomial pow(int e) const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(const Polynomial& o);
  Polynomial& operator*=(double s);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }

  void add_term(Monomial m, double c);
  const std::map<Monomial, double>& terms() const { return terms_; }

  // Infix rendering with the given variable names, e.g. "x1^2*x2 - 3*x3".
  std::string to_string(const std::vector<std::string>& names) const;

 private:
  int nvars_;
  std::map<Monomial, double> terms_;
};

// Parses an infix polynomial expression over the named variables.
// Grammar: + - * ^ (nonnegative integer exponents), unary minus, parentheses,
// decimal literals.  `line` is only used to report error positions.
Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& vars,
                            int line = 1);

std::vector<std::string> default_var_names(int n);  // "x1".."xn"

}  // namespace bbsox
