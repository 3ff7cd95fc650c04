#pragma once

#include <array>
#include <map>
#include <string>

#include "bbsox/cotangent.hpp"

namespace bbsox {

// Control-affine Mayer problem: minimize c(xi(T)) over trajectories of
// xi' = sum_i u_i X_i(xi), u in the simplex over the vertex fields, with
// xi(0) = x0 fixed and xi(T) free.  `edge` designates the (h1, h2, h3) fields
// of the assumed bang-bang-singular structure (zero-based; i1 may equal i3).
struct ControlAffineProblem {
  std::vector<SmoothField> fields;
  ScalarFunction cost;
  Eigen::VectorXd x0;
  double T = 0.0;
  std::array<int, 3> edge{0, 0, 0};

  int dim() const { return fields.empty() ? 0 : fields.front().dim(); }
  const SmoothField& h1() const { return fields[edge[0]]; }
  const SmoothField& h2() const { return fields[edge[1]]; }
  const SmoothField& h3() const { return fields[edge[2]]; }
  SmoothField f1() const { return h3() - h2(); }

  void validate() const;  // throws DimensionError / invalid_argument
};

// Iterated Lie brackets of the edge fields and their Hamiltonian lifts,
// computed symbolically for polynomial fields and cached by bracket word.
//
// A word is a string over {'1','2','3','f'} read as a right-nested bracket:
// "a"   -> h_a            (with 'f' meaning f1 = h3 - h2)
// "ab"  -> [h_a, h_b]
// "abc" -> [h_a, [h_b, h_c]]
class BracketTable {
 public:
  explicit BracketTable(const ControlAffineProblem& prob);

  const SmoothField& field(const std::string& word) const;

  // Lift of the word's field at l.  For a word "ab..." this equals the
  // iterated Poisson bracket {H_a, {H_b, ...}} of the lifted Hamiltonians.
  double ham(const std::string& word, const CotangentPoint& l) const;

  double F1(const CotangentPoint& l) const { return ham("f", l); }
  double H23(const CotangentPoint& l) const { return ham("2f", l); }    // {H2, F1}
  double H232(const CotangentPoint& l) const { return -ham("2,2f", l); }
  double H323(const CotangentPoint& l) const { return ham("3,2f", l); }
  double H12(const CotangentPoint& l) const { return ham("12", l); }
  double L(const CotangentPoint& l) const { return ham("f,2f", l); }    // H323 + H232

  // Singular feedback u_S(l) = H232(l) / L(l).
  double singular_control(const CotangentPoint& l) const;

  const ControlAffineProblem& problem() const { return prob_; }

 private:
  const SmoothField& resolve(const std::string& atom) const;
  SmoothField build(const std::string& word) const;

  ControlAffineProblem prob_;
  SmoothField f1_;
  mutable std::map<std::string, SmoothField> cache_;
};

// Evaluates an iterated Poisson bracket of lifted edge Hamiltonians by
// reduction to the Lie bracket of the underlying fields.
double poisson_lifted(const BracketTable& table, const std::string& word,
                      const CotangentPoint& l);

}  // namespace bbsox
