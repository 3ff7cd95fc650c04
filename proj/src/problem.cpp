#include "bbsox/problem.hpp"

namespace bbsox {

void ControlAffineProblem::validate() const {
  if (fields.empty()) throw std::invalid_argument("problem has no vertex fields");
  const int n = fields.front().dim();
  for (const auto& f : fields)
    if (f.dim() != n) throw DimensionError("vertex fields have mixed dimensions");
  if (cost.dim() != n) throw DimensionError("cost dimension differs from field dimension");
  if (x0.size() != n) throw DimensionError("x0 dimension differs from field dimension");
  if (!(T > 0.0)) throw std::invalid_argument("horizon T must be positive");
  for (int e : edge)
    if (e < 0 || e >= static_cast<int>(fields.size()))
      throw std::invalid_argument("edge index out of range");
}

BracketTable::BracketTable(const ControlAffineProblem& prob) : prob_(prob), f1_(prob.f1()) {
  prob_.validate();
  // Precompute the words the certification pipeline hits on every grid point.
  for (const char* w : {"f", "2f", "12", "2,2f", "3,2f", "f,2f"}) (void)field(w);
}

const SmoothField& BracketTable::resolve(const std::string& atom) const {
  if (atom == "1") return prob_.h1();
  if (atom == "2") return prob_.h2();
  if (atom == "3") return prob_.h3();
  if (atom == "f") return f1_;
  throw std::invalid_argument("unknown bracket atom '" + atom + "'");
}

SmoothField BracketTable::build(const std::string& word) const {
  std::vector<char> atoms;
  for (char c : word) {
    if (c == ',' || c == ' ') continue;
    if (c != '1' && c != '2' && c != '3' && c != 'f')
      throw std::invalid_argument("unknown bracket word '" + word + "'");
    atoms.push_back(c);
  }
  if (atoms.empty() || atoms.size() > 3)
    throw std::invalid_argument("bracket word must have 1 to 3 atoms: '" + word + "'");
  SmoothField acc = resolve(std::string(1, atoms.back()));
  for (auto it = atoms.rbegin() + 1; it != atoms.rend(); ++it)
    acc = lie_bracket_field(resolve(std::string(1, *it)), acc);
  return acc;
}

const SmoothField& BracketTable::field(const std::string& word) const {
  std::string key;
  for (char c : word)
    if (c != ',' && c != ' ') key.push_back(c);
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, build(key)).first;
  return it->second;
}

double BracketTable::ham(const std::string& word, const CotangentPoint& l) const {
  return lifted_value(field(word), l);
}

double BracketTable::singular_control(const CotangentPoint& l) const {
  return H232(l) / L(l);
}

double poisson_lifted(const BracketTable& table, const std::string& word,
                      const CotangentPoint& l) {
  return table.ham(word, l);
}

}  // namespace bbsox
