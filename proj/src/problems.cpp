#include "bbsox/problems.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bbsox {

namespace {

struct ConfigValue {
  enum Kind { Str, Num, NumArray, StrArray } kind = Num;
  std::string s;
  double num = 0;
  std::vector<double> nums;
  std::vector<std::string> strs;
  int line = 0;
};

using ConfigTable = std::map<std::string, std::map<std::string, ConfigValue>>;

std::string strip(const std::string& in) {
  size_t a = in.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = in.find_last_not_of(" \t\r");
  return in.substr(a, b - a + 1);
}

// Removes a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& in) {
  bool quoted = false;
  for (size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '"') quoted = !quoted;
    if (in[i] == '#' && !quoted) return in.substr(0, i);
  }
  return in;
}

double parse_number(const std::string& tok, int line) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || strip(std::string(end)) != "")
    throw ParseError("expected a number, got '" + tok + "'", line, 1);
  return v;
}

ConfigValue parse_value(const std::string& raw, int line) {
  ConfigValue v;
  v.line = line;
  std::string text = strip(raw);
  if (text.empty()) throw ParseError("missing value", line, 1);
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"')
      throw ParseError("unterminated string", line, 1);
    v.kind = ConfigValue::Str;
    v.s = text.substr(1, text.size() - 2);
    return v;
  }
  if (text.front() == '[') {
    if (text.back() != ']') throw ParseError("unterminated array", line, 1);
    std::string body = text.substr(1, text.size() - 2);
    std::vector<std::string> items;
    std::string cur;
    bool quoted = false;
    for (char ch : body) {
      if (ch == '"') quoted = !quoted;
      if (ch == ',' && !quoted) {
        items.push_back(strip(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!strip(cur).empty()) items.push_back(strip(cur));
    const bool strings = !items.empty() && items.front().front() == '"';
    v.kind = strings ? ConfigValue::StrArray : ConfigValue::NumArray;
    for (const std::string& it : items) {
      if (strings) {
        if (it.size() < 2 || it.front() != '"' || it.back() != '"')
          throw ParseError("mixed or malformed array element '" + it + "'", line, 1);
        v.strs.push_back(it.substr(1, it.size() - 2));
      } else {
        v.nums.push_back(parse_number(it, line));
      }
    }
    return v;
  }
  v.kind = ConfigValue::Num;
  v.num = parse_number(text, line);
  return v;
}

ConfigTable parse_config_text(const std::string& text) {
  ConfigTable table;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = strip(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("malformed section header", line, 1);
      section = strip(s.substr(1, s.size() - 2));
      continue;
    }
    size_t eq = std::string::npos;
    bool quoted = false;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '=' && !quoted) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line, 1);
    std::string key = strip(s.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line, 1);
    for (char ch : key)
      if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_')
        throw ParseError("invalid key '" + key + "'", line, 1);
    table[section][key] = parse_value(s.substr(eq + 1), line);
  }
  return table;
}

const ConfigValue* find(const ConfigTable& t, const std::string& sec, const std::string& key) {
  auto si = t.find(sec);
  if (si == t.end()) return nullptr;
  auto ki = si->second.find(key);
  return ki == si->second.end() ? nullptr : &ki->second;
}

const ConfigValue& require(const ConfigTable& t, const std::string& sec,
                           const std::string& key) {
  const ConfigValue* v = find(t, sec, key);
  if (!v)
    throw std::invalid_argument("config is missing required entry [" + sec + "] " + key);
  return *v;
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

// Compiles the expression lists in cfg (vars / field_exprs / cost_expr /
// x0 / T / edge already set) into the polynomial problem.
void compile_problem(ProblemConfig& cfg, const Eigen::VectorXd& x0, double T,
                     const std::array<int, 3>& edge) {
  const int n = static_cast<int>(cfg.vars.size());
  cfg.problem.fields.clear();
  for (const auto& exprs : cfg.field_exprs) {
    if (static_cast<int>(exprs.size()) != n)
      throw std::invalid_argument("field has " + std::to_string(exprs.size()) +
                                  " components, expected " + std::to_string(n));
    std::vector<Polynomial> comps;
    for (const std::string& e : exprs) comps.push_back(parse_polynomial(e, cfg.vars));
    cfg.problem.fields.push_back(SmoothField::polynomial(std::move(comps)));
  }
  cfg.problem.cost = ScalarFunction::polynomial(parse_polynomial(cfg.cost_expr, cfg.vars));
  cfg.problem.x0 = x0;
  cfg.problem.T = T;
  cfg.problem.edge = edge;
  cfg.problem.validate();
}

}  // namespace

ProblemConfig vanderpol_config() {
  ProblemConfig cfg;
  cfg.name = "vanderpol";
  cfg.vars = {"x1", "x2", "x3"};
  cfg.field_exprs = {
      {"x2", "-x1 + x2*(1 - x1^2) - 1", "0.5*(x1^2 + x2^2)"},
      {"x2", "-x1 + x2*(1 - x1^2) + 1", "0.5*(x1^2 + x2^2)"},
  };
  cfg.cost_expr = "x3";
  Eigen::VectorXd x0(3);
  x0 << 0.0, 1.0, 0.0;
  compile_problem(cfg, x0, 4.0, {0, 1, 0});
  cfg.guess.x_T = Eigen::VectorXd(3);
  cfg.guess.x_T << 0.1, 0.0, 0.76;
  cfg.guess.tau1 = 1.37;
  cfg.guess.tau2 = 2.46;
  return cfg;
}

ControlAffineProblem vanderpol_problem() { return vanderpol_config().problem; }

ControlAffineProblem bilinear_to_mayer(const Eigen::MatrixXd& A,
                                       const std::vector<Eigen::MatrixXd>& B,
                                       const Eigen::VectorXd& q, const Eigen::VectorXd& r,
                                       const Eigen::VectorXd& s, const Eigen::VectorXd& u_max,
                                       double T, const Eigen::VectorXd& N0) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.size());
  if (m > 12) throw std::invalid_argument("too many controls: 2^m vertex fields with m > 12");
  if (A.cols() != n || q.size() != n || r.size() != n || N0.size() != n ||
      s.size() != m || u_max.size() != m)
    throw DimensionError("bilinear problem data has inconsistent dimensions");
  for (int j = 0; j < m; ++j) {
    if (B[j].rows() != n || B[j].cols() != n)
      throw DimensionError("control matrix dimension mismatch");
    if (u_max[j] <= 0) throw std::invalid_argument("control bounds must be positive");
  }

  const int na = n + 1;  // augmented with the accumulated running cost
  auto linear_field = [na, n](const Eigen::MatrixXd& M, const Eigen::VectorXd& qrow,
                              double shift) {
    std::vector<Polynomial> comps;
    for (int i = 0; i < n; ++i) {
      Polynomial p(na);
      for (int k = 0; k < n; ++k)
        if (M(i, k) != 0) p += M(i, k) * Polynomial::variable(na, k);
      comps.push_back(p);
    }
    Polynomial last(na);
    for (int k = 0; k < n; ++k)
      if (qrow[k] != 0) last += qrow[k] * Polynomial::variable(na, k);
    if (shift != 0) last += Polynomial::constant(na, shift);
    comps.push_back(last);
    return comps;
  };

  std::vector<std::vector<Polynomial>> f(m + 1);
  f[0] = linear_field(A, q, 0.0);
  for (int j = 0; j < m; ++j)
    f[j + 1] = linear_field(u_max[j] * B[j], Eigen::VectorXd::Zero(n), u_max[j] * s[j]);

  ControlAffineProblem prob;
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<Polynomial> comps = f[0];
    for (int j = 0; j < m; ++j) {
      if (!(mask & (1 << j))) continue;
      for (int i = 0; i < na; ++i) comps[i] += f[j + 1][i];
    }
    prob.fields.push_back(SmoothField::polynomial(std::move(comps)));
  }

  Polynomial cost(na);
  for (int k = 0; k < n; ++k)
    if (r[k] != 0) cost += r[k] * Polynomial::variable(na, k);
  cost += Polynomial::variable(na, n);
  prob.cost = ScalarFunction::polynomial(cost);
  prob.x0 = Eigen::VectorXd(na);
  prob.x0.head(n) = N0;
  prob.x0[n] = 0.0;
  prob.T = T;
  prob.edge = {0, 1, 0};
  prob.validate();
  return prob;
}

ProblemConfig parse_problem_config(const std::string& text) {
  ConfigTable t = parse_config_text(text);
  ProblemConfig cfg;
  if (const ConfigValue* v = find(t, "", "name"))
    cfg.name = v->s;
  else if (const ConfigValue* w = find(t, "problem", "name"))
    cfg.name = w->s;

  const int n = static_cast<int>(require(t, "problem", "dim").num);
  if (n < 1) throw std::invalid_argument("dim must be positive");
  if (const ConfigValue* v = find(t, "problem", "vars")) {
    cfg.vars = v->strs;
    if (static_cast<int>(cfg.vars.size()) != n)
      throw std::invalid_argument("vars length does not match dim");
  } else {
    cfg.vars = default_var_names(n);
  }
  Eigen::VectorXd x0 = to_vec(require(t, "problem", "x0").nums);
  if (x0.size() != n) throw std::invalid_argument("x0 length does not match dim");
  const double T = require(t, "problem", "T").num;

  // Vertex fields X1..Xm in index order.
  auto fi = t.find("fields");
  if (fi == t.end()) throw std::invalid_argument("config is missing the [fields] section");
  std::map<int, std::vector<std::string>> ordered;
  for (const auto& [key, val] : fi->second) {
    if (key.size() < 2 || (key[0] != 'X' && key[0] != 'x'))
      throw ParseError("field keys must be X1..Xm, got '" + key + "'", val.line, 1);
    const int idx = std::atoi(key.c_str() + 1);
    if (idx < 1 || val.kind != ConfigValue::StrArray)
      throw ParseError("field '" + key + "' must be an array of expressions", val.line, 1);
    ordered[idx] = val.strs;
  }
  for (int i = 1; i <= static_cast<int>(ordered.size()); ++i)
    if (!ordered.count(i))
      throw std::invalid_argument("field indices must be contiguous from X1");
  for (auto& [idx, exprs] : ordered) cfg.field_exprs.push_back(exprs);
  const int m = static_cast<int>(cfg.field_exprs.size());
  if (m < 2) throw std::invalid_argument("at least two vertex fields are required");

  // Cost: direct terminal cost, or running (+ optional terminal) cost that
  // gets accumulated into one appended state.
  const ConfigValue* mayer = find(t, "cost", "mayer");
  const ConfigValue* running = find(t, "cost", "running");
  if (!mayer && !running)
    throw std::invalid_argument("config needs [cost] mayer or [cost] running");
  if (mayer && running)
    throw std::invalid_argument("[cost] mayer and running are mutually exclusive");
  if (mayer) {
    cfg.cost_expr = mayer->s;
  } else {
    std::string extra = "x" + std::to_string(n + 1);
    int suffix = n + 1;
    auto taken = [&](const std::string& name) {
      for (const std::string& v : cfg.vars)
        if (v == name) return true;
      return false;
    };
    while (taken(extra)) extra = "x" + std::to_string(++suffix);
    cfg.vars.push_back(extra);
    for (auto& exprs : cfg.field_exprs) exprs.push_back(running->s);
    const ConfigValue* terminal = find(t, "cost", "terminal");
    cfg.cost_expr = terminal && strip(terminal->s) != "0" && !strip(terminal->s).empty()
                        ? "(" + terminal->s + ") + " + extra
                        : extra;
    Eigen::VectorXd x0a(n + 1);
    x0a.head(n) = x0;
    x0a[n] = 0.0;
    x0 = x0a;
  }
  const int dim = static_cast<int>(cfg.vars.size());

  std::array<int, 3> edge{0, 0, 0};
  const ConfigValue& ev = require(t, "structure", "edge");
  if (ev.nums.size() != 3) throw std::invalid_argument("edge must have three indices");
  for (int i = 0; i < 3; ++i) {
    const int idx = static_cast<int>(ev.nums[i]);
    if (idx < 1 || idx > m)
      throw std::invalid_argument("edge index " + std::to_string(idx) + " out of range");
    edge[i] = idx - 1;
  }

  compile_problem(cfg, x0, T, edge);

  const ConfigValue* gx = find(t, "solver", "guess_xT");
  const ConfigValue* g1 = find(t, "solver", "guess_tau1");
  const ConfigValue* g2 = find(t, "solver", "guess_tau2");
  if (!gx || !g1 || !g2)
    throw std::invalid_argument(
        "config requires a shooting guess: [solver] guess_xT, guess_tau1, guess_tau2");
  cfg.guess.x_T = to_vec(gx->nums);
  if (cfg.guess.x_T.size() != dim)
    throw std::invalid_argument("guess_xT length must match the (augmented) dimension " +
                                std::to_string(dim));
  cfg.guess.tau1 = g1->num;
  cfg.guess.tau2 = g2->num;
  if (const ConfigValue* v = find(t, "solver", "tol")) cfg.solver.tol = v->num;
  if (const ConfigValue* v = find(t, "solver", "grid"))
    cfg.solver.grid = static_cast<int>(v->num);
  if (const ConfigValue* v = find(t, "solver", "margin")) cfg.solver.margin = v->num;
  return cfg;
}

ProblemConfig load_problem_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem_config(ss.str());
}

std::string serialize_problem_config(const ProblemConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  if (!cfg.name.empty()) out << "name = \"" << cfg.name << "\"\n\n";
  out << "[problem]\n";
  out << "dim = " << cfg.vars.size() << "\n";
  out << "vars = [";
  for (size_t i = 0; i < cfg.vars.size(); ++i)
    out << (i ? ", " : "") << '"' << cfg.vars[i] << '"';
  out << "]\n";
  out << "x0 = [";
  for (Eigen::Index i = 0; i < cfg.problem.x0.size(); ++i)
    out << (i ? ", " : "") << cfg.problem.x0[i];
  out << "]\n";
  out << "T = " << cfg.problem.T << "\n\n";
  out << "[fields]\n";
  for (size_t i = 0; i < cfg.field_exprs.size(); ++i) {
    out << "X" << i + 1 << " = [";
    for (size_t j = 0; j < cfg.field_exprs[i].size(); ++j)
      out << (j ? ", " : "") << '"' << cfg.field_exprs[i][j] << '"';
    out << "]\n";
  }
  out << "\n[cost]\nmayer = \"" << cfg.cost_expr << "\"\n";
  out << "\n[structure]\n";
  out << "edge = [" << cfg.problem.edge[0] + 1 << ", " << cfg.problem.edge[1] + 1 << ", "
      << cfg.problem.edge[2] + 1 << "]\n";
  out << "\n[solver]\n";
  out << "guess_xT = [";
  for (Eigen::Index i = 0; i < cfg.guess.x_T.size(); ++i)
    out << (i ? ", " : "") << cfg.guess.x_T[i];
  out << "]\n";
  out << "guess_tau1 = " << cfg.guess.tau1 << "\n";
  out << "guess_tau2 = " << cfg.guess.tau2 << "\n";
  out << "tol = " << cfg.solver.tol << "\n";
  out << "grid = " << cfg.solver.grid << "\n";
  out << "margin = " << cfg.solver.margin << "\n";
  return out.str();
}

}  // namespace bbsox
