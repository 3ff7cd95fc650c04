#include "bbsox/poly.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace bbsox {

Polynomial Polynomial::constant(int nvars, double c) {
  Polynomial p(nvars);
  p.add_term(Monomial(nvars, 0), c);
  return p;
}

Polynomial Polynomial::variable(int nvars, int index) {
  if (index < 0 || index >= nvars) throw std::invalid_argument("variable index out of range");
  Polynomial p(nvars);
  Monomial m(nvars, 0);
  m[index] = 1;
  p.add_term(std::move(m), 1.0);
  return p;
}

bool Polynomial::is_constant() const {
  for (const auto& [m, c] : terms_)
    for (int e : m)
      if (e != 0) return false;
  return true;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [m, c] : terms_) {
    int s = 0;
    for (int e : m) s += e;
    d = std::max(d, s);
  }
  return d;
}

void Polynomial::add_term(Monomial m, double c) {
  if (static_cast<int>(m.size()) != nvars_) throw std::invalid_argument("monomial arity mismatch");
  if (c == 0.0) return;
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    terms_.emplace(std::move(m), c);
  } else {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::eval(const Eigen::VectorXd& x) const {
  if (x.size() != nvars_) throw std::invalid_argument("polynomial eval dimension mismatch");
  double acc = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (int i = 0; i < nvars_; ++i) {
      for (int e = 0; e < m[i]; ++e) t *= x[i];
    }
    acc += t;
  }
  return acc;
}

Polynomial Polynomial::derivative(int var) const {
  if (var < 0 || var >= nvars_) throw std::invalid_argument("derivative variable out of range");
  Polynomial d(nvars_);
  for (const auto& [m, c] : terms_) {
    if (m[var] == 0) continue;
    Monomial dm = m;
    dm[var] -= 1;
    d.add_term(std::move(dm), c * m[var]);
  }
  return d;
}

Polynomial Polynomial::pow(int e) const {
  if (e < 0) throw std::invalid_argument("negative exponent");
  Polynomial acc = Polynomial::constant(nvars_, 1.0);
  Polynomial base = *this;
  while (e > 0) {
    if (e & 1) acc *= base;
    base = base * base;
    e >>= 1;
  }
  return acc;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (o.nvars_ != nvars_) throw std::invalid_argument("polynomial arity mismatch");
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (o.nvars_ != nvars_) throw std::invalid_argument("polynomial arity mismatch");
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.nvars_ != b.nvars_) throw std::invalid_argument("polynomial arity mismatch");
  Polynomial r(a.nvars_);
  for (const auto& [ma, ca] : a.terms_) {
    for (const auto& [mb, cb] : b.terms_) {
      Polynomial::Monomial m(a.nvars_);
      for (int i = 0; i < a.nvars_; ++i) m[i] = ma[i] + mb[i];
      r.add_term(std::move(m), ca * cb);
    }
  }
  return r;
}

Polynomial& Polynomial::operator*=(const Polynomial& o) {
  *this = *this * o;
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, c] : terms_) c *= s;
  return *this;
}

std::string Polynomial::to_string(const std::vector<std::string>& names) const {
  if (static_cast<int>(names.size()) != nvars_)
    throw std::invalid_argument("variable name count mismatch");
  if (terms_.empty()) return "0";
  std::ostringstream out;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    double coeff = c;
    if (first) {
      if (coeff < 0) {
        out << "-";
        coeff = -coeff;
      }
    } else {
      out << (coeff < 0 ? " - " : " + ");
      coeff = std::abs(coeff);
    }
    bool any_var = false;
    for (int e : m) any_var = any_var || e > 0;
    std::ostringstream cs;
    cs.precision(17);
    cs << coeff;
    if (!any_var || coeff != 1.0) {
      out << cs.str();
      if (any_var) out << "*";
    }
    bool first_var = true;
    for (int i = 0; i < nvars_; ++i) {
      if (m[i] == 0) continue;
      if (!first_var) out << "*";
      out << names[i];
      if (m[i] > 1) out << "^" << m[i];
      first_var = false;
    }
    first = false;
  }
  return out.str();
}

std::vector<std::string> default_var_names(int n) {
  std::vector<std::string> v;
  v.reserve(n);
  for (int i = 1; i <= n; ++i) v.push_back("x" + std::to_string(i));
  return v;
}

namespace {

struct Token {
  enum Kind { Number, Ident, Plus, Minus, Star, Caret, LParen, RParen, End } kind;
  double value = 0.0;
  std::string text;
  int column = 0;
};

class Lexer {
 public:
  Lexer(const std::string& s, int line) : s_(s), line_(line) { advance(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }
  int line() const { return line_; }

 private:
  void advance() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    tok_.column = static_cast<int>(pos_) + 1;
    if (pos_ >= s_.size()) {
      tok_.kind = Token::End;
      return;
    }
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t end = 0;
      try {
        tok_.value = std::stod(s_.substr(pos_), &end);
      } catch (const std::exception&) {
        throw ParseError("malformed number", line_, tok_.column);
      }
      tok_.kind = Token::Number;
      pos_ += end;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      tok_.kind = Token::Ident;
      tok_.text = s_.substr(start, pos_ - start);
      return;
    }
    ++pos_;
    switch (c) {
      case '+': tok_.kind = Token::Plus; return;
      case '-': tok_.kind = Token::Minus; return;
      case '*': tok_.kind = Token::Star; return;
      case '^': tok_.kind = Token::Caret; return;
      case '(': tok_.kind = Token::LParen; return;
      case ')': tok_.kind = Token::RParen; return;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", line_, tok_.column);
    }
  }

  const std::string& s_;
  size_t pos_ = 0;
  int line_;
  Token tok_;
};

class Parser {
 public:
  Parser(Lexer& lex, const std::vector<std::string>& vars) : lex_(lex), vars_(vars) {}

  Polynomial parse() {
    Polynomial p = sum();
    if (lex_.peek().kind != Token::End)
      throw ParseError("trailing input after expression", lex_.line(), lex_.peek().column);
    return p;
  }

 private:
  int n() const { return static_cast<int>(vars_.size()); }

  Polynomial sum() {
    Polynomial acc = product();
    while (true) {
      auto k = lex_.peek().kind;
      if (k == Token::Plus) {
        lex_.take();
        acc += product();
      } else if (k == Token::Minus) {
        lex_.take();
        acc -= product();
      } else {
        return acc;
      }
    }
  }

  Polynomial product() {
    Polynomial acc = unary();
    while (lex_.peek().kind == Token::Star) {
      lex_.take();
      acc *= unary();
    }
    return acc;
  }

  Polynomial unary() {
    if (lex_.peek().kind == Token::Minus) {
      lex_.take();
      return -unary();
    }
    return power();
  }

  Polynomial power() {
    Polynomial base = atom();
    if (lex_.peek().kind == Token::Caret) {
      Token caret = lex_.take();
      Token e = lex_.take();
      if (e.kind != Token::Number || e.value != std::floor(e.value) || e.value < 0)
        throw ParseError("exponent must be a nonnegative integer", lex_.line(), caret.column);
      return base.pow(static_cast<int>(e.value));
    }
    return base;
  }

  Polynomial atom() {
    Token t = lex_.take();
    switch (t.kind) {
      case Token::Number:
        return Polynomial::constant(n(), t.value);
      case Token::Ident: {
        for (int i = 0; i < n(); ++i)
          if (vars_[i] == t.text) return Polynomial::variable(n(), i);
        throw ParseError("unknown identifier '" + t.text + "'", lex_.line(), t.column);
      }
      case Token::LParen: {
        Polynomial p = sum();
        Token close = lex_.take();
        if (close.kind != Token::RParen)
          throw ParseError("expected ')'", lex_.line(), close.column);
        return p;
      }
      default:
        throw ParseError("expected number, identifier, or '('", lex_.line(), t.column);
    }
  }

  Lexer& lex_;
  const std::vector<std::string>& vars_;
};

}  // namespace

Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& vars,
                            int line) {
  Lexer lex(text, line);
  Parser parser(lex, vars);
  return parser.parse();
}

}  // namespace bbsox
