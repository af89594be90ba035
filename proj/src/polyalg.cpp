#include "barrierforge/polyalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

namespace barrierforge {

Monomial::Monomial(std::vector<int> e) : exps(std::move(e)) {
  for (int v : exps)
    if (v < 0) throw std::invalid_argument("negative exponent in monomial");
}

Monomial Monomial::variable(int n, int k) {
  std::vector<int> e(n, 0);
  e.at(k) = 1;
  return Monomial(std::move(e));
}

int Monomial::degree() const {
  int d = 0;
  for (int v : exps) d += v;
  return d;
}

double Monomial::eval(const VectorXd& x) const {
  double r = 1.0;
  for (size_t k = 0; k < exps.size(); ++k)
    for (int p = 0; p < exps[k]; ++p) r *= x[k];
  return r;
}

Monomial Monomial::operator*(const Monomial& o) const {
  if (o.exps.size() != exps.size()) throw std::invalid_argument("monomial arity mismatch");
  std::vector<int> e(exps);
  for (size_t k = 0; k < e.size(); ++k) e[k] += o.exps[k];
  return Monomial(std::move(e));
}

bool Monomial::divisible_by(const Monomial& o) const {
  if (o.exps.size() != exps.size()) return false;
  for (size_t k = 0; k < exps.size(); ++k)
    if (o.exps[k] > exps[k]) return false;
  return true;
}

Monomial Monomial::operator/(const Monomial& o) const {
  if (!divisible_by(o)) throw std::invalid_argument("monomial not divisible");
  std::vector<int> e(exps);
  for (size_t k = 0; k < e.size(); ++k) e[k] -= o.exps[k];
  return Monomial(std::move(e));
}

std::string Monomial::str() const {
  std::ostringstream os;
  bool any = false;
  for (size_t k = 0; k < exps.size(); ++k) {
    if (!exps[k]) continue;
    if (any) os << '*';
    os << 'x' << k + 1;
    if (exps[k] > 1) os << '^' << exps[k];
    any = true;
  }
  if (!any) os << '1';
  return os.str();
}

bool GradedLess::operator()(const Monomial& a, const Monomial& b) const {
  int da = a.degree(), db = b.degree();
  if (da != db) return da < db;
  return a.exps > b.exps;
}

std::vector<Monomial> monomials_up_to(int n, int lo, int hi) {
  std::vector<Monomial> out;
  std::vector<int> e(n, 0);
  // enumerate all exponent vectors with total degree <= hi, filter, sort
  std::function<void(int, int)> rec = [&](int k, int left) {
    if (k == n) {
      int d = hi - left;
      if (d >= lo) out.emplace_back(e);
      return;
    }
    for (int p = 0; p <= left; ++p) {
      e[k] = p;
      rec(k + 1, left - p);
    }
    e[k] = 0;
  };
  rec(0, hi);
  std::sort(out.begin(), out.end(), GradedLess{});
  return out;
}

Polynomial Polynomial::constant(int n, double c) {
  Polynomial p(n);
  p.add_term(Monomial::constant(n), c);
  return p;
}

Polynomial Polynomial::monomial(const Monomial& m, double c) {
  Polynomial p(m.nvars());
  p.add_term(m, c);
  return p;
}

int Polynomial::degree() const {
  int d = -1;
  for (auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

double Polynomial::coeff(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Monomial& m, double c) {
  if (n_ == 0) n_ = m.nvars();
  if (m.nvars() != n_) throw std::invalid_argument("polynomial arity mismatch");
  if (c == 0.0) return;
  auto [it, fresh] = terms_.try_emplace(m, c);
  if (!fresh) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::eval(const VectorXd& x) const {
  double s = 0.0;
  for (auto& [m, c] : terms_) s += c * m.eval(x);
  return s;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (n_ == 0) n_ = o.n_;
  for (auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r(*this);
  r += o;
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + (-o); }

Polynomial Polynomial::operator*(const Polynomial& o) const {
  Polynomial r(n_ ? n_ : o.n_);
  for (auto& [ma, ca] : terms_)
    for (auto& [mb, cb] : o.terms_) r.add_term(ma * mb, ca * cb);
  return r;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial r(n_);
  if (s == 0.0) return r;
  for (auto& [m, c] : terms_) r.terms_.emplace(m, c * s);
  return r;
}

Polynomial Polynomial::pruned(double tol) const {
  Polynomial r(n_);
  for (auto& [m, c] : terms_)
    if (std::abs(c) > tol) r.terms_.emplace(m, c);
  return r;
}

std::string Polynomial::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (auto& [m, c] : terms_) {
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << '-';
    os << std::abs(c);
    if (m.degree() > 0) os << '*' << m.str();
    first = false;
  }
  return os.str();
}

PolyMatrix::PolyMatrix(int rows, int cols, int nvars)
    : rows_(rows), cols_(cols), n_(nvars), entries_(static_cast<size_t>(rows) * cols, Polynomial(nvars)) {}

PolyMatrix PolyMatrix::constant(const MatrixXd& m, int nvars) {
  PolyMatrix p(static_cast<int>(m.rows()), static_cast<int>(m.cols()), nvars);
  auto one = Monomial::constant(nvars);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) p(r, c).add_term(one, m(r, c));
  return p;
}

int PolyMatrix::degree() const {
  int d = -1;
  for (auto& e : entries_) d = std::max(d, e.degree());
  return d;
}

MatrixXd PolyMatrix::eval(const VectorXd& x) const {
  MatrixXd m(rows_, cols_);
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) m(r, c) = (*this)(r, c).eval(x);
  return m;
}

PolyMatrix PolyMatrix::operator+(const PolyMatrix& o) const {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("PolyMatrix + shape mismatch");
  PolyMatrix r(*this);
  for (size_t i = 0; i < entries_.size(); ++i) r.entries_[i] += o.entries_[i];
  return r;
}

PolyMatrix PolyMatrix::operator*(const PolyMatrix& o) const {
  if (cols_ != o.rows_) throw std::invalid_argument("PolyMatrix * shape mismatch");
  PolyMatrix r(rows_, o.cols_, n_ ? n_ : o.n_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < o.cols_; ++j)
      for (int k = 0; k < cols_; ++k) r(i, j) += (*this)(i, k) * o(k, j);
  return r;
}

PolyMatrix PolyMatrix::transpose() const {
  PolyMatrix r(cols_, rows_, n_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
  return r;
}

std::vector<Monomial> PolyMatrix::support() const {
  std::set<Monomial, GradedLess> s;
  for (auto& e : entries_)
    for (auto& [m, c] : e.terms()) s.insert(m);
  return {s.begin(), s.end()};
}

MatrixXd PolyMatrix::coeff(const Monomial& m) const {
  MatrixXd out(rows_, cols_);
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) out(r, c) = (*this)(r, c).coeff(m);
  return out;
}

PolyMatrix operator*(const MatrixXd& a, const PolyMatrix& p) {
  if (a.cols() != p.rows()) throw std::invalid_argument("matrix * PolyMatrix shape mismatch");
  PolyMatrix r(static_cast<int>(a.rows()), p.cols(), p.nvars());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      if (a(i, k) == 0.0) continue;
      for (int j = 0; j < p.cols(); ++j) r(i, j) += p(k, j) * a(i, k);
    }
  return r;
}

PolyMatrix operator*(const PolyMatrix& p, const MatrixXd& a) {
  if (p.cols() != a.rows()) throw std::invalid_argument("PolyMatrix * matrix shape mismatch");
  PolyMatrix r(p.rows(), static_cast<int>(a.cols()), p.nvars());
  for (int i = 0; i < p.rows(); ++i)
    for (int k = 0; k < p.cols(); ++k)
      for (int j = 0; j < a.cols(); ++j)
        if (a(k, j) != 0.0) r(i, j) += p(i, k) * a(k, j);
  return r;
}

Dictionary::Dictionary(int n, std::vector<Monomial> entries) : n_(n), entries_(std::move(entries)) {
  if (n < 1) throw std::invalid_argument("dictionary needs n >= 1");
  std::set<std::vector<int>> seen;
  for (auto& m : entries_) {
    if (m.nvars() != n) throw std::invalid_argument("dictionary entry arity mismatch");
    if (m.degree() < 1) throw std::invalid_argument("dictionary entry of degree 0: " + m.str());
    if (!seen.insert(m.exps).second) throw std::invalid_argument("duplicate dictionary entry " + m.str());
  }
  for (int k = 0; k < n; ++k)
    if (index_of(Monomial::variable(n, k)) < 0)
      throw std::invalid_argument("dictionary lacks degree-1 monomial x" + std::to_string(k + 1));
}

int Dictionary::max_degree() const {
  int d = 0;
  for (auto& m : entries_) d = std::max(d, m.degree());
  return d;
}

int Dictionary::index_of(const Monomial& m) const {
  for (size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i] == m) return static_cast<int>(i);
  return -1;
}

VectorXd Dictionary::eval(const VectorXd& x) const {
  if (x.size() != n_) throw std::invalid_argument("dictionary eval dimension mismatch");
  VectorXd r(size());
  for (int i = 0; i < size(); ++i) r[i] = entries_[i].eval(x);
  return r;
}

Dictionary build_dictionary(int n, int dmax) {
  if (n < 1 || dmax < 1) throw std::invalid_argument("build_dictionary needs n, dmax >= 1");
  return Dictionary(n, monomials_up_to(n, 1, dmax));
}

Dictionary dictionary_from_exponents(int n, const std::vector<std::vector<int>>& exps) {
  std::vector<Monomial> e;
  for (auto& v : exps) e.emplace_back(v);
  return Dictionary(n, std::move(e));
}

PolyMatrix factorize_theta(const Dictionary& dict) {
  std::vector<int> div;
  for (auto& m : dict.entries()) {
    int k = 0;
    while (m.exps[k] == 0) ++k;
    div.push_back(k);
  }
  return factorize_theta(dict, div);
}

PolyMatrix factorize_theta(const Dictionary& dict, const std::vector<int>& divisor) {
  int n = dict.nvars();
  if (static_cast<int>(divisor.size()) != dict.size())
    throw std::invalid_argument("theta divisor list length differs from dictionary size");
  PolyMatrix th(dict.size(), n, n);
  for (int i = 0; i < dict.size(); ++i) {
    int k = divisor[i];
    if (k < 0 || k >= n || dict[i].exps[k] == 0)
      throw std::invalid_argument("theta divisor does not divide " + dict[i].str());
    th(i, k).add_term(dict[i] / Monomial::variable(n, k), 1.0);
  }
  return th;
}

MatrixXd theta_left_pinv(const PolyMatrix& theta, const VectorXd& x) {
  MatrixXd t = theta.eval(x);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(t);
  qr.setThreshold(1e-12);
  if (qr.rank() < t.cols()) {
    std::ostringstream os;
    os << "Theta rank deficient at x = [" << x.transpose() << "]";
    throw SingularityError(os.str());
  }
  MatrixXd ata = t.transpose() * t;
  return ata.ldlt().solve(t.transpose());
}

}  // namespace barrierforge
