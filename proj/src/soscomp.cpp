#include "barrierforge/soscomp.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <functional>
#include <tuple>

namespace barrierforge {

LinExpr LinExpr::var(int block, int row, int col, double coef) {
  LinExpr e;
  e.terms_.push_back({block, row, col, coef});
  return e;
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  constant_ += o.constant_;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
  axpy(-1.0, o);
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  for (auto& t : terms_) t.coef *= s;
  constant_ *= s;
  return *this;
}

void LinExpr::axpy(double s, const LinExpr& o) {
  if (s == 0.0) return;
  terms_.reserve(terms_.size() + o.terms_.size());
  for (auto t : o.terms_) {
    t.coef *= s;
    terms_.push_back(t);
  }
  constant_ += s * o.constant_;
}

LinExpr& LinExpr::compress() {
  std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
    return std::tie(a.block, a.row, a.col) < std::tie(b.block, b.row, b.col);
  });
  std::vector<Term> out;
  out.reserve(terms_.size());
  for (auto& t : terms_) {
    if (!out.empty() && out.back().block == t.block && out.back().row == t.row && out.back().col == t.col)
      out.back().coef += t.coef;
    else
      out.push_back(t);
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const Term& t) { return t.coef == 0.0; }), out.end());
  terms_ = std::move(out);
  return *this;
}

double LinExpr::eval(const SdpSolution& sol) const {
  double v = constant_;
  for (auto& t : terms_) v += t.coef * sol.values[t.block](t.row, t.col);
  return v;
}

double LinExpr::distance(LinExpr a, LinExpr b) {
  a -= b;
  a.compress();
  double d = std::abs(a.constant_);
  for (auto& t : a.terms_) d = std::max(d, std::abs(t.coef));
  return d;
}

ExprMatrix ExprMatrix::constant(const MatrixXd& m) {
  ExprMatrix e(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) e(r, c) = LinExpr(m(r, c));
  return e;
}

ExprMatrix ExprMatrix::operator+(const ExprMatrix& o) const {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("ExprMatrix + shape mismatch");
  ExprMatrix r(*this);
  for (size_t i = 0; i < e_.size(); ++i) r.e_[i] += o.e_[i];
  return r;
}

ExprMatrix ExprMatrix::operator-(const ExprMatrix& o) const { return *this + o * -1.0; }

ExprMatrix ExprMatrix::operator*(double s) const {
  ExprMatrix r(*this);
  for (auto& x : r.e_) x *= s;
  return r;
}

ExprMatrix ExprMatrix::transpose() const {
  ExprMatrix r(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
  return r;
}

MatrixXd ExprMatrix::eval(const SdpSolution& sol) const {
  MatrixXd m(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).eval(sol);
  return m;
}

void ExprMatrix::compress() {
  for (auto& x : e_) x.compress();
}

bool ExprMatrix::is_zero() const {
  for (auto& x : e_)
    if (!x.terms().empty() || x.constant() != 0.0) return false;
  return true;
}

ExprMatrix operator*(const MatrixXd& a, const ExprMatrix& e) {
  if (a.cols() != e.rows()) throw std::invalid_argument("matrix * ExprMatrix shape mismatch");
  ExprMatrix r(static_cast<int>(a.rows()), e.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      double s = a(i, k);
      if (s == 0.0) continue;
      for (int j = 0; j < e.cols(); ++j) r(i, j).axpy(s, e(k, j));
    }
  r.compress();
  return r;
}

ExprMatrix operator*(const ExprMatrix& e, const MatrixXd& a) {
  return (a.transpose() * e.transpose()).transpose();
}

ExprMatrix operator*(const LinExpr& s, const MatrixXd& m) {
  ExprMatrix r(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) r(i, j) = s * m(i, j);
  return r;
}

PolyExprMatrix PolyExprMatrix::constant(const ExprMatrix& m, int nvars) {
  PolyExprMatrix p(m.rows(), m.cols(), nvars);
  p.add(Monomial::constant(nvars), m);
  return p;
}

PolyExprMatrix PolyExprMatrix::from_poly(const PolyMatrix& q) {
  PolyExprMatrix p(q.rows(), q.cols(), q.nvars());
  for (auto& m : q.support()) p.add(m, ExprMatrix::constant(q.coeff(m)));
  return p;
}

int PolyExprMatrix::degree() const {
  int d = -1;
  for (auto& [m, e] : c_)
    if (!e.is_zero()) d = std::max(d, m.degree());
  return d;
}

ExprMatrix& PolyExprMatrix::at(const Monomial& m) {
  auto it = c_.find(m);
  if (it == c_.end()) it = c_.emplace(m, ExprMatrix(rows_, cols_)).first;
  return it->second;
}

void PolyExprMatrix::add(const Monomial& m, const ExprMatrix& e) {
  if (e.rows() != rows_ || e.cols() != cols_) throw std::invalid_argument("PolyExprMatrix term shape mismatch");
  if (m.nvars() != n_) throw std::invalid_argument("PolyExprMatrix monomial arity mismatch");
  auto& slot = at(m);
  slot = slot + e;
}

PolyExprMatrix PolyExprMatrix::operator+(const PolyExprMatrix& o) const {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("PolyExprMatrix + shape mismatch");
  PolyExprMatrix r(*this);
  for (auto& [m, e] : o.c_) r.add(m, e);
  return r;
}

PolyExprMatrix PolyExprMatrix::operator-(const PolyExprMatrix& o) const { return *this + o * -1.0; }

PolyExprMatrix PolyExprMatrix::operator*(double s) const {
  PolyExprMatrix r(*this);
  for (auto& [m, e] : r.c_) e = e * s;
  return r;
}

PolyExprMatrix PolyExprMatrix::transpose() const {
  PolyExprMatrix r(cols_, rows_, n_);
  for (auto& [m, e] : c_) r.c_.emplace(m, e.transpose());
  return r;
}

void PolyExprMatrix::set_block(int r0, int c0, const PolyExprMatrix& b) {
  if (r0 + b.rows_ > rows_ || c0 + b.cols_ > cols_) throw std::invalid_argument("set_block out of range");
  for (auto& [m, e] : b.c_) {
    auto& slot = at(m);
    for (int i = 0; i < e.rows(); ++i)
      for (int j = 0; j < e.cols(); ++j) slot(r0 + i, c0 + j) = e(i, j);
  }
}

PolyMatrix PolyExprMatrix::eval(const SdpSolution& sol, double prune) const {
  PolyMatrix p(rows_, cols_, n_);
  for (auto& [m, e] : c_) {
    MatrixXd v = e.eval(sol);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j)
        if (std::abs(v(i, j)) > prune) p(i, j).add_term(m, v(i, j));
  }
  return p;
}

PolyExprMatrix operator*(const MatrixXd& a, const PolyExprMatrix& p) {
  PolyExprMatrix r(static_cast<int>(a.rows()), p.cols(), p.nvars());
  for (auto& [m, e] : p.coeffs()) r.add(m, a * e);
  return r;
}

PolyExprMatrix operator*(const PolyMatrix& p, const ExprMatrix& e) {
  PolyExprMatrix r(p.rows(), e.cols(), p.nvars());
  for (auto& m : p.support()) r.add(m, p.coeff(m) * e);
  return r;
}

LinExpr SosProgram::new_free(const std::string& name) {
  int b = prob_.add_block(name, BlockKind::free, 1);
  return LinExpr::var(b, 0);
}

LinExpr SosProgram::new_nonneg(const std::string& name) {
  int b = prob_.add_block(name, BlockKind::nonneg, 1);
  return LinExpr::var(b, 0);
}

ExprMatrix SosProgram::new_free_matrix(const std::string& name, int rows, int cols) {
  int b = prob_.add_block(name, BlockKind::free, rows * cols);
  ExprMatrix e(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) e(i, j) = LinExpr::var(b, i * cols + j);
  return e;
}

ExprMatrix SosProgram::new_symmetric(const std::string& name, int n) {
  int b = prob_.add_block(name, BlockKind::free, n * (n + 1) / 2);
  ExprMatrix e(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j, ++k) {
      e(i, j) = LinExpr::var(b, k);
      e(j, i) = LinExpr::var(b, k);
    }
  return e;
}

ExprMatrix SosProgram::new_psd(const std::string& name, int n) {
  int b = prob_.add_block(name, BlockKind::psd, n);
  ExprMatrix e(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) e(i, j) = LinExpr::var(b, std::min(i, j), std::max(i, j));
  return e;
}

void SosProgram::add_equality(const LinExpr& e) {
  LinExpr c = e;
  c.compress();
  prob_.equalities.push_back({c.terms(), -c.constant()});
}

void SosProgram::add_lmi(const std::string& name, const ExprMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("LMI must be square");
  int n = m.rows();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (LinExpr::distance(m(i, j), m(j, i)) > 1e-10) throw std::invalid_argument("LMI '" + name + "' is not symmetric");
  ExprMatrix S = new_psd(name, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) add_equality(S(i, j) - (m(i, j) + m(j, i)) * 0.5);
}

void SosProgram::set_objective(const LinExpr& e) {
  LinExpr c = e;
  c.compress();
  prob_.objective = c.terms();
  prob_.objective_offset = c.constant();
  prob_.has_objective = true;
}

namespace {

// g(x) Phi(x), Phi = (z kron I)' Q (z kron I); entries keyed by (monomial, r, c) with r <= c
using MultTerms = std::map<std::tuple<Monomial, int, int>, LinExpr, std::function<bool(const std::tuple<Monomial, int, int>&,
                                                                                       const std::tuple<Monomial, int, int>&)>>;

MultTerms multiplier_product(const MultiplierInfo& mi) {
  MultTerms out([](const auto& x, const auto& y) {
    GradedLess lt;
    if (lt(std::get<0>(x), std::get<0>(y))) return true;
    if (lt(std::get<0>(y), std::get<0>(x))) return false;
    return std::make_pair(std::get<1>(x), std::get<2>(x)) < std::make_pair(std::get<1>(y), std::get<2>(y));
  });
  if (mi.scalar) {
    for (auto& [m, c] : mi.constraint.terms()) out[{m, 0, 0}].axpy(c, LinExpr::var(mi.block, 0));
    return out;
  }
  int q = static_cast<int>(mi.basis.size()), s = mi.size;
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) {
      Monomial zz = mi.basis[a] * mi.basis[b];
      for (int r = 0; r < s; ++r)
        for (int c = r; c < s; ++c) {
          int i = a * s + r, j = b * s + c;
          LinExpr v = LinExpr::var(mi.block, std::min(i, j), std::max(i, j));
          for (auto& [m, coef] : mi.constraint.terms()) out[{zz * m, r, c}].axpy(coef, v);
        }
    }
  return out;
}

}  // namespace

SosHandle SosProgram::compile(const SosConstraint& c) {
  const auto& E = c.expr;
  int n = E.nvars(), s = E.rows();
  if (E.rows() != E.cols()) throw std::invalid_argument("SOS expression must be square");
  if (c.kind == SosKind::scalar && s != 1) throw std::invalid_argument("scalar SOS expression must be 1x1");
  int d = c.multiplier_degree;
  if (d < 0 || d % 2) throw std::invalid_argument("multiplier degree must be even and non-negative");
  if (c.region && c.region->dim() != n) throw std::invalid_argument("SOS region dimension mismatch");

  for (auto& [m, e] : E.coeffs())
    for (int r = 0; r < s; ++r)
      for (int q = r + 1; q < s; ++q)
        if (LinExpr::distance(e(r, q), e(q, r)) > 1e-10)
          throw std::invalid_argument("matrix SOS expression '" + c.name + "' is not symmetric");

  int dexpr = E.degree();
  if (dexpr % 2 == 1 && (!c.region || dexpr > d + 2))
    throw SosDegreeError("SOS expression '" + c.name + "' has odd leading degree " + std::to_string(dexpr));
  int top = std::max(dexpr, c.region ? d + 2 : 0);
  int h = (top + 1) / 2;

  SosHandle hd;
  hd.name = c.name;
  hd.size = s;
  hd.basis = monomials_up_to(n, 0, h);
  int q = static_cast<int>(hd.basis.size());
  hd.gram_block = prob_.add_block(c.name + ".gram", BlockKind::psd, q * s);

  if (c.region) {
    std::vector<Polynomial> gs = c.region->quadratic_constraints();
    if (c.facets)
      for (auto& f : c.region->facet_constraints()) gs.push_back(f);
    int k = 0;
    for (auto& g : gs) {
      MultiplierInfo mi;
      mi.constraint = g;
      // facets are linear: keep the product within the basis degree
      int dm = g.degree() == 1 ? std::min(d, 2 * h - 2) : d;
      if (dm % 2) --dm;
      mi.scalar = dm == 0 && s == 1;
      mi.size = s;
      std::string nm = c.name + ".mult" + std::to_string(k++);
      if (mi.scalar) mi.block = prob_.add_block(nm, BlockKind::nonneg, 1);
      else {
        mi.basis = monomials_up_to(n, 0, dm / 2);
        mi.block = prob_.add_block(nm, BlockKind::psd, static_cast<int>(mi.basis.size()) * s);
      }
      hd.multipliers.push_back(std::move(mi));
    }
  }

  std::map<Monomial, std::map<std::pair<int, int>, LinExpr>, GradedLess> msum;
  for (auto& mi : hd.multipliers)
    for (auto& [key, e] : multiplier_product(mi)) msum[std::get<0>(key)][{std::get<1>(key), std::get<2>(key)}] += e;

  std::map<Monomial, std::vector<std::pair<int, int>>, GradedLess> pairs;
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) pairs[hd.basis[a] * hd.basis[b]].push_back({a, b});

  std::set<Monomial, GradedLess> monos;
  for (auto& [m, v] : pairs) monos.insert(m);
  for (auto& [m, e] : E.coeffs()) monos.insert(m);
  for (auto& [m, e] : msum) monos.insert(m);

  size_t before = prob_.equalities.size();
  for (auto& mono : monos) {
    auto pit = pairs.find(mono);
    auto eit = E.coeffs().find(mono);
    auto mit = msum.find(mono);
    for (int r = 0; r < s; ++r)
      for (int cc = r; cc < s; ++cc) {
        LinExpr row;
        if (pit != pairs.end())
          for (auto [a, b] : pit->second) {
            int i = a * s + r, j = b * s + cc;
            row += LinExpr::var(hd.gram_block, std::min(i, j), std::max(i, j));
          }
        if (eit != E.coeffs().end()) row.axpy(-0.5, eit->second(r, cc) + eit->second(cc, r));
        if (mit != msum.end()) {
          auto f = mit->second.find({r, cc});
          if (f != mit->second.end()) row += f->second;
        }
        row.compress();
        if (row.terms().empty() && row.constant() == 0.0) continue;
        add_equality(row);
      }
  }
  hd.num_equalities = static_cast<int>(prob_.equalities.size() - before);
  handles_.push_back(hd);
  return hd;
}

SosHandle compile_scalar_sos(SosProgram& prog, const SosConstraint& c) {
  if (c.kind != SosKind::scalar) throw std::invalid_argument("compile_scalar_sos needs a scalar constraint");
  return prog.compile(c);
}

SosHandle compile_matrix_sos(SosProgram& prog, const SosConstraint& c) {
  if (c.kind != SosKind::matrix) throw std::invalid_argument("compile_matrix_sos needs a matrix constraint");
  return prog.compile(c);
}

PolyMatrix reconstruct(const SosHandle& h, const SdpSolution& sol, int nvars) {
  int s = h.size, q = static_cast<int>(h.basis.size());
  const MatrixXd& G = sol.values[h.gram_block];
  PolyMatrix out(s, s, nvars);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) {
      Monomial zz = h.basis[a] * h.basis[b];
      for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c) {
          int i = a * s + r, j = b * s + c;
          double v = G(std::min(i, j), std::max(i, j));
          if (v != 0.0) out(r, c).add_term(zz, v);
        }
    }
  for (auto& mi : h.multipliers) {
    if (mi.scalar) {
      out(0, 0) += mi.constraint * sol.values[mi.block](0, 0);
      continue;
    }
    const MatrixXd& Q = sol.values[mi.block];
    int qm = static_cast<int>(mi.basis.size());
    for (int r = 0; r < s; ++r)
      for (int c = 0; c < s; ++c) {
        Polynomial phi(nvars);
        for (int a = 0; a < qm; ++a)
          for (int b = 0; b < qm; ++b) {
            int i = a * s + r, j = b * s + c;
            phi.add_term(mi.basis[a] * mi.basis[b], Q(std::min(i, j), std::max(i, j)));
          }
        out(r, c) += phi * mi.constraint;
      }
  }
  return out;
}

}  // namespace barrierforge
