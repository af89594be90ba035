#pragma once

#include <Eigen/Dense>

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace barrierforge {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Monomial {
  std::vector<int> exps;

  Monomial() = default;
  explicit Monomial(std::vector<int> e);
  static Monomial constant(int n) { return Monomial(std::vector<int>(n, 0)); }
  static Monomial variable(int n, int k);

  int nvars() const { return static_cast<int>(exps.size()); }
  int degree() const;
  double eval(const VectorXd& x) const;
  Monomial operator*(const Monomial& o) const;
  // true when o divides *this
  bool divisible_by(const Monomial& o) const;
  Monomial operator/(const Monomial& o) const;
  std::string str() const;

  bool operator==(const Monomial& o) const { return exps == o.exps; }
  bool operator!=(const Monomial& o) const { return exps != o.exps; }
};

// graded order: lower degree first, then x1-heavy first (x1^2, x1x2, x1x3, x2^2, ...)
struct GradedLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

// all monomials with lo <= degree <= hi, graded order
std::vector<Monomial> monomials_up_to(int n, int lo, int hi);

class Polynomial {
 public:
  using Terms = std::map<Monomial, double, GradedLess>;

  Polynomial() = default;
  explicit Polynomial(int n) : n_(n) {}
  static Polynomial constant(int n, double c);
  static Polynomial monomial(const Monomial& m, double c = 1.0);
  static Polynomial variable(int n, int k) { return monomial(Monomial::variable(n, k)); }

  int nvars() const { return n_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;  // -1 for zero polynomial
  double coeff(const Monomial& m) const;
  void add_term(const Monomial& m, double c);

  double eval(const VectorXd& x) const;

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double s) const;
  Polynomial operator-() const { return *this * -1.0; }
  Polynomial& operator+=(const Polynomial& o);
  bool operator==(const Polynomial& o) const { return n_ == o.n_ && terms_ == o.terms_; }

  // drop terms with |c| <= tol
  Polynomial pruned(double tol) const;
  std::string str() const;

 private:
  int n_ = 0;
  Terms terms_;
};

class PolyMatrix {
 public:
  PolyMatrix() = default;
  PolyMatrix(int rows, int cols, int nvars);
  static PolyMatrix constant(const MatrixXd& m, int nvars);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nvars() const { return n_; }
  int degree() const;

  Polynomial& operator()(int r, int c) { return entries_[r * cols_ + c]; }
  const Polynomial& operator()(int r, int c) const { return entries_[r * cols_ + c]; }

  MatrixXd eval(const VectorXd& x) const;

  PolyMatrix operator+(const PolyMatrix& o) const;
  PolyMatrix operator*(const PolyMatrix& o) const;
  PolyMatrix transpose() const;

  // every monomial appearing in any entry
  std::vector<Monomial> support() const;
  // constant coefficient matrix of monomial m
  MatrixXd coeff(const Monomial& m) const;

 private:
  int rows_ = 0, cols_ = 0, n_ = 0;
  std::vector<Polynomial> entries_;
};

PolyMatrix operator*(const MatrixXd& a, const PolyMatrix& p);
PolyMatrix operator*(const PolyMatrix& p, const MatrixXd& a);

class Dictionary {
 public:
  Dictionary() = default;
  // validates: distinct entries, degree >= 1, all degree-1 monomials present
  Dictionary(int n, std::vector<Monomial> entries);

  int nvars() const { return n_; }
  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<Monomial>& entries() const { return entries_; }
  const Monomial& operator[](int i) const { return entries_[i]; }
  int max_degree() const;
  int index_of(const Monomial& m) const;  // -1 if absent

  VectorXd eval(const VectorXd& x) const;

 private:
  int n_ = 0;
  std::vector<Monomial> entries_;
};

Dictionary build_dictionary(int n, int dmax);
Dictionary dictionary_from_exponents(int n, const std::vector<std::vector<int>>& exps);

// Theta(x) with Theta(x) x = R(x). Row i divides entry i by the state variable of
// lowest index with positive exponent.
PolyMatrix factorize_theta(const Dictionary& dict);
// explicit variant: divisor[i] is the (0-based) variable removed from entry i
PolyMatrix factorize_theta(const Dictionary& dict, const std::vector<int>& divisor);

MatrixXd theta_left_pinv(const PolyMatrix& theta, const VectorXd& x);

}  // namespace barrierforge
