#pragma once

#include "barrierforge/models.hpp"
#include "barrierforge/sdp.hpp"

#include <map>
#include <optional>

namespace barrierforge {

struct SosDegreeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// affine function of scalar SDP variables
class LinExpr {
 public:
  LinExpr(double c = 0.0) : constant_(c) {}
  static LinExpr var(int block, int row, int col = 0, double coef = 1.0);

  const std::vector<Term>& terms() const { return terms_; }
  double constant() const { return constant_; }
  bool is_constant() const { return terms_.empty(); }

  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(double s);
  LinExpr operator+(const LinExpr& o) const { return LinExpr(*this) += o; }
  LinExpr operator-(const LinExpr& o) const { return LinExpr(*this) -= o; }
  LinExpr operator*(double s) const { return LinExpr(*this) *= s; }
  LinExpr operator-() const { return *this * -1.0; }
  // accumulate s * o without temporaries
  void axpy(double s, const LinExpr& o);

  // merge duplicate variables, drop exact zeros
  LinExpr& compress();
  double eval(const SdpSolution& sol) const;
  // max coefficient difference after compression
  static double distance(LinExpr a, LinExpr b);

 private:
  std::vector<Term> terms_;
  double constant_ = 0.0;
};

class ExprMatrix {
 public:
  ExprMatrix() = default;
  ExprMatrix(int rows, int cols) : rows_(rows), cols_(cols), e_(static_cast<size_t>(rows) * cols) {}
  static ExprMatrix constant(const MatrixXd& m);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  LinExpr& operator()(int r, int c) { return e_[r * cols_ + c]; }
  const LinExpr& operator()(int r, int c) const { return e_[r * cols_ + c]; }

  ExprMatrix operator+(const ExprMatrix& o) const;
  ExprMatrix operator-(const ExprMatrix& o) const;
  ExprMatrix operator*(double s) const;
  ExprMatrix transpose() const;
  MatrixXd eval(const SdpSolution& sol) const;
  void compress();
  bool is_zero() const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<LinExpr> e_;
};

ExprMatrix operator*(const MatrixXd& a, const ExprMatrix& e);
ExprMatrix operator*(const ExprMatrix& e, const MatrixXd& a);
// scalar expression times constant matrix
ExprMatrix operator*(const LinExpr& s, const MatrixXd& m);

// polynomial matrix whose coefficients are affine in the decision variables
class PolyExprMatrix {
 public:
  using Coeffs = std::map<Monomial, ExprMatrix, GradedLess>;

  PolyExprMatrix() = default;
  PolyExprMatrix(int rows, int cols, int nvars) : rows_(rows), cols_(cols), n_(nvars) {}
  static PolyExprMatrix constant(const ExprMatrix& m, int nvars);
  static PolyExprMatrix from_poly(const PolyMatrix& p);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nvars() const { return n_; }
  const Coeffs& coeffs() const { return c_; }
  int degree() const;

  ExprMatrix& at(const Monomial& m);
  void add(const Monomial& m, const ExprMatrix& e);
  PolyExprMatrix operator+(const PolyExprMatrix& o) const;
  PolyExprMatrix operator-(const PolyExprMatrix& o) const;
  PolyExprMatrix operator*(double s) const;
  PolyExprMatrix transpose() const;
  void set_block(int r0, int c0, const PolyExprMatrix& b);

  PolyMatrix eval(const SdpSolution& sol, double prune = 0.0) const;

 private:
  int rows_ = 0, cols_ = 0, n_ = 0;
  Coeffs c_;
};

PolyExprMatrix operator*(const MatrixXd& a, const PolyExprMatrix& p);
// numeric polynomial matrix times expression matrix constant in x
PolyExprMatrix operator*(const PolyMatrix& p, const ExprMatrix& e);

enum class SosKind { scalar, matrix };

struct SosConstraint {
  std::string name;
  PolyExprMatrix expr;
  std::optional<Box> region;  // none: globally nonnegative
  int multiplier_degree = 0;
  SosKind kind = SosKind::scalar;
  bool facets = false;  // also multiply the linear box facets
};

// For an s x s constraint the multiplier is an SOS matrix: Gram block of side
// basis.size() * s. Scalar constraints with a degree-0 multiplier use a nonneg.
struct MultiplierInfo {
  Polynomial constraint;  // b_k or a facet
  int block;
  std::vector<Monomial> basis;
  bool scalar;
  int size = 1;
};

struct SosHandle {
  std::string name;
  int gram_block = -1;
  int size = 1;  // s, matrix side length
  std::vector<Monomial> basis;
  std::vector<MultiplierInfo> multipliers;
  int num_equalities = 0;
};

class SosProgram {
 public:
  SosProgram() = default;

  SdpProblem& problem() { return prob_; }
  const SdpProblem& problem() const { return prob_; }

  LinExpr new_free(const std::string& name);
  LinExpr new_nonneg(const std::string& name);
  ExprMatrix new_free_matrix(const std::string& name, int rows, int cols);
  ExprMatrix new_symmetric(const std::string& name, int n);
  ExprMatrix new_psd(const std::string& name, int n);

  void add_equality(const LinExpr& e);  // e == 0
  void add_lmi(const std::string& name, const ExprMatrix& m);  // m >= 0
  void set_objective(const LinExpr& e);

  const std::vector<SosHandle>& handles() const { return handles_; }

 private:
  friend SosHandle compile_scalar_sos(SosProgram&, const SosConstraint&);
  friend SosHandle compile_matrix_sos(SosProgram&, const SosConstraint&);
  SosHandle compile(const SosConstraint& c);

  SdpProblem prob_;
  std::vector<SosHandle> handles_;
};

SosHandle compile_scalar_sos(SosProgram& prog, const SosConstraint& c);
SosHandle compile_matrix_sos(SosProgram& prog, const SosConstraint& c);

// (z(x) kron I)' G (z(x) kron I) + sum_k g_k(x) Phi_k(x), rebuilt from a solution
PolyMatrix reconstruct(const SosHandle& h, const SdpSolution& sol, int nvars);

}  // namespace barrierforge
