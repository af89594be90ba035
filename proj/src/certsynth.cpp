#include "barrierforge/certsynth.hpp"

#include <random>
#include <sstream>

namespace barrierforge {

namespace {

PolyMatrix state_vector(int n) {
  PolyMatrix x(n, 1, n);
  for (int k = 0; k < n; ++k) x(k, 0) = Polynomial::variable(n, k);
  return x;
}

}  // namespace

DissipationProblem assemble_dissipation_problem(const TrajectoryRecord& rec, const SubsystemSpec& spec,
                                                const SynthSettings& set, int multiplier_degree) {
  const int n = spec.n, T = rec.T, M = spec.dict.size();
  if (!(set.lambda > 0) || !(set.pi > 0)) throw std::invalid_argument("lambda and pi must be positive");
  if (T < M + 1) throw CollectionError("T = " + std::to_string(T) + " is below M + 1 = " + std::to_string(M + 1));
  MatrixXd N0T = build_N0T(rec, spec.dict);
  auto rank = check_rank(N0T);
  if (!rank.full_row_rank) throw CollectionError("rank precondition violated: N0T is not full row rank");

  // H(x) = N0T^+ Theta(x) S + K Y(x) satisfies N0T H(x) = Theta(x) S for every Y
  Eigen::JacobiSVD<MatrixXd> svd(N0T, Eigen::ComputeFullV | Eigen::ComputeThinU);
  MatrixXd Np = svd.solve(MatrixXd::Identity(M, M));
  MatrixXd K = svd.matrixV().rightCols(T - M);

  DissipationProblem dp;
  auto& prog = dp.prog;
  MatrixXd I = MatrixXd::Identity(n, n);

  double s_lo = std::max(set.eps, set.s_max > 0 ? set.cond_bound * set.s_max : 0.0);
  dp.s_offset = s_lo;
  ExprMatrix Shat = prog.new_psd("S_hat", n);
  dp.S = Shat + ExprMatrix::constant(I * s_lo);
  if (set.s_max > 0) prog.add_lmi("S_upper", ExprMatrix::constant(I * set.s_max) - dp.S);

  int dth = std::max(spec.theta.degree(), 0);
  PolyExprMatrix Y(T - M, n, n);
  for (auto& mono : monomials_up_to(n, 0, dth)) Y.add(mono, prog.new_free_matrix("Y." + mono.str(), T - M, n));
  PolyMatrix NpTheta = Np * spec.theta;
  dp.H = NpTheta * dp.S + K * Y;

  dp.alpha = prog.new_nonneg("alpha");
  dp.Zbar11 = prog.new_symmetric("Zbar11", n);
  dp.Zbar12 = prog.new_free_matrix("Zbar12", n, n);
  ExprMatrix Wslack = prog.new_psd("Zbar22_slack", n);
  dp.Zbar22 = dp.S * -set.kappa - Wslack;

  MatrixXd Xd = rec.X1T - spec.D * rec.W0T;
  PolyExprMatrix XdH = Xd * dp.H;
  ExprMatrix Gconst = dp.alpha * rec.PsiPsiT() + ExprMatrix::constant(I * set.pi) + dp.S * set.lambda;
  PolyExprMatrix G = XdH + XdH.transpose() + PolyExprMatrix::constant(Gconst, n);

  int s = 2 * n + T;
  PolyExprMatrix L(s, s, n);
  L.set_block(0, 0, PolyExprMatrix::constant(dp.Zbar22, n) - G);
  L.set_block(0, n, dp.H.transpose());
  L.set_block(0, n + T, PolyExprMatrix::constant(dp.Zbar12.transpose(), n));
  L.set_block(n, 0, dp.H);
  L.set_block(n, n, PolyExprMatrix::constant(dp.alpha * MatrixXd::Identity(T, T), n));
  L.set_block(n + T, 0, PolyExprMatrix::constant(dp.Zbar12, n));
  L.set_block(n + T, n + T,
              PolyExprMatrix::constant(dp.Zbar11 - ExprMatrix::constant(spec.D.transpose() * spec.D / set.pi), n));

  int k = 0;
  for (auto& box : spec.X.boxes) {
    SosConstraint c;
    c.name = "dissipation" + std::to_string(k++);
    c.expr = L;
    c.region = box;
    c.multiplier_degree = multiplier_degree;
    c.kind = SosKind::matrix;
    dp.sos.push_back(compile_matrix_sos(prog, c));
  }

  LinExpr obj = dp.alpha * set.alpha_weight;
  for (int i = 0; i < n; ++i) obj += dp.Zbar11(i, i);
  prog.set_objective(obj);
  return dp;
}

PolyMatrix StorageCertificate::controller() const { return F * state_vector(n); }

StorageCertificate synthesize_csc(const TrajectoryRecord& rec, const SubsystemSpec& spec, const SynthSettings& set) {
  std::vector<int> tried;
  std::string last;
  for (int d = set.dissipation_degree; d <= std::max(set.degree_cap, set.dissipation_degree); d += 2) {
    tried.push_back(d);
    DissipationProblem dp = assemble_dissipation_problem(rec, spec, set, d);
    SdpSolution sol = solve(dp.prog.problem(), set.sdp);
    if (!sol.ok()) {
      last = to_string(sol.status) + " (" + sol.message + ")";
      continue;
    }
    StorageCertificate c;
    c.n = spec.n;
    c.m = spec.m;
    c.T = rec.T;
    c.S_inv = dp.S.eval(sol);
    c.S_inv = 0.5 * (c.S_inv + c.S_inv.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(c.S_inv);
    double lo = es.eigenvalues()[0], hi = es.eigenvalues()[spec.n - 1];
    if (!(lo > 0) || hi / lo > 1e10) throw ConditioningError("S is near-singular (condition number above 1e10)");
    c.P = c.S_inv.inverse();
    c.P = 0.5 * (c.P + c.P.transpose());
    c.H = dp.H.eval(sol);
    c.Q = c.H * c.P;
    c.U0T = rec.U0T;
    c.F = rec.U0T * c.Q;
    c.alpha = dp.alpha.eval(sol);
    c.pi = set.pi;
    c.lambda = set.lambda;
    c.Zbar11 = dp.Zbar11.eval(sol);
    c.Zbar12 = dp.Zbar12.eval(sol);
    c.Zbar21 = c.Zbar12.transpose();
    c.Zbar22 = dp.Zbar22.eval(sol);
    c.Zbar22 = 0.5 * (c.Zbar22 + c.Zbar22.transpose());
    c.Z11 = c.Zbar11;
    c.Z12 = c.Zbar12 * c.P;
    c.Z21 = c.Z12.transpose();
    c.Z22 = c.P * c.Zbar22 * c.P;
    c.Z22 = 0.5 * (c.Z22 + c.Z22.transpose());
    c.provenance.seed = rec.seed;
    c.provenance.benchmark = spec.name;
    c.provenance.tau = rec.tau;
    c.provenance.phi_bar = rec.phi_bar;
    c.provenance.attempts = rec.attempts;
    c.provenance.multiplier_degree = d;
    c.provenance.T_requested = rec.T;
    return c;
  }
  std::ostringstream os;
  os << "dissipation SOS program infeasible for lambda = " << set.lambda << ", pi = " << set.pi
     << ", multiplier degrees {";
  for (size_t i = 0; i < tried.size(); ++i) os << (i ? "," : "") << tried[i];
  os << "}: " << last;
  throw InfeasibleError(os.str(), set.lambda, set.pi, tried);
}

namespace {

PolyExprMatrix quad_minus(const MatrixXd& P, const LinExpr& level, double sign) {
  // sign * (x'Px - level)
  int n = static_cast<int>(P.rows());
  PolyExprMatrix e(1, 1, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double c = (i == j ? P(i, i) : P(i, j) + P(j, i)) * sign;
      if (c == 0.0) continue;
      ExprMatrix v(1, 1);
      v(0, 0) = LinExpr(c);
      e.add(Monomial::variable(n, i) * Monomial::variable(n, j), v);
    }
  ExprMatrix v(1, 1);
  v(0, 0) = level * -sign;
  e.add(Monomial::constant(n), v);
  return e;
}

double level_sos(const MatrixXd& P, const Box& box, int degree, const SdpSettings& sdp, bool upper) {
  SosProgram prog;
  LinExpr lv = prog.new_free(upper ? "eta" : "mu");
  SosConstraint c;
  c.name = upper ? "initial" : "unsafe";
  c.expr = quad_minus(P, lv, upper ? -1.0 : 1.0);
  c.region = box;
  c.multiplier_degree = degree;
  c.kind = SosKind::scalar;
  c.facets = true;
  compile_scalar_sos(prog, c);
  prog.set_objective(upper ? lv : -lv);
  SdpSolution sol = solve(prog.problem(), sdp);
  if (sol.status == SdpStatus::unbounded) throw std::runtime_error("level-set program unbounded");
  if (!sol.ok()) throw std::runtime_error("level-set program failed: " + to_string(sol.status) + " (" + sol.message + ")");
  return lv.eval(sol);
}

}  // namespace

Levels compute_levels(const MatrixXd& P, const Region& X0, const Region& Xa, int degree, const SdpSettings& sdp) {
  if (X0.empty()) throw std::invalid_argument("initial region is empty");
  if (Xa.empty()) throw std::runtime_error("unsafe region is empty: mu is unbounded");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (P + P.transpose()));
  if (!(es.eigenvalues()[0] > 0)) throw std::invalid_argument("P must be positive definite");
  Levels L{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (auto& b : X0.boxes) L.eta = std::max(L.eta, level_sos(P, b, degree, sdp, true));
  for (auto& b : Xa.boxes) L.mu = std::min(L.mu, level_sos(P, b, degree, sdp, false));
  return L;
}

VectorXd eval_local_controller(const StorageCertificate& cert, const MatrixXd& U0T, const VectorXd& x) {
  return U0T * (cert.H.eval(x) * (cert.P * x));
}

double equality_residual(const StorageCertificate& cert, const MatrixXd& N0T, const PolyMatrix& theta, int samples,
                         std::uint64_t seed, const Box& box) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    VectorXd x(box.dim());
    for (int k = 0; k < box.dim(); ++k) x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * U(rng);
    worst = std::max(worst, (N0T * cert.H.eval(x) - theta.eval(x) * cert.S_inv).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace barrierforge
