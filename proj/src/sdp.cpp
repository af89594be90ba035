#include "barrierforge/sdp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

namespace barrierforge {

int SdpProblem::add_block(std::string name, BlockKind kind, int dim) {
  if (dim < 1) throw std::invalid_argument("block dimension must be positive");
  blocks.push_back({std::move(name), kind, dim});
  return static_cast<int>(blocks.size()) - 1;
}

int SdpProblem::find_block(const std::string& name) const {
  for (size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].name == name) return static_cast<int>(i);
  return -1;
}

long SdpProblem::num_scalar_variables() const {
  long n = 0;
  for (auto& b : blocks) n += b.kind == BlockKind::psd ? static_cast<long>(b.dim) * (b.dim + 1) / 2 : b.dim;
  return n;
}

namespace {

void check_term(const SdpProblem& p, const Term& t) {
  if (t.block < 0 || t.block >= static_cast<int>(p.blocks.size()))
    throw std::invalid_argument("term references an undeclared block");
  auto& b = p.blocks[t.block];
  if (b.kind == BlockKind::psd) {
    if (t.row < 0 || t.col < t.row || t.col >= b.dim) throw std::invalid_argument("psd term index out of range");
  } else if (t.row < 0 || t.row >= b.dim || t.col != 0) {
    throw std::invalid_argument("vector term index out of range");
  }
  if (!std::isfinite(t.coef)) throw std::invalid_argument("non-finite coefficient");
}

}  // namespace

void SdpProblem::validate() const {
  for (auto& c : equalities) {
    for (auto& t : c.terms) check_term(*this, t);
    if (!std::isfinite(c.rhs)) throw std::invalid_argument("non-finite right-hand side");
  }
  for (auto& t : objective) check_term(*this, t);
}

void SdpProblem::dump(std::ostream& os) const {
  os.precision(17);
  for (size_t i = 0; i < blocks.size(); ++i) {
    const char* k = blocks[i].kind == BlockKind::psd ? "psd" : blocks[i].kind == BlockKind::free ? "free" : "nonneg";
    os << "# block " << i << ' ' << blocks[i].name << ' ' << k << ' ' << blocks[i].dim << '\n';
  }
  for (auto& t : objective) os << "(-1, " << t.block << ", " << t.row << ", " << t.col << ", " << t.coef << ")\n";
  for (size_t i = 0; i < equalities.size(); ++i) {
    for (auto& t : equalities[i].terms)
      os << '(' << i << ", " << t.block << ", " << t.row << ", " << t.col << ", " << t.coef << ")\n";
    os << '(' << i << ", rhs, 0, 0, " << equalities[i].rhs << ")\n";
  }
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::feasible: return "feasible";
    case SdpStatus::infeasible: return "infeasible";
    case SdpStatus::unbounded: return "unbounded";
    case SdpStatus::numerical_failure: return "numerical_failure";
  }
  return "numerical_failure";
}

namespace {

struct Entry {
  int p, q;
  double a;
};

// A_i restricted to one psd block, fully expanded (both triangles)
struct BlockRow {
  int con;
  std::vector<Entry> e;
};

struct StandardForm {
  int m = 0, F = 0, L = 0;
  std::vector<int> nb;
  std::vector<std::vector<BlockRow>> rows;  // per psd block
  MatrixXd Af;                              // m x F
  std::vector<std::vector<std::pair<int, double>>> rowsL;  // per constraint
  VectorXd b, cF, cL;
  std::vector<MatrixXd> C;
  VectorXd row_scale;
  std::vector<int> pos;  // problem block -> offset (free/nonneg) or psd index
  std::vector<int> kept;  // problem constraint index of each internal row
  double obj_scale = 1.0;
};

StandardForm standardize(const SdpProblem& p) {
  StandardForm s;
  s.pos.resize(p.blocks.size());
  for (size_t k = 0; k < p.blocks.size(); ++k) {
    auto& b = p.blocks[k];
    if (b.kind == BlockKind::free) { s.pos[k] = s.F; s.F += b.dim; }
    else if (b.kind == BlockKind::nonneg) { s.pos[k] = s.L; s.L += b.dim; }
    else { s.pos[k] = static_cast<int>(s.nb.size()); s.nb.push_back(b.dim); }
  }
  for (size_t i = 0; i < p.equalities.size(); ++i) {
    double mx = 0;
    for (auto& t : p.equalities[i].terms) mx = std::max(mx, std::abs(t.coef));
    if (mx > 0) s.kept.push_back(static_cast<int>(i));
    else if (std::abs(p.equalities[i].rhs) > 1e-12)
      throw std::domain_error("equality " + std::to_string(i) + " reads 0 = " + std::to_string(p.equalities[i].rhs));
  }
  s.m = static_cast<int>(s.kept.size());
  s.rows.resize(s.nb.size());
  s.Af = MatrixXd::Zero(s.m, s.F);
  s.rowsL.resize(s.m);
  s.b.resize(s.m);
  s.row_scale.resize(s.m);
  for (int i = 0; i < s.m; ++i) {
    auto& c = p.equalities[s.kept[i]];
    double mx = 0;
    for (auto& t : c.terms) mx = std::max(mx, std::abs(t.coef));
    double sc = 1.0 / mx;
    s.row_scale[i] = sc;
    s.b[i] = c.rhs * sc;
    std::vector<std::vector<Entry>> per(s.nb.size());
    for (auto& t : c.terms) {
      auto& blk = p.blocks[t.block];
      double a = t.coef * sc;
      if (blk.kind == BlockKind::free) s.Af(i, s.pos[t.block] + t.row) += a;
      else if (blk.kind == BlockKind::nonneg) s.rowsL[i].push_back({s.pos[t.block] + t.row, a});
      else {
        auto& v = per[s.pos[t.block]];
        if (t.row == t.col) v.push_back({t.row, t.row, a});
        else {
          v.push_back({t.row, t.col, 0.5 * a});
          v.push_back({t.col, t.row, 0.5 * a});
        }
      }
    }
    for (size_t k = 0; k < per.size(); ++k)
      if (!per[k].empty()) s.rows[k].push_back({i, std::move(per[k])});
  }
  s.cF = VectorXd::Zero(s.F);
  s.cL = VectorXd::Zero(s.L);
  for (int d : s.nb) s.C.push_back(MatrixXd::Zero(d, d));
  double mx = 0;
  for (auto& t : p.objective) mx = std::max(mx, std::abs(t.coef));
  s.obj_scale = mx > 0 ? 1.0 / mx : 1.0;
  for (auto& t : p.objective) {
    auto& blk = p.blocks[t.block];
    double a = t.coef * s.obj_scale;
    if (blk.kind == BlockKind::free) s.cF[s.pos[t.block] + t.row] += a;
    else if (blk.kind == BlockKind::nonneg) s.cL[s.pos[t.block] + t.row] += a;
    else {
      auto& C = s.C[s.pos[t.block]];
      if (t.row == t.col) C(t.row, t.row) += a;
      else {
        C(t.row, t.col) += 0.5 * a;
        C(t.col, t.row) += 0.5 * a;
      }
    }
  }
  return s;
}

struct Iterate {
  std::vector<MatrixXd> X, Z;
  VectorXd xl, zl, xf, y;
};

// A(X) + A_l x_l + A_f x_f
VectorXd apply_A(const StandardForm& s, const std::vector<MatrixXd>& X, const VectorXd& xl, const VectorXd& xf) {
  VectorXd r = s.F ? VectorXd(s.Af * xf) : VectorXd::Zero(s.m);
  for (size_t k = 0; k < s.nb.size(); ++k)
    for (auto& row : s.rows[k]) {
      double acc = 0;
      for (auto& e : row.e) acc += e.a * X[k](e.p, e.q);
      r[row.con] += acc;
    }
  for (int i = 0; i < s.m; ++i)
    for (auto& [j, a] : s.rowsL[i]) r[i] += a * xl[j];
  return r;
}

MatrixXd apply_At_block(const StandardForm& s, int k, const VectorXd& y) {
  MatrixXd S = MatrixXd::Zero(s.nb[k], s.nb[k]);
  for (auto& row : s.rows[k]) {
    double yi = y[row.con];
    if (yi == 0) continue;
    for (auto& e : row.e) S(e.p, e.q) += yi * e.a;
  }
  return S;
}

VectorXd apply_At_lp(const StandardForm& s, const VectorXd& y) {
  VectorXd r = VectorXd::Zero(s.L);
  for (int i = 0; i < s.m; ++i)
    for (auto& [j, a] : s.rowsL[i]) r[j] += a * y[i];
  return r;
}

double max_step_psd(const MatrixXd& X, const MatrixXd& dX) {
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd Li = llt.matrixL().solve(MatrixXd::Identity(X.rows(), X.cols()));
  MatrixXd W = Li * dX * Li.transpose();
  W = 0.5 * (W + W.transpose());
  double lmin = Eigen::SelfAdjointEigenSolver<MatrixXd>(W, Eigen::EigenvaluesOnly).eigenvalues()[0];
  return lmin >= 0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

double max_step_lp(const VectorXd& x, const VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i)
    if (dx[i] < 0) a = std::min(a, -x[i] / dx[i]);
  return a;
}

double inner(const MatrixXd& a, const MatrixXd& b) { return a.cwiseProduct(b).sum(); }

struct Direction {
  std::vector<MatrixXd> dX, dZ;
  VectorXd dxl, dzl, dxf, dy;
};

}  // namespace

SdpSolution InteriorPointBackend::solve(const SdpProblem& prob, const SdpSettings& set) const {
  prob.validate();
  SdpSolution sol;
  StandardForm s;
  try {
    s = standardize(prob);
  } catch (const std::domain_error& e) {
    sol.status = SdpStatus::infeasible;
    sol.message = e.what();
    return sol;
  }
  const int m = s.m, F = s.F, L = s.L, K = static_cast<int>(s.nb.size());
  double nu = L;
  for (int d : s.nb) nu += d;

  double bnorm = s.b.norm();
  double cnorm = std::sqrt(s.cF.squaredNorm() + s.cL.squaredNorm());
  for (auto& C : s.C) cnorm = std::hypot(cnorm, C.norm());

  Iterate it;
  double bmax = s.b.size() ? s.b.cwiseAbs().maxCoeff() : 0.0;
  for (int k = 0; k < K; ++k) {
    double d = s.nb[k];
    double xi = std::max({10.0, std::sqrt(d), bmax});
    double zeta = std::max({10.0, std::sqrt(d), s.C[k].norm()});
    it.X.push_back(xi * MatrixXd::Identity(s.nb[k], s.nb[k]));
    it.Z.push_back(zeta * MatrixXd::Identity(s.nb[k], s.nb[k]));
  }
  it.xl = VectorXd::Constant(L, std::max(10.0, bmax));
  it.zl = VectorXd::Constant(L, std::max(10.0, s.cL.size() ? s.cL.cwiseAbs().maxCoeff() : 0.0));
  it.xf = VectorXd::Zero(F);
  it.y = VectorXd::Zero(m);

  auto finish = [&](SdpStatus st, const std::string& msg) {
    sol.status = st;
    sol.message = msg;
    sol.values.resize(prob.blocks.size());
    for (size_t k = 0; k < prob.blocks.size(); ++k) {
      auto& blk = prob.blocks[k];
      if (blk.kind == BlockKind::free) sol.values[k] = it.xf.segment(s.pos[k], blk.dim);
      else if (blk.kind == BlockKind::nonneg) sol.values[k] = it.xl.segment(s.pos[k], blk.dim);
      else sol.values[k] = it.X[s.pos[k]];
    }
    sol.y = VectorXd::Zero(prob.equalities.size());
    for (int i = 0; i < m; ++i) sol.y[s.kept[i]] = it.y[i] * s.row_scale[i] / s.obj_scale;
    // unscaled residual and objective, recomputed from the problem data
    double res = 0;
    for (auto& c : prob.equalities) {
      double acc = -c.rhs;
      for (auto& t : c.terms) acc += t.coef * sol.values[t.block](t.row, t.col);
      res = std::max(res, std::abs(acc));
    }
    sol.primal_residual = res;
    double pobj = prob.objective_offset;
    for (auto& t : prob.objective) pobj += t.coef * sol.values[t.block](t.row, t.col);
    sol.primal_objective = pobj;
    double dobj = prob.objective_offset;
    for (size_t i = 0; i < prob.equalities.size(); ++i) dobj += sol.y[i] * prob.equalities[i].rhs;
    sol.dual_objective = dobj;
    double me = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < prob.blocks.size(); ++k)
      if (prob.blocks[k].kind == BlockKind::psd) {
        MatrixXd V = sol.values[k];
        me = std::min(me, Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (V + V.transpose()), Eigen::EigenvaluesOnly)
                              .eigenvalues()[0]);
      } else if (prob.blocks[k].kind == BlockKind::nonneg && sol.values[k].size()) {
        me = std::min(me, sol.values[k].minCoeff());
      }
    sol.min_psd_eigenvalue = std::isfinite(me) ? me : 0.0;
    if (sol.ok() && sol.min_psd_eigenvalue < -set.eig_tol) {
      sol.status = SdpStatus::numerical_failure;
      sol.message = "returned point fails the eigenvalue re-check";
    }
    return sol;
  };

  std::vector<MatrixXd> Zinv(K);
  MatrixXd Mat(m, m);
  Iterate best;
  double best_merit = std::numeric_limits<double>::infinity();
  int since_best = 0;
  auto give_up = [&](const std::string& why) {
    if (best_merit <= set.accept_tol) {
      it = best;
      std::ostringstream os;
      os << "stopped at reduced accuracy " << best_merit << " (" << why << ")";
      return finish(prob.has_objective ? SdpStatus::optimal : SdpStatus::feasible, os.str());
    }
    return finish(SdpStatus::numerical_failure, why);
  };

  for (int iter = 0; iter < set.max_iters; ++iter) {
    sol.iterations = iter;
    VectorXd rp = s.b - apply_A(s, it.X, it.xl, it.xf);
    std::vector<MatrixXd> Rd(K);
    double dres2 = 0;
    for (int k = 0; k < K; ++k) {
      Rd[k] = s.C[k] - apply_At_block(s, k, it.y) - it.Z[k];
      dres2 += Rd[k].squaredNorm();
    }
    VectorXd rdl = s.cL - apply_At_lp(s, it.y) - it.zl;
    VectorXd rdf = s.F ? VectorXd(s.cF - s.Af.transpose() * it.y) : VectorXd();
    dres2 += rdl.squaredNorm() + (F ? rdf.squaredNorm() : 0.0);

    double comp = it.xl.dot(it.zl);
    for (int k = 0; k < K; ++k) comp += inner(it.X[k], it.Z[k]);
    double mu = comp / std::max(nu, 1.0);
    double pobj = s.cL.dot(it.xl) + (F ? s.cF.dot(it.xf) : 0.0);
    for (int k = 0; k < K; ++k) pobj += inner(s.C[k], it.X[k]);
    double dobj = s.b.dot(it.y);

    double relp = rp.norm() / (1 + bnorm);
    double reld = std::sqrt(dres2) / (1 + cnorm);
    double relg = std::abs(comp) / (1 + std::abs(pobj) + std::abs(dobj));
    sol.gap = relg;
    sol.dual_residual = reld;
    if (set.verbose)
      std::fprintf(stderr, "%3d pobj %+.8e dobj %+.8e relp %.2e reld %.2e gap %.2e mu %.2e\n", iter, pobj, dobj, relp,
                   reld, relg, mu);

    if (!prob.has_objective && relp <= set.feas_tol) return finish(SdpStatus::feasible, "primal feasible point found");
    if (relp <= set.feas_tol && reld <= set.feas_tol && relg <= set.gap_tol)
      return finish(prob.has_objective ? SdpStatus::optimal : SdpStatus::feasible, "converged");
    double merit = prob.has_objective ? std::max({relp, reld, relg}) : relp;
    if (merit < best_merit) {
      best_merit = merit;
      best = it;
      since_best = 0;
    } else if (++since_best >= set.stall_iters && best_merit <= set.accept_tol) {
      return give_up("no progress");
    }

    // primal infeasibility: y with b'y > 0, A'y <= 0, Af'y = 0
    if (dobj > 0) {
      VectorXd yh = it.y / dobj;
      double viol = 0;
      for (int k = 0; k < K; ++k) {
        MatrixXd S = apply_At_block(s, k, yh);
        viol = std::max(viol, Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .maxCoeff());
      }
      if (L) viol = std::max(viol, apply_At_lp(s, yh).maxCoeff());
      if (F) viol = std::max(viol, (s.Af.transpose() * yh).cwiseAbs().maxCoeff());
      if (viol <= set.cert_tol || dobj > set.divergence * (1 + cnorm)) {
        std::ostringstream os;
        os << "primal infeasible: certificate b'y = 1, max violation " << viol;
        return finish(SdpStatus::infeasible, os.str());
      }
    }
    // dual infeasibility (unbounded primal)
    if (prob.has_objective && pobj < 0) {
      std::vector<MatrixXd> Xh(K);
      for (int k = 0; k < K; ++k) Xh[k] = it.X[k] / -pobj;
      VectorXd r = apply_A(s, Xh, it.xl / -pobj, it.xf / -pobj);
      if (r.norm() <= set.cert_tol * (1 + bnorm) || -pobj > set.divergence * (1 + bnorm)) {
        std::ostringstream os;
        os << "dual infeasible (unbounded objective): ray residual " << r.norm();
        return finish(SdpStatus::unbounded, os.str());
      }
    }

    // Schur complement
    Mat.setZero();
    for (int k = 0; k < K; ++k) {
      Eigen::LLT<MatrixXd> lz(it.Z[k]);
      Zinv[k] = lz.solve(MatrixXd::Identity(s.nb[k], s.nb[k]));
      Zinv[k] = 0.5 * (Zinv[k] + Zinv[k].transpose());
      const MatrixXd& X = it.X[k];
      const MatrixXd& Zi = Zinv[k];
      MatrixXd T(s.nb[k], s.nb[k]);
      for (auto& rj : s.rows[k]) {
        T.setZero();
        for (auto& e : rj.e) T.noalias() += e.a * X.col(e.p) * Zi.row(e.q);
        for (auto& ri : s.rows[k]) {
          if (ri.con > rj.con) continue;
          double acc = 0;
          for (auto& e : ri.e) acc += e.a * T(e.q, e.p);
          Mat(ri.con, rj.con) += acc;
        }
      }
    }
    if (L) {
      VectorXd d = it.xl.cwiseQuotient(it.zl);
      // sparse rank-one accumulation over LP columns
      std::vector<std::vector<std::pair<int, double>>> cols(L);
      for (int i = 0; i < m; ++i)
        for (auto& [j, a] : s.rowsL[i]) cols[j].push_back({i, a});
      for (int j = 0; j < L; ++j)
        for (auto& [i1, a1] : cols[j])
          for (auto& [i2, a2] : cols[j])
            if (i1 <= i2) Mat(i1, i2) += d[j] * a1 * a2;
    }
    Mat.triangularView<Eigen::StrictlyLower>() = Mat.transpose().triangularView<Eigen::StrictlyLower>();

    Eigen::LLT<MatrixXd> chol;
    double reg = 0;
    double dmax = m ? Mat.diagonal().cwiseAbs().maxCoeff() : 1.0;
    for (int tries = 0; tries < 12; ++tries) {
      if (reg > 0) Mat.diagonal().array() += reg;
      chol.compute(Mat);
      if (chol.info() == Eigen::Success) break;
      if (reg > 0) Mat.diagonal().array() -= reg;
      reg = reg == 0 ? 1e-14 * std::max(dmax, 1.0) : reg * 100;
    }
    if (chol.info() != Eigen::Success) return give_up("Schur complement factorisation failed");
    // with a regularised factor, refine against the true matrix
    auto msolve = [&](const auto& r) {
      using R = std::decay_t<decltype(r)>;
      R h = chol.solve(r);
      if (reg == 0) return h;
      for (int pass = 0; pass < 4; ++pass) {
        R res = r - Mat * h;
        res += reg * h;
        h += chol.solve(res);
      }
      return h;
    };

    // free variables: Sf = Af' M^-1 Af; without regularisation one triangular solve suffices
    MatrixXd Wf, Sf;
    Eigen::LDLT<MatrixXd> sf_fact;
    if (F) {
      if (reg == 0) {
        MatrixXd G = chol.matrixL().solve(s.Af);
        Sf = MatrixXd::Zero(F, F);
        Sf.selfadjointView<Eigen::Lower>().rankUpdate(G.transpose());
        Sf = Sf.selfadjointView<Eigen::Lower>();
      } else {
        Wf = msolve(s.Af);
        Sf = s.Af.transpose() * Wf;
        Sf = 0.5 * (Sf + Sf.transpose());
      }
      Sf.diagonal().array() += 1e-14 * std::max(1.0, Sf.diagonal().cwiseAbs().maxCoeff());
      sf_fact.compute(Sf);
    }

    auto direction = [&](double sigma_mu, const Direction* corr) {
      Direction d;
      // right-hand side
      VectorXd r1 = rp;
      std::vector<MatrixXd> base(K);
      for (int k = 0; k < K; ++k) {
        MatrixXd XRZ = it.X[k] * Rd[k] * Zinv[k];
        base[k] = sigma_mu * Zinv[k] - it.X[k] - 0.5 * (XRZ + XRZ.transpose());
        if (corr) {
          MatrixXd cc = corr->dX[k] * corr->dZ[k] * Zinv[k];
          base[k] -= 0.5 * (cc + cc.transpose());
        }
      }
      VectorXd baseL(L);
      for (int j = 0; j < L; ++j) {
        baseL[j] = sigma_mu / it.zl[j] - it.xl[j] - it.xl[j] * rdl[j] / it.zl[j];
        if (corr) baseL[j] -= corr->dxl[j] * corr->dzl[j] / it.zl[j];
      }
      r1 -= apply_A(s, base, baseL, VectorXd::Zero(F));
      VectorXd h = msolve(r1);
      if (F) {
        d.dxf = sf_fact.solve(s.Af.transpose() * h - rdf);
        d.dy = Wf.size() ? VectorXd(h - Wf * d.dxf) : VectorXd(h - msolve(VectorXd(s.Af * d.dxf)));
      } else {
        d.dxf = VectorXd();
        d.dy = h;
      }
      d.dX.resize(K);
      d.dZ.resize(K);
      for (int k = 0; k < K; ++k) {
        d.dZ[k] = Rd[k] - apply_At_block(s, k, d.dy);
        MatrixXd XdZ = it.X[k] * d.dZ[k] * Zinv[k];
        MatrixXd XRZ = it.X[k] * Rd[k] * Zinv[k];
        d.dX[k] = base[k] + 0.5 * (XRZ + XRZ.transpose()) - 0.5 * (XdZ + XdZ.transpose());
      }
      d.dzl = rdl - apply_At_lp(s, d.dy);
      d.dxl.resize(L);
      for (int j = 0; j < L; ++j) d.dxl[j] = baseL[j] + it.xl[j] * rdl[j] / it.zl[j] - it.xl[j] * d.dzl[j] / it.zl[j];
      return d;
    };

    auto steps = [&](const Direction& d, double& ap, double& ad) {
      ap = max_step_lp(it.xl, d.dxl);
      ad = max_step_lp(it.zl, d.dzl);
      for (int k = 0; k < K; ++k) {
        ap = std::min(ap, max_step_psd(it.X[k], d.dX[k]));
        ad = std::min(ad, max_step_psd(it.Z[k], d.dZ[k]));
      }
    };

    Direction pred = direction(0.0, nullptr);
    double ap, ad;
    steps(pred, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double comp_aff = 0;
    for (int k = 0; k < K; ++k) comp_aff += inner(it.X[k] + ap * pred.dX[k], it.Z[k] + ad * pred.dZ[k]);
    comp_aff += (it.xl + ap * pred.dxl).dot(it.zl + ad * pred.dzl);
    double sigma = std::pow(std::max(0.0, comp_aff) / std::max(comp, 1e-300), 3);
    sigma = std::clamp(sigma, 0.0, 1.0);
    // do not let complementarity run ahead of feasibility
    if (relg < 1e-2 * std::max(relp, reld)) sigma = std::max(sigma, 0.5);

    Direction dir = direction(sigma * mu, &pred);
    steps(dir, ap, ad);
    ap = std::min(1.0, set.step_frac * ap);
    ad = std::min(1.0, set.step_frac * ad);
    if (set.verbose) std::fprintf(stderr, "    sigma %.2e ap %.2e ad %.2e reg %.1e\n", sigma, ap, ad, reg);

    for (int k = 0; k < K; ++k) {
      it.X[k] += ap * dir.dX[k];
      it.Z[k] += ad * dir.dZ[k];
      it.X[k] = 0.5 * (it.X[k] + it.X[k].transpose());
      it.Z[k] = 0.5 * (it.Z[k] + it.Z[k].transpose());
    }
    it.xl += ap * dir.dxl;
    it.zl += ad * dir.dzl;
    if (F) it.xf += ap * dir.dxf;
    it.y += ad * dir.dy;
  }
  std::ostringstream os;
  os << "no convergence in " << set.max_iters << " iterations";
  return give_up(os.str());
}

void write_sdpa(const SdpProblem& p, std::ostream& os) {
  // free variables become two nonneg parts; all vector blocks go into one LP block
  int lp = 0;
  std::vector<int> lpos(p.blocks.size(), -1), spos(p.blocks.size(), -1);
  std::vector<int> sdims;
  for (size_t k = 0; k < p.blocks.size(); ++k) {
    auto& b = p.blocks[k];
    if (b.kind == BlockKind::psd) {
      spos[k] = static_cast<int>(sdims.size()) + 1;
      sdims.push_back(b.dim);
    } else {
      lpos[k] = lp;
      lp += b.kind == BlockKind::free ? 2 * b.dim : b.dim;
    }
  }
  int lpblock = static_cast<int>(sdims.size()) + 1;
  os.precision(17);
  os << p.equalities.size() << "\n" << sdims.size() + (lp ? 1 : 0) << "\n";
  for (int d : sdims) os << d << ' ';
  if (lp) os << -lp;
  os << "\n";
  for (auto& c : p.equalities) os << c.rhs << ' ';
  os << "\n";
  // SDPA maximises tr(F0 Y) in the dual of min c'x; the primal here maps to the
  // SDPA dual form: objective matrix F0 = C, constraint matrices F_i = A_i
  auto emit = [&](int mat, const Term& t, double sign) {
    auto& b = p.blocks[t.block];
    if (b.kind == BlockKind::psd) {
      double v = t.row == t.col ? t.coef : 0.5 * t.coef;
      os << mat << ' ' << spos[t.block] << ' ' << t.row + 1 << ' ' << t.col + 1 << ' ' << sign * v << "\n";
    } else if (b.kind == BlockKind::nonneg) {
      int j = lpos[t.block] + t.row + 1;
      os << mat << ' ' << lpblock << ' ' << j << ' ' << j << ' ' << sign * t.coef << "\n";
    } else {
      int j = lpos[t.block] + 2 * t.row + 1;
      os << mat << ' ' << lpblock << ' ' << j << ' ' << j << ' ' << sign * t.coef << "\n";
      os << mat << ' ' << lpblock << ' ' << j + 1 << ' ' << j + 1 << ' ' << -sign * t.coef << "\n";
    }
  };
  for (auto& t : p.objective) emit(0, t, 1.0);
  for (size_t i = 0; i < p.equalities.size(); ++i)
    for (auto& t : p.equalities[i].terms) emit(static_cast<int>(i) + 1, t, 1.0);
}

SdpSolution ExternalCommandBackend::solve(const SdpProblem& p, const SdpSettings&) const {
  p.validate();
  std::string base = "/tmp/barrierforge_ext_" + std::to_string(std::hash<std::string>{}(command_)) + "_" +
                     std::to_string(reinterpret_cast<std::uintptr_t>(&p));
  std::string in = base + ".dat-s", out = base + ".sol";
  {
    std::ofstream f(in);
    write_sdpa(p, f);
  }
  std::string cmd = command_ + " " + in + " " + out + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  SdpSolution sol;
  std::ifstream f(out);
  if (!f) {
    sol.status = SdpStatus::numerical_failure;
    sol.message = "external solver produced no solution file (exit " + std::to_string(rc) + ")";
    return sol;
  }
  // CSDP solution: first line y, then "2 block i j value" lines for the primal X
  sol.y = VectorXd::Zero(p.equalities.size());
  for (size_t i = 0; i < p.equalities.size(); ++i) f >> sol.y[i];
  int lp = 0;
  std::vector<int> lpos(p.blocks.size(), -1), spos(p.blocks.size(), -1);
  int ns = 0;
  for (size_t k = 0; k < p.blocks.size(); ++k) {
    if (p.blocks[k].kind == BlockKind::psd) spos[k] = ++ns;
    else {
      lpos[k] = lp;
      lp += p.blocks[k].kind == BlockKind::free ? 2 * p.blocks[k].dim : p.blocks[k].dim;
    }
  }
  VectorXd lpv = VectorXd::Zero(lp);
  std::vector<MatrixXd> S;
  for (auto& b : p.blocks)
    if (b.kind == BlockKind::psd) S.push_back(MatrixXd::Zero(b.dim, b.dim));
  int mat, blk, i, j;
  double v;
  while (f >> mat >> blk >> i >> j >> v) {
    if (mat != 2) continue;
    if (blk == ns + 1) lpv[i - 1] = v;
    else {
      S[blk - 1](i - 1, j - 1) = v;
      S[blk - 1](j - 1, i - 1) = v;
    }
  }
  sol.values.resize(p.blocks.size());
  for (size_t k = 0; k < p.blocks.size(); ++k) {
    auto& b = p.blocks[k];
    if (b.kind == BlockKind::psd) sol.values[k] = S[spos[k] - 1];
    else if (b.kind == BlockKind::nonneg) sol.values[k] = lpv.segment(lpos[k], b.dim);
    else {
      VectorXd x(b.dim);
      for (int r = 0; r < b.dim; ++r) x[r] = lpv[lpos[k] + 2 * r] - lpv[lpos[k] + 2 * r + 1];
      sol.values[k] = x;
    }
  }
  double res = 0;
  for (auto& c : p.equalities) {
    double acc = -c.rhs;
    for (auto& t : c.terms) acc += t.coef * sol.values[t.block](t.row, t.col);
    res = std::max(res, std::abs(acc));
  }
  sol.primal_residual = res;
  double pobj = p.objective_offset;
  for (auto& t : p.objective) pobj += t.coef * sol.values[t.block](t.row, t.col);
  sol.primal_objective = pobj;
  sol.status = rc == 0 ? (p.has_objective ? SdpStatus::optimal : SdpStatus::feasible) : SdpStatus::numerical_failure;
  std::remove(in.c_str());
  std::remove(out.c_str());
  return sol;
}

SdpSolution solve(const SdpProblem& p, const SdpSettings& s) { return InteriorPointBackend{}.solve(p, s); }

EigResult lanczos_max(const LinearOperator& op, int dim, double tol, std::uint64_t seed, int max_iters) {
  if (dim < 1) throw std::invalid_argument("operator dimension must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G(0.0, 1.0);
  auto rnd = [&] {
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = G(rng);
    return v;
  };
  {
    VectorXd a = rnd(), b = rnd();
    double l = a.dot(op(b)), r = op(a).dot(b);
    if (std::abs(l - r) > 1e-10 * std::max(1.0, std::abs(l) + std::abs(r)))
      throw std::invalid_argument("operator failed the symmetry probe");
  }
  int kmax = max_iters > 0 ? std::min(max_iters, dim) : std::min(dim, 600);
  std::vector<VectorXd> V;
  std::vector<double> alpha, beta;
  VectorXd v = rnd();
  v.normalize();
  V.push_back(v);
  EigResult res;
  for (int j = 0; j < kmax; ++j) {
    VectorXd w = op(V[j]);
    double a = V[j].dot(w);
    alpha.push_back(a);
    w -= a * V[j];
    if (j > 0) w -= beta[j - 1] * V[j - 1];
    // full reorthogonalisation, twice
    for (int pass = 0; pass < 2; ++pass)
      for (auto& q : V) w -= q.dot(w) * q;
    double b = w.norm();
    int k = j + 1;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es;
    VectorXd diag = Eigen::Map<VectorXd>(alpha.data(), k);
    VectorXd sub = k > 1 ? VectorXd(Eigen::Map<VectorXd>(beta.data(), k - 1)) : VectorXd(0);
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    double theta = es.eigenvalues()[k - 1];
    double resid = std::abs(b * es.eigenvectors()(k - 1, k - 1));
    res.value = theta;
    res.residual = resid;
    res.iterations = k;
    double scale = std::max(1.0, std::abs(theta));
    if (resid <= tol * scale || b <= 1e-14 * scale || k == dim) {
      res.converged = true;
      return res;
    }
    beta.push_back(b);
    V.push_back(w / b);
  }
  return res;
}

double lambda_max_structured(const LinearOperator& op, int dim, double tol, std::uint64_t seed) {
  {
    // symmetry probe: u'(Av) == v'(Au)
    std::mt19937_64 rng(seed ^ 0x5bd1e995u);
    std::normal_distribution<double> g;
    for (int probe = 0; probe < 3; ++probe) {
      VectorXd u(dim), v(dim);
      for (int i = 0; i < dim; ++i) {
        u[i] = g(rng);
        v[i] = g(rng);
      }
      VectorXd Av = op(v), Au = op(u);
      double scale = std::max(1.0, Av.norm() * u.norm() + Au.norm() * v.norm());
      if (std::abs(u.dot(Av) - v.dot(Au)) > 1e-10 * scale)
        throw std::invalid_argument("operator failed the symmetry probe");
    }
  }
  auto r = lanczos_max(op, dim, tol, seed);
  if (!r.converged) throw std::runtime_error("Lanczos did not converge to the requested tolerance");
  return r.value;
}

}  // namespace barrierforge
