#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace barrierforge {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class BlockKind { free, nonneg, psd };

struct VarBlock {
  std::string name;
  BlockKind kind;
  int dim;
};

// coefficient on one scalar entry of a block; psd entries use row <= col and
// refer to the single scalar X(row,col) = X(col,row)
struct Term {
  int block, row, col;
  double coef;
};

struct LinearConstraint {
  std::vector<Term> terms;
  double rhs = 0.0;
};

struct SdpProblem {
  std::vector<VarBlock> blocks;
  std::vector<LinearConstraint> equalities;
  std::vector<Term> objective;  // minimised
  double objective_offset = 0.0;
  bool has_objective = false;

  int add_block(std::string name, BlockKind kind, int dim);
  int find_block(const std::string& name) const;  // -1 when absent
  long num_scalar_variables() const;
  void validate() const;
  // one line per nonzero: (constraint, var, row, col, value); objective uses constraint -1
  void dump(std::ostream& os) const;
};

enum class SdpStatus { optimal, feasible, infeasible, unbounded, numerical_failure };
std::string to_string(SdpStatus s);

struct SdpSettings {
  int max_iters = 200;
  double feas_tol = 1e-10;
  double gap_tol = 1e-8;
  double eig_tol = 1e-8;
  double step_frac = 0.95;
  double accept_tol = 1e-7;         // a stalled run ends at its best iterate if it is this accurate
  int stall_iters = 5;
  double cert_tol = 1e-8;           // infeasibility certificate residual
  double divergence = 1e10;         // dual objective divergence threshold
  bool verbose = false;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::numerical_failure;
  std::vector<MatrixXd> values;  // per block; free/nonneg blocks as column vectors
  VectorXd y;
  double primal_objective = 0, dual_objective = 0;
  double primal_residual = 0;  // unscaled equality residual, inf-norm
  double dual_residual = 0;
  double gap = 0;
  double min_psd_eigenvalue = 0;  // independent re-check over all psd blocks
  int iterations = 0;
  std::string message;

  bool ok() const { return status == SdpStatus::optimal || status == SdpStatus::feasible; }
  double scalar(int block, int i = 0) const { return values[block](i, 0); }
};

class SdpBackend {
 public:
  virtual ~SdpBackend() = default;
  virtual std::string name() const = 0;
  virtual SdpSolution solve(const SdpProblem& p, const SdpSettings& s) const = 0;
};

class InteriorPointBackend : public SdpBackend {
 public:
  std::string name() const override { return "interior-point"; }
  SdpSolution solve(const SdpProblem& p, const SdpSettings& s) const override;
};

// Writes the problem in SDPA sparse format (free variables split into two
// nonnegative parts), runs `command in.dat-s out.sol`, reads a CSDP-style
// solution file back.
class ExternalCommandBackend : public SdpBackend {
 public:
  explicit ExternalCommandBackend(std::string command) : command_(std::move(command)) {}
  std::string name() const override { return "external:" + command_; }
  SdpSolution solve(const SdpProblem& p, const SdpSettings& s) const override;

 private:
  std::string command_;
};

void write_sdpa(const SdpProblem& p, std::ostream& os);

SdpSolution solve(const SdpProblem& p, const SdpSettings& s = {});

struct EigResult {
  double value = 0;
  double residual = 0;
  int iterations = 0;
  bool converged = false;
};

using LinearOperator = std::function<VectorXd(const VectorXd&)>;

// Largest eigenvalue of a symmetric operator by Lanczos with full
// reorthogonalisation, seeded start vector.
EigResult lanczos_max(const LinearOperator& op, int dim, double tol = 1e-8, std::uint64_t seed = 1,
                      int max_iters = 0);
double lambda_max_structured(const LinearOperator& op, int dim, double tol = 1e-8, std::uint64_t seed = 1);

}  // namespace barrierforge
