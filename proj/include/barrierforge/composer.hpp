#pragma once

#include "barrierforge/certsynth.hpp"

namespace barrierforge {

struct SupplyRate {
  MatrixXd Z11, Z12, Z21, Z22;
  static SupplyRate of(const StorageCertificate& c) { return {c.Z11, c.Z12, c.Z21, c.Z22}; }
};

// block-diagonal arrangement acting on the stacked [w; x]
class ZComp {
 public:
  // rates[index[i]] is the supply rate of subsystem i
  ZComp(std::vector<SupplyRate> rates, std::vector<int> index);

  int size() const { return static_cast<int>(index_.size()); }
  int dim() const { return 2 * offsets_.back(); }
  const std::vector<int>& offsets() const { return offsets_; }
  const SupplyRate& rate(int i) const { return rates_[index_[i]]; }

  VectorXd apply(const VectorXd& wx) const;
  MatrixXd dense() const;

 private:
  std::vector<SupplyRate> rates_;
  std::vector<int> index_;
  std::vector<int> offsets_{0};
};

// x -> [M; I]' Zcomp [M; I] x without materialising M
LinearOperator composed_operator(const Topology& top, const ZComp& z);
MatrixXd composed_dense(const Topology& top, const ZComp& z);

struct CompositionCheck {
  bool passes = false;
  double lambda_max = 0;
  bool level_ok = false;
  double level_margin = 0;  // mu - eta
  double psd_tol = 1e-8;
  double eta = 0, mu = 0;
  int iterations = 0;
  double seconds = 0;
};

struct CompositionSettings {
  double psd_tol = 1e-8;
  double lanczos_tol = 1e-10;
  std::uint64_t seed = 1;
};

// certs[index[i]] certifies subsystem i
CompositionCheck check_composition(const Topology& top, const std::vector<StorageCertificate>& certs,
                                   const std::vector<int>& index, const CompositionSettings& set = {});
CompositionCheck check_composition(const Topology& top, const ZComp& z, double eta, double mu,
                                   const CompositionSettings& set = {});

// per-subsystem piece of a CBC: S_i(x) = x'P x and u_i(x)
struct LocalCertificate {
  MatrixXd P;
  PolyMatrix controller;  // m x 1
  double eta = 0, mu = 0, lambda = 0;
};

struct BarrierCertificate {
  std::vector<LocalCertificate> parts;
  std::vector<int> index;
  double eta = 0, mu = 0, lambda = 0;
  CompositionCheck check;

  int size() const { return static_cast<int>(index.size()); }
  const LocalCertificate& part(int i) const { return parts[index[i]]; }
  double value(const Topology& top, const VectorXd& x) const;
  VectorXd input(const Topology& top, const std::vector<int>& input_offsets, const VectorXd& x) const;
};

struct CompositionRefused : std::logic_error {
  using std::logic_error::logic_error;
};

LocalCertificate local_certificate(const StorageCertificate& c);
BarrierCertificate assemble_cbc(const std::vector<StorageCertificate>& certs, const std::vector<int>& index,
                                const CompositionCheck& check);

struct RetryState {
  int attempt = 0;
  int T = 0;
  std::uint64_t seed = 0;
};

struct RetryExhausted : std::runtime_error {
  std::vector<RetryState> attempts;
  RetryExhausted(const std::string& what, std::vector<RetryState> a)
      : std::runtime_error(what), attempts(std::move(a)) {}
};

struct RetryPolicy {
  double growth = 1.25;
  int max_retries = 3;
  // next settings after a failed attempt, or throws RetryExhausted
  RetryState next(const std::vector<RetryState>& history) const;
};

std::uint64_t reseed(std::uint64_t seed, int attempt);

}  // namespace barrierforge
