#pragma once

#include "barrierforge/polyalg.hpp"

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace barrierforge {

struct Box {
  VectorXd lo, hi;

  Box() = default;
  Box(VectorXd l, VectorXd h);
  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const VectorXd& x, double tol = 0.0) const;
  // (x_k - l_k)(u_k - x_k), one per coordinate
  std::vector<Polynomial> quadratic_constraints() const;
  // x_k - l_k and u_k - x_k
  std::vector<Polynomial> facet_constraints() const;
  VectorXd center() const { return 0.5 * (lo + hi); }
};

struct Region {
  std::vector<Box> boxes;

  Region() = default;
  explicit Region(std::vector<Box> b) : boxes(std::move(b)) {}
  static Region cube(int n, double lo, double hi);
  int dim() const { return boxes.empty() ? 0 : boxes.front().dim(); }
  bool empty() const { return boxes.empty(); }
  bool contains(const VectorXd& x, double tol = 0.0) const;
  Box hull() const;
};

enum class TopologyKind { fully, ring, binary, star, line, custom };

std::string to_string(TopologyKind k);
TopologyKind topology_kind_from_string(const std::string& s);

// block (to, from, weight): w_to += weight * x_from
struct CouplingBlock {
  int to, from;
  double weight;
};

class Topology {
 public:
  Topology() = default;
  // blocks must not contain self-loops; dims[i] equal for every coupled pair
  Topology(TopologyKind kind, std::vector<int> dims, std::vector<CouplingBlock> blocks);
  static Topology make(TopologyKind kind, int N, int dim, double weight = 1.0);

  int size() const { return static_cast<int>(dims_.size()); }
  TopologyKind kind() const { return kind_; }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<int>& offsets() const { return offsets_; }
  int total_dim() const { return offsets_.back(); }
  const std::vector<CouplingBlock>& blocks() const { return blocks_; }

  VectorXd matvec(const VectorXd& x) const;
  VectorXd matvec_transpose(const VectorXd& y) const;
  MatrixXd dense() const;

  // the same network with subsystems relabelled: new index of old i is perm[i]
  Topology permuted(const std::vector<int>& perm) const;

 private:
  TopologyKind kind_ = TopologyKind::custom;
  std::vector<int> dims_;
  std::vector<int> offsets_{0};
  std::vector<CouplingBlock> blocks_;
};

// Everything synthesis and verification code may see. The drift and input
// matrices live only in SubsystemModel.
struct SubsystemSpec {
  std::string name;
  int n = 0, m = 0;
  MatrixXd D;
  Dictionary dict;
  PolyMatrix theta;
  Region X, X0, Xa, U, W;
};

class SubsystemModel {
 public:
  SubsystemModel() = default;
  SubsystemModel(SubsystemSpec spec, MatrixXd A, MatrixXd B);

  const SubsystemSpec& spec() const { return spec_; }
  bool hidden() const { return true; }
  VectorXd rhs(const VectorXd& x, const VectorXd& u, const VectorXd& w) const;

  void set_internal_bounds(Region W) { spec_.W = std::move(W); }

 private:
  friend struct PlantAccess;
  SubsystemSpec spec_;
  MatrixXd A_, B_;
};

struct BenchmarkParams {
  std::array<double, 3> inertias{2.0, 1.0, 0.5};
  double u_bound = std::numeric_limits<double>::quiet_NaN();  // NaN: benchmark default
  std::optional<std::vector<std::vector<int>>> dict;  // ordering override
  std::optional<std::vector<int>> theta;              // 0-based divisor per dictionary entry
};

struct NetworkModel {
  std::string benchmark;
  std::vector<SubsystemModel> subsystems;
  Topology topology;

  int total_dim() const { return topology.total_dim(); }
  int total_inputs() const;
  VectorXd rhs(const VectorXd& x, const VectorXd& u) const;
  bool in_unsafe(const VectorXd& x) const;
  // spec of subsystem 0 with W widened to the hull over all subsystems
  SubsystemModel representative() const;
};

const std::vector<std::string>& benchmark_names();
NetworkModel build_benchmark(const std::string& name, int N, const BenchmarkParams& params = {});

// interval image of the neighbour state boxes under the coupling pattern
Region internal_input_bounds(const Topology& top, const std::vector<Region>& X, int i);

}  // namespace barrierforge
