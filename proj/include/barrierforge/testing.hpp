#pragma once

// Simulator-side access to hidden plant data. Only tests and the ground-truth
// verifier include this header.

#include "barrierforge/models.hpp"

namespace barrierforge {

struct PlantAccess {
  static const MatrixXd& A(const SubsystemModel& m) { return m.A_; }
  static const MatrixXd& B(const SubsystemModel& m) { return m.B_; }
};

}  // namespace barrierforge
