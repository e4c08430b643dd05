#pragma once

#include <utility>

#include "dmcv/fock_ops.hpp"

namespace dmcv {

/// Standard-form SDP over complex Hermitian matrices:
///   min Tr[C X]  s.t.  Tr[A_i X] = b_i,  X >= 0.
struct SdpProblem {
  Matrix objective;                  // C
  std::vector<Matrix> constraints;   // A_i
  RealVector rhs;                    // b
  int dim = 0;

  void validate() const;  // Hermiticity within 1e-12, shape agreement
};

enum class SdpStatus { optimal, max_iter, infeasible };

struct SdpSolution {
  Matrix primal;       // X
  RealVector dual;     // y (eliminated dependent constraints report 0)
  Matrix slack;        // C - sum_i y_i A_i
  double gap = 0.0;           // |Tr[C X] - b.y|
  double max_residual = 0.0;  // max_i |Tr[A_i X] - b_i|
  double primal_value = 0.0;
  double dual_value = 0.0;
  int iterations = 0;
  SdpStatus status = SdpStatus::max_iter;
};

// Primal-dual path-following solve (HKM direction, Mehrotra corrector) on the
// real symmetric embedding.  Deterministic for identical inputs.
SdpSolution solve_primal_dual(const SdpProblem& problem, double tol = 1e-9);

// Strictly feasible density matrix maximizing the smallest eigenvalue, via the
// auxiliary SDP over diag(Y, s, u) with X = Y + (s - u) 1.  The unit-trace
// constraint is appended, so inconsistent statistics (e.g. probabilities not
// summing to 1) surface as an infeasible-statistics error.
// Throws std::runtime_error if the best lambda_min is <= 1e-10.
Matrix feasibility_point(const std::vector<Matrix>& constraints, const RealVector& rhs,
                         double* lambda_min_out = nullptr);

// lambda_min of the dual slack  gradient - sum_i nu_i A_i  and whether it
// certifies feasibility (lambda_min >= 0).
std::pair<double, bool> verify_dual_certificate(const Matrix& gradient,
                                                const std::vector<Matrix>& ops,
                                                const RealVector& nu);

// Shifts every one of the first n_pe components of nu down by |lambda_min|.
// Because the PE operators sum to the identity this adds |lambda_min| * 1 to
// the slack, restoring positive semidefiniteness.  No-op for lambda_min >= 0.
RealVector repair_certificate(const RealVector& nu, double lambda_min, int n_pe);

// max(constraint residuals of the solution, Hermiticity residuals, 1e-12).
double epsilon_prime(const SdpProblem& problem, const SdpSolution& solution);

}  // namespace dmcv
