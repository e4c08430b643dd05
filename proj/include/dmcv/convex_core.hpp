#pragma once

#include <utility>

#include "dmcv/fock_ops.hpp"
#include "dmcv/honest_model.hpp"
#include "dmcv/sdp.hpp"

namespace dmcv {

/// Reduced objective machinery for r(rho) = H(Z~(rho)) - H(G~(rho)) in bits,
/// where G~ and Z~ are the postprocessing map and its key-pinched composition
/// restricted (facially reduced) to the supports they reach from the
/// maximally mixed probe.  All gradients use the plain Frobenius pairing:
/// d/dt r(rho + t Delta) = Tr[Delta * gradient_r(rho)].
struct ObjectiveContext {
  ModulationScheme scheme;
  KrausMap g_reduced;                 // G~ : in_dim -> g_rank
  KrausMap z_reduced;                 // Z~ = (Z o G)~ : in_dim -> z_rank
  Matrix g_isometry;                  // columns span supp G(1/d)
  Matrix z_isometry;                  // columns span supp Z(G(1/d))
  int in_dim = 0;                     // 4 * cutoff
};

// Support isometry U of map(probe) (eigenvalues > 1e-10 * lambda_max) and the
// reduced map rho -> U^dag map(rho) U with Kraus ops U^dag K_k.
// Throws std::runtime_error("degenerate-support...") if the rank is 0.
std::pair<KrausMap, Matrix> facial_reduction(const KrausMap& map, const Matrix& probe);

ObjectiveContext make_objective_context(const ModulationScheme& scheme);

// Relative entropy objective in bits; >= -1e-9 for any density matrix.
// Throws std::invalid_argument on non-PSD or non-unit-trace input.
double objective_r(const Matrix& rho, const ObjectiveContext& ctx);

// Hermitian Frechet derivative M with r(rho + t Delta) = r + t Tr[Delta M]
// + O(t^2).  rho is mixed with 1e-12 * I/d first so the logarithms stay
// finite; throws std::runtime_error("singular-input...") if a reduced image
// is still numerically singular.
Matrix gradient_r(const Matrix& rho, const ObjectiveContext& ctx);

struct FwStep {
  Matrix delta;          // sigma* - rho, traceless
  Matrix gradient;       // gradient_r(rho)
  SdpSolution solution;  // the linearized SDP solve
};

// Linearized step: minimize Tr[sigma gradient_r(rho)] over the feasible set.
FwStep fw_step(const Matrix& rho, const ObjectiveContext& ctx,
               const std::vector<Matrix>& constraint_ops, const RealVector& rhs,
               double tol = 1e-9);

// kappa in [0, 1] minimizing r(rho + kappa delta) to absolute tolerance 1e-6;
// never increases the objective (returns 0 if no improvement is found).
double line_search(const Matrix& rho, const Matrix& delta, const ObjectiveContext& ctx);

/// Affine lower-bound certificate: for every feasible state sigma,
///   r(sigma) >= g0 + sum nu_pe . stats_pe + sum nu_tom . stats_tom - slack,
/// with the dual slack matrix PSD up to eps_prime bookkeeping.
struct DualCertificate {
  ModulationScheme scheme;
  HonestChannel channel;   // filled by drivers that know the channel
  RealMatrix nu_pe;        // 4 x m
  RealVector nu_tom;       // 16
  double g0 = 0.0;         // r(rho~) - Tr[rho~ grad]
  double eps_prime = 0.0;
  double primal_ub = 0.0;  // r at the iterate that produced the certificate
  double lower_bound = 0.0;
  double lambda_min = 0.0; // dual slack lambda_min after repair
  int sdp_iterations = 0;
  double sdp_residual = 0.0;

  RealVector nu_flat() const;  // pe row-major (x-major) then tom
};

// Certified lower bound on min r over {Tr[A_i X] = b_i, X >= 0}: solves the
// linearized dual at rho, repairs it to exact feasibility, and subtracts
// eps' * sum|nu|.  eps_prime_floor is folded into the solver residuals.
std::pair<double, DualCertificate> taylor_lower_bound(
    const Matrix& rho, const ObjectiveContext& ctx,
    const std::vector<Matrix>& constraint_ops, const RealVector& rhs,
    double eps_prime_floor = 1e-12);

struct FwOptions {
  int max_iter = 300;
  double gap = 0.02;        // relative duality gap stopping threshold
  int lb_cadence = 15;      // iterations between lower-bound evaluations
  double sdp_tol = 1e-9;
  double eps_prime_floor = 1e-12;
};

struct FwIterate {
  int iteration = 0;
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  bool has_lower = false;
  double kappa = 0.0;
};

struct FwTrace {
  std::vector<FwIterate> iterates;
  bool converged = false;
  double final_gap = 0.0;
};

struct FwResult {
  Matrix rho;
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  FwTrace trace;
  DualCertificate certificate;  // best lower bound found
};

// Frank-Wolfe minimization of r over the constrained set, starting from
// feasibility_point; stops at relative gap < opts.gap or opts.max_iter.
FwResult frank_wolfe(const ObjectiveContext& ctx,
                     const std::vector<Matrix>& constraint_ops,
                     const RealVector& rhs, const FwOptions& opts = {});

// rhs vector matching constraint_operators order: pe x-major then 16 tom.
RealVector constraint_rhs(const HonestStatistics& stats);

}  // namespace dmcv
