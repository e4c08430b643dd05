#include "dmcv/convex_core.hpp"

#include <cmath>
#include <numbers>
#include <tuple>

#include <boost/math/tools/minima.hpp>

namespace dmcv {

namespace {

constexpr double kPerturbation = 1e-12;
constexpr double kLn2 = std::numbers::ln2;

Matrix perturbed(const Matrix& rho) {
  const int d = static_cast<int>(rho.rows());
  return (1.0 - kPerturbation) * rho +
         (kPerturbation / d) * Matrix::Identity(d, d);
}

// Entropy in bits from a PSD matrix; eigenvalues <= 0 contribute 0.
double entropy_bits(const Matrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
  double h = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam > 0.0) h -= lam * std::log2(lam);
  }
  return h;
}

// log2(sigma) + I/ln2, the Frechet-derivative factor of -H in bits.
// Eigenvalues below the eigensolver noise floor are clamped to it; genuinely
// negative ones signal a non-PSD image and throw.
Matrix log2_plus_const(const Matrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  RealVector lam = es.eigenvalues();
  const double lmax = lam.maxCoeff();
  if (lam.minCoeff() < -1e-11 * lmax)
    throw std::runtime_error("singular-input: reduced image has lambda_min " +
                             std::to_string(lam.minCoeff()));
  const double floor = 1e-17 * lmax;
  RealVector f(lam.size());
  for (int i = 0; i < lam.size(); ++i)
    f(i) = std::log2(std::max(lam(i), floor)) + 1.0 / kLn2;
  return es.eigenvectors() * f.asDiagonal().toDenseMatrix().cast<Complex>() *
         es.eigenvectors().adjoint();
}

void check_density(const Matrix& rho) {
  if (std::abs(rho.trace().real() - 1.0) > 1e-9)
    throw std::invalid_argument("rho: trace must be 1 within 1e-9");
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9)
    throw std::invalid_argument("rho: not positive semidefinite (non-psd-input)");
}

double tr_prod(const Matrix& a, const Matrix& b) {
  return (a * b).trace().real();
}

// Clamp solver-tolerance negative eigenvalues and renormalize the trace; the
// induced constraint error stays within the SDP tolerance already booked in
// eps'.
Matrix psd_unit_project(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint().eval()));
  const RealVector lam = es.eigenvalues().cwiseMax(0.0);
  Matrix out = es.eigenvectors() * lam.asDiagonal().toDenseMatrix().cast<Complex>() *
               es.eigenvectors().adjoint();
  return out / out.trace().real();
}

}  // namespace

std::pair<KrausMap, Matrix> facial_reduction(const KrausMap& map, const Matrix& probe) {
  const Matrix image = map.apply(probe);
  Eigen::SelfAdjointEigenSolver<Matrix> es(image);
  const double lmax = es.eigenvalues().maxCoeff();
  const double threshold = 1e-10 * lmax;
  std::vector<int> keep;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > threshold) keep.push_back(i);
  if (keep.empty())
    throw std::runtime_error("degenerate-support: map image has rank 0");
  Matrix u(map.out_dim, keep.size());
  for (std::size_t c = 0; c < keep.size(); ++c)
    u.col(c) = es.eigenvectors().col(keep[c]);
  KrausMap reduced;
  reduced.in_dim = map.in_dim;
  reduced.out_dim = static_cast<int>(keep.size());
  for (const Matrix& k : map.kraus_ops) reduced.kraus_ops.push_back(u.adjoint() * k);
  return {std::move(reduced), std::move(u)};
}

ObjectiveContext make_objective_context(const ModulationScheme& scheme) {
  scheme.validate();
  const int nc = scheme.cutoff;
  const int in_dim = 4 * nc;
  const KrausMap g = build_G_map(nc);

  KrausMap zg;  // Z o G with Kraus ops Z_j g
  zg.in_dim = in_dim;
  zg.out_dim = g.out_dim;
  for (const Matrix& zj : pinching_kraus({4, nc, 4}))
    zg.kraus_ops.push_back(zj * g.kraus_ops[0]);

  const Matrix probe = Matrix::Identity(in_dim, in_dim) / in_dim;
  auto [g_red, g_iso] = facial_reduction(g, probe);
  auto [z_red, z_iso] = facial_reduction(zg, probe);

  ObjectiveContext ctx;
  ctx.scheme = scheme;
  ctx.g_reduced = std::move(g_red);
  ctx.z_reduced = std::move(z_red);
  ctx.g_isometry = std::move(g_iso);
  ctx.z_isometry = std::move(z_iso);
  ctx.in_dim = in_dim;
  return ctx;
}

double objective_r(const Matrix& rho, const ObjectiveContext& ctx) {
  check_density(rho);
  const Matrix p = perturbed(rho);
  return entropy_bits(ctx.z_reduced.apply(p)) - entropy_bits(ctx.g_reduced.apply(p));
}

Matrix gradient_r(const Matrix& rho, const ObjectiveContext& ctx) {
  const Matrix p = perturbed(rho);
  const Matrix lg = log2_plus_const(ctx.g_reduced.apply(p));
  const Matrix lz = log2_plus_const(ctx.z_reduced.apply(p));
  const Matrix m = ctx.g_reduced.apply_adjoint(lg) - ctx.z_reduced.apply_adjoint(lz);
  return 0.5 * (m + m.adjoint().eval());
}

FwStep fw_step(const Matrix& rho, const ObjectiveContext& ctx,
               const std::vector<Matrix>& constraint_ops, const RealVector& rhs,
               double tol) {
  FwStep step;
  step.gradient = gradient_r(rho, ctx);
  SdpProblem problem;
  problem.dim = ctx.in_dim;
  problem.objective = step.gradient;
  problem.constraints = constraint_ops;
  problem.rhs = rhs;
  step.solution = solve_primal_dual(problem, tol);
  if (step.solution.status == SdpStatus::infeasible)
    throw std::runtime_error("fw_step: linearized SDP infeasible");
  step.delta = step.solution.primal - rho;
  return step;
}

double line_search(const Matrix& rho, const Matrix& delta, const ObjectiveContext& ctx) {
  const auto value = [&](double kappa) {
    return objective_r(rho + kappa * delta, ctx);
  };
  const double at0 = value(0.0);
  // ~1e-6 absolute tolerance: 2^-20 on a unit interval.
  auto [kappa, fmin] = boost::math::tools::brent_find_minima(value, 0.0, 1.0, 20);
  if (fmin > at0) {
    // Near-boundary iterates push the optimal step below Brent's resolution
    // and every coarse probe overshoots; scan geometrically toward zero.
    kappa = 0.0;
    fmin = at0;
    for (double k = 0.25; k > 1e-14; k *= 0.25) {
      const double f = value(k);
      if (f < fmin) {
        fmin = f;
        kappa = k;
      }
    }
    if (kappa > 0.0) {
      // Refine inside the located bracket.
      std::tie(kappa, fmin) =
          boost::math::tools::brent_find_minima(value, 0.0, 4.0 * kappa, 26);
    }
  }
  return fmin <= at0 ? kappa : 0.0;
}

RealVector DualCertificate::nu_flat() const {
  const int m = static_cast<int>(nu_pe.cols());
  RealVector nu(4 * m + 16);
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < m; ++z) nu(x * m + z) = nu_pe(x, z);
  nu.tail(16) = nu_tom;
  return nu;
}

namespace {

// Shared by taylor_lower_bound and the in-loop bound of frank_wolfe: turn a
// solved linearization at rho into a certified affine lower bound.
std::pair<double, DualCertificate> certify(const Matrix& rho, const Matrix& gradient,
                                           const SdpProblem& problem,
                                           const SdpSolution& solution,
                                           const ObjectiveContext& ctx,
                                           double eps_prime_floor) {
  const int m = ctx.scheme.module_count();
  const int n_pe = 4 * m;
  RealVector nu = solution.dual;

  auto [lmin, certified] = verify_dual_certificate(gradient, problem.constraints, nu);
  double extra = 0.0;
  if (!certified) {
    // The identity-shift repair needs the PE block to sum to the identity
    // (true for the production constraint layout).  Otherwise fall back to
    // absorbing lambda_min directly; valid because the feasible set has unit
    // trace, so slack >= lmin * 1 costs exactly lmin in the bound.
    bool pe_layout = static_cast<int>(problem.constraints.size()) == n_pe + 16;
    if (pe_layout) {
      Matrix sum = Matrix::Zero(problem.dim, problem.dim);
      for (int i = 0; i < n_pe; ++i) sum += problem.constraints[i];
      pe_layout = (sum - Matrix::Identity(problem.dim, problem.dim))
                      .cwiseAbs()
                      .maxCoeff() < 1e-9;
    }
    if (pe_layout) {
      nu = repair_certificate(nu, lmin, n_pe);
      std::tie(lmin, certified) =
          verify_dual_certificate(gradient, problem.constraints, nu);
      if (!certified)
        throw std::runtime_error("certificate repair failed to restore feasibility");
    } else {
      extra = lmin;  // lmin < 0
    }
  }

  const double eps_prime =
      std::max(eps_prime_floor, epsilon_prime(problem, solution));
  const double g0 = objective_r(rho, ctx) - tr_prod(rho, gradient);
  const double value =
      g0 + nu.dot(problem.rhs) + extra - eps_prime * nu.cwiseAbs().sum();

  DualCertificate cert;
  cert.scheme = ctx.scheme;
  cert.nu_pe.resize(4, m);
  if (nu.size() == n_pe + 16) {
    for (int x = 0; x < 4; ++x)
      for (int z = 0; z < m; ++z) cert.nu_pe(x, z) = nu(x * m + z);
    cert.nu_tom = nu.tail(16);
  } else {
    cert.nu_pe.setZero();
    cert.nu_tom = RealVector::Zero(16);
  }
  cert.g0 = g0;
  cert.eps_prime = eps_prime;
  cert.primal_ub = g0 + tr_prod(rho, gradient);  // = r(rho)
  cert.lower_bound = value;
  cert.lambda_min = lmin;
  cert.sdp_iterations = solution.iterations;
  cert.sdp_residual = solution.max_residual;
  return {value, std::move(cert)};
}

}  // namespace

std::pair<double, DualCertificate> taylor_lower_bound(
    const Matrix& rho, const ObjectiveContext& ctx,
    const std::vector<Matrix>& constraint_ops, const RealVector& rhs,
    double eps_prime_floor) {
  const FwStep step = fw_step(rho, ctx, constraint_ops, rhs);
  SdpProblem problem;
  problem.dim = ctx.in_dim;
  problem.objective = step.gradient;
  problem.constraints = constraint_ops;
  problem.rhs = rhs;
  return certify(rho, step.gradient, problem, step.solution, ctx, eps_prime_floor);
}

FwResult frank_wolfe(const ObjectiveContext& ctx,
                     const std::vector<Matrix>& constraint_ops,
                     const RealVector& rhs, const FwOptions& opts) {
  FwResult result;
  // The aux solve leaves ~1e-8 trace error; fold it away before evaluating.
  result.rho = psd_unit_project(feasibility_point(constraint_ops, rhs));
  result.upper_bound = objective_r(result.rho, ctx);
  result.lower_bound = -std::numeric_limits<double>::infinity();

  SdpProblem problem;
  problem.dim = ctx.in_dim;
  problem.constraints = constraint_ops;
  problem.rhs = rhs;

  const auto rel_gap = [&]() {
    const double scale = std::max({std::abs(result.upper_bound),
                                   std::abs(result.lower_bound), 1e-12});
    return (result.upper_bound - result.lower_bound) / scale;
  };

  bool have_cert = false;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const FwStep step = fw_step(result.rho, ctx, constraint_ops, rhs, opts.sdp_tol);

    FwIterate rec;
    rec.iteration = it;
    if ((it - 1) % opts.lb_cadence == 0) {
      problem.objective = step.gradient;
      auto [value, cert] = certify(result.rho, step.gradient, problem,
                                   step.solution, ctx, opts.eps_prime_floor);
      // Each certificate is a global bound, so the running max is valid.
      if (!have_cert || value > result.lower_bound) {
        result.lower_bound = value;
        result.certificate = std::move(cert);
        have_cert = true;
      }
      rec.lower_bound = result.lower_bound;
      rec.has_lower = true;
    }

    const double kappa = line_search(result.rho, step.delta, ctx);
    if (kappa > 0.0) {
      const Matrix next = psd_unit_project(result.rho + kappa * step.delta);
      const double ub = objective_r(next, ctx);
      if (ub <= result.upper_bound) {
        result.rho = next;
        result.upper_bound = ub;
      }
    }
    rec.upper_bound = result.upper_bound;
    rec.kappa = kappa;
    result.trace.iterates.push_back(rec);

    if (have_cert && rel_gap() < opts.gap) {
      result.trace.converged = true;
      break;
    }
  }

  // Final bound at the last iterate in case it beats the cadence samples.
  auto [value, cert] = taylor_lower_bound(result.rho, ctx, constraint_ops, rhs,
                                          opts.eps_prime_floor);
  if (!have_cert || value > result.lower_bound) {
    result.lower_bound = value;
    result.certificate = std::move(cert);
  }
  result.certificate.primal_ub = result.upper_bound;
  result.trace.final_gap = rel_gap();
  if (result.trace.final_gap < opts.gap) result.trace.converged = true;
  return result;
}

RealVector constraint_rhs(const HonestStatistics& stats) {
  const int m = static_cast<int>(stats.pe.cols());
  RealVector rhs(4 * m + 16);
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < m; ++z) rhs(x * m + z) = stats.pe(x, z);
  rhs.tail(16) = stats.tom;
  return rhs;
}

}  // namespace dmcv
