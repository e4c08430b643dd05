#include "dmcv/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace dmcv {

namespace {

// Real symmetric embedding of a Hermitian matrix; Tr[E(A) E(X)] = 2 Tr[A X].
RealMatrix embed(const Matrix& h) {
  const int d = static_cast<int>(h.rows());
  RealMatrix e(2 * d, 2 * d);
  e.topLeftCorner(d, d) = h.real();
  e.bottomRightCorner(d, d) = h.real();
  e.topRightCorner(d, d) = -h.imag();
  e.bottomLeftCorner(d, d) = h.imag();
  return e;
}

// Projects a real symmetric matrix back onto the embedded-Hermitian subspace.
Matrix unembed(const RealMatrix& e) {
  const int d = static_cast<int>(e.rows()) / 2;
  const RealMatrix re = 0.5 * (e.topLeftCorner(d, d) + e.bottomRightCorner(d, d));
  const RealMatrix im = 0.5 * (e.bottomLeftCorner(d, d) - e.topRightCorner(d, d));
  Matrix h = re.cast<Complex>() + Complex(0, 1) * im.cast<Complex>();
  return 0.5 * (h + h.adjoint().eval());
}

double inner(const RealMatrix& a, const RealMatrix& b) {
  return a.cwiseProduct(b).sum();
}

// Largest step alpha with X + alpha D still PSD (X positive definite).
double max_step(const RealMatrix& x, const RealMatrix& d) {
  const Eigen::LLT<RealMatrix> llt(x);
  const RealMatrix w = llt.matrixL().solve(
      RealMatrix(llt.matrixL().solve(d).transpose()));
  const double lmin =
      Eigen::SelfAdjointEigenSolver<RealMatrix>(w, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff();
  return lmin >= -1e-14 ? 1e30 : -1.0 / lmin;
}

struct Elimination {
  std::vector<int> keep;
  bool consistent = true;
};

// Drops linearly dependent constraints (Gram-matrix pivoted QR) and checks
// that the dropped right-hand sides are implied by the kept ones.
Elimination eliminate_dependencies(const std::vector<RealMatrix>& as,
                                   const RealVector& b) {
  const int n = static_cast<int>(as.size());
  RealMatrix gram(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) gram(i, j) = gram(j, i) = inner(as[i], as[j]);

  Eigen::ColPivHouseholderQR<RealMatrix> qr(gram);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());

  Elimination result;
  const auto perm = qr.colsPermutation().indices();
  result.keep.assign(perm.data(), perm.data() + rank);
  std::sort(result.keep.begin(), result.keep.end());

  if (rank == n) return result;
  RealMatrix gram_kk(rank, rank);
  RealVector b_k(rank);
  for (int i = 0; i < rank; ++i) {
    b_k(i) = b(result.keep[i]);
    for (int j = 0; j < rank; ++j)
      gram_kk(i, j) = gram(result.keep[i], result.keep[j]);
  }
  const Eigen::LDLT<RealMatrix> ldlt(gram_kk);
  const double b_scale = 1.0 + b.cwiseAbs().maxCoeff();
  for (int j = 0; j < n; ++j) {
    if (std::find(result.keep.begin(), result.keep.end(), j) != result.keep.end())
      continue;
    RealVector g_kj(rank);
    for (int i = 0; i < rank; ++i) g_kj(i) = gram(result.keep[i], j);
    const RealVector coeff = ldlt.solve(g_kj);
    if (std::abs(b(j) - coeff.dot(b_k)) > 1e-8 * b_scale) {
      result.consistent = false;
      return result;
    }
  }
  return result;
}

struct RealIpmResult {
  RealMatrix x, s;
  RealVector y;
  int iterations = 0;
  bool converged = false;
};

// Infeasible-start primal-dual path following, HKM direction with Mehrotra
// predictor-corrector.  All inputs symmetric.
RealIpmResult solve_real(const RealMatrix& c, const std::vector<RealMatrix>& as,
                         const RealVector& b, double tol, int max_iter = 120) {
  const int d = static_cast<int>(c.rows());
  const int n = static_cast<int>(as.size());
  RealIpmResult r;
  const double init_scale =
      std::max({1.0, b.size() ? b.cwiseAbs().maxCoeff() : 0.0,
                c.cwiseAbs().maxCoeff()});
  r.x = init_scale * RealMatrix::Identity(d, d);
  r.s = init_scale * RealMatrix::Identity(d, d);
  r.y = RealVector::Zero(n);

  const double b_scale = 1.0 + (b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  const double c_scale = 1.0 + c.cwiseAbs().maxCoeff();
  const RealMatrix identity = RealMatrix::Identity(d, d);

  for (int iter = 0; iter < max_iter; ++iter) {
    r.iterations = iter;
    RealVector rp(n);
    for (int i = 0; i < n; ++i) rp(i) = b(i) - inner(as[i], r.x);
    RealMatrix rd = c - r.s;
    for (int i = 0; i < n; ++i) rd -= r.y(i) * as[i];

    const double mu = inner(r.x, r.s) / d;
    // Diverging iterates signal an unbounded or infeasible problem.
    if (!std::isfinite(mu) || r.x.norm() > 1e12 * init_scale * d ||
        r.y.cwiseAbs().maxCoeff() > 1e12 * init_scale * d)
      return r;
    const double pobj = inner(c, r.x);
    const double dobj = b.dot(r.y);
    const double rel_gap = inner(r.x, r.s) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double p_res = n ? rp.cwiseAbs().maxCoeff() / b_scale : 0.0;
    const double d_res = rd.cwiseAbs().maxCoeff() / c_scale;
    if (std::getenv("DMCV_SDP_TRACE"))
      std::fprintf(stderr, "it %3d mu %.3e gap %.3e p %.3e d %.3e\n", iter, mu,
                   rel_gap, p_res, d_res);
    if (rel_gap <= tol && p_res <= tol && d_res <= tol) {
      r.converged = true;
      return r;
    }

    const Eigen::LLT<RealMatrix> s_llt(r.s);
    if (s_llt.info() != Eigen::Success) return r;
    const RealMatrix s_inv = s_llt.solve(identity);

    const auto sym = [](const RealMatrix& k) {
      return RealMatrix(0.5 * (k + k.transpose()));
    };

    // Schur complement M_ji = <A_j, sym(X A_i S^{-1})>; the symmetrized
    // products keep the Schur equations consistent with the dX formula.
    std::vector<RealMatrix> t(n);
    for (int i = 0; i < n; ++i) t[i] = sym(r.x * as[i] * s_inv);
    RealMatrix m(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) m(j, i) = inner(as[j], t[i]);
    m = 0.5 * (m + m.transpose()).eval();
    for (int i = 0; i < n; ++i) m(i, i) += 1e-14 * (1.0 + m(i, i));
    const Eigen::LDLT<RealMatrix> m_ldlt(m);

    const RealMatrix x_rd_sinv = sym(r.x * rd * s_inv);

    // dX = base + sum_i dy_i t_i, so dy solves M dy = rp - A(base).  Solve by
    // measuring the true residual through dX; the extra refinement passes are
    // what keeps the primal residual contracting once mu is tiny.
    const auto direction = [&](double sigma_mu, const RealMatrix& corr) {
      RealMatrix base = sigma_mu * s_inv - r.x - x_rd_sinv - sym(corr * s_inv);
      RealMatrix dx = base;
      RealVector dy = RealVector::Zero(n);
      for (int pass = 0; pass < 3; ++pass) {
        RealVector resid(n);
        for (int j = 0; j < n; ++j) resid(j) = rp(j) - inner(as[j], dx);
        if (pass > 0 && resid.cwiseAbs().maxCoeff() < 1e-14 * b_scale) break;
        const RealVector delta = m_ldlt.solve(resid);
        dy += delta;
        for (int i = 0; i < n; ++i) dx += delta(i) * t[i];
      }
      RealMatrix ds = rd;
      for (int i = 0; i < n; ++i) ds -= dy(i) * as[i];
      ds = 0.5 * (ds + ds.transpose()).eval();
      return std::tuple<RealMatrix, RealVector, RealMatrix>(dx, dy, ds);
    };

    const RealMatrix zero = RealMatrix::Zero(d, d);
    auto [dxa, dya, dsa] = direction(0.0, zero);
    const double apa = std::min(1.0, 0.98 * max_step(r.x, dxa));
    const double ada = std::min(1.0, 0.98 * max_step(r.s, dsa));
    const double mu_aff =
        inner(r.x + apa * dxa, r.s + ada * dsa) / d;
    double sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);
    // Keep the barrier from collapsing before the residuals are worked off;
    // pure centering steps restore feasibility at fixed mu.
    if (std::max(p_res, d_res) > 10.0 * rel_gap) sigma = 1.0;
    else if (std::max(p_res, d_res) > rel_gap) sigma = std::max(sigma, 0.3);

    auto [dx, dy, ds] = direction(sigma * mu, RealMatrix(dxa * dsa));
    const double ap = std::min(1.0, 0.98 * max_step(r.x, dx));
    const double ad = std::min(1.0, 0.98 * max_step(r.s, ds));
    const double a = std::min(ap, ad);

    r.x += a * dx;
    r.y += a * dy;
    r.s += a * ds;
    r.x = 0.5 * (r.x + r.x.transpose()).eval();
    r.s = 0.5 * (r.s + r.s.transpose()).eval();
  }
  return r;
}

}  // namespace

void SdpProblem::validate() const {
  if (objective.rows() != dim || objective.cols() != dim)
    throw std::invalid_argument("SdpProblem: objective dimension mismatch");
  if (static_cast<int>(constraints.size()) != rhs.size())
    throw std::invalid_argument("SdpProblem: |constraints| != |rhs|");
  const auto check_herm = [](const Matrix& h) {
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("SdpProblem: matrix not Hermitian within 1e-12");
  };
  check_herm(objective);
  for (const Matrix& a : constraints) {
    if (a.rows() != dim || a.cols() != dim)
      throw std::invalid_argument("SdpProblem: constraint dimension mismatch");
    check_herm(a);
  }
}

SdpSolution solve_primal_dual(const SdpProblem& problem, double tol) {
  problem.validate();
  const int n = static_cast<int>(problem.constraints.size());

  // Normalize every constraint to unit Frobenius norm; conditioning of the
  // Schur complement suffers badly otherwise (tail operators are tiny).
  std::vector<RealMatrix> as_all(n);
  RealVector b_all(n), scale(n);
  for (int i = 0; i < n; ++i) {
    as_all[i] = embed(problem.constraints[i]);
    scale(i) = as_all[i].norm();
    if (scale(i) < 1e-14)
      throw std::invalid_argument("SdpProblem: zero constraint matrix");
    as_all[i] /= scale(i);
    b_all(i) = 2.0 * problem.rhs(i) / scale(i);
  }

  SdpSolution sol;
  sol.dual = RealVector::Zero(n);
  const Elimination elim = eliminate_dependencies(as_all, b_all);
  if (!elim.consistent) {
    sol.status = SdpStatus::infeasible;
    sol.primal = Matrix::Zero(problem.dim, problem.dim);
    sol.slack = problem.objective;
    return sol;
  }

  std::vector<RealMatrix> as;
  RealVector b(elim.keep.size());
  for (std::size_t k = 0; k < elim.keep.size(); ++k) {
    as.push_back(as_all[elim.keep[k]]);
    b(k) = b_all(elim.keep[k]);
  }

  const RealIpmResult r = solve_real(embed(problem.objective), as, b, tol);

  sol.primal = unembed(r.x);
  for (std::size_t k = 0; k < elim.keep.size(); ++k)
    sol.dual(elim.keep[k]) = r.y(k) / scale(elim.keep[k]);
  sol.slack = problem.objective;
  for (int i = 0; i < n; ++i) sol.slack -= sol.dual(i) * problem.constraints[i];
  sol.primal_value = (problem.objective.cwiseProduct(sol.primal.conjugate())).sum().real();
  sol.dual_value = problem.rhs.dot(sol.dual);
  sol.gap = std::abs(sol.primal_value - sol.dual_value);
  sol.max_residual = 0.0;
  for (int i = 0; i < n; ++i) {
    const double tr =
        (problem.constraints[i].cwiseProduct(sol.primal.conjugate())).sum().real();
    sol.max_residual = std::max(sol.max_residual, std::abs(tr - problem.rhs(i)));
  }
  sol.iterations = r.iterations;
  sol.status = r.converged ? SdpStatus::optimal : SdpStatus::max_iter;
  return sol;
}

Matrix feasibility_point(const std::vector<Matrix>& constraints, const RealVector& rhs,
                         double* lambda_min_out) {
  if (constraints.empty() || static_cast<int>(constraints.size()) != rhs.size())
    throw std::invalid_argument("feasibility_point: constraint/rhs mismatch");
  const int d = static_cast<int>(constraints[0].rows());
  const int dd = d + 1;

  // X = Y + (s - 1) 1 with diag(Y, s) >= 0; maximize t = s - 1.  The shift
  // keeps t free over [-1, 1/d] without splitting it into two scalars, which
  // would leave the dual without a strict interior.  t* <= 1/d by unit trace,
  // and any t* <= 0 is failure regardless of the -1 clamp.
  SdpProblem aux;
  aux.dim = dd;
  aux.objective = Matrix::Zero(dd, dd);
  aux.objective(d, d) = -1.0;
  for (int i = 0; i < rhs.size(); ++i) {
    Matrix a = Matrix::Zero(dd, dd);
    a.topLeftCorner(d, d) = constraints[i];
    a(d, d) = constraints[i].trace().real();
    aux.constraints.push_back(std::move(a));
  }
  RealVector b = rhs + RealVector::Constant(rhs.size(), 0.0);
  for (int i = 0; i < rhs.size(); ++i) b(i) += constraints[i].trace().real();
  {
    // Unit trace, appended so inconsistent statistics are detected.
    Matrix a = Matrix::Identity(dd, dd);
    a(d, d) = static_cast<double>(d);
    aux.constraints.push_back(std::move(a));
    b.conservativeResize(rhs.size() + 1);
    b(rhs.size()) = 1.0 + static_cast<double>(d);
  }
  aux.rhs = b;

  const SdpSolution sol = solve_primal_dual(aux, 1e-9);
  if (sol.status == SdpStatus::infeasible ||
      (sol.status == SdpStatus::max_iter && sol.max_residual > 1e-7))
    throw std::runtime_error(
        "infeasible-statistics: no density matrix matches the constraints");

  const double t = sol.primal(d, d).real() - 1.0;
  Matrix x = sol.primal.topLeftCorner(d, d);
  x += t * Matrix::Identity(d, d);
  x = 0.5 * (x + x.adjoint().eval());

  const double lmin =
      Eigen::SelfAdjointEigenSolver<Matrix>(x, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff();
  if (lambda_min_out) *lambda_min_out = lmin;
  if (lmin <= 1e-10)
    throw std::runtime_error(
        "infeasible-statistics: no strictly feasible density matrix (lambda_min <= "
        "1e-10)");
  return x;
}

std::pair<double, bool> verify_dual_certificate(const Matrix& gradient,
                                                const std::vector<Matrix>& ops,
                                                const RealVector& nu) {
  if (static_cast<int>(ops.size()) != nu.size())
    throw std::invalid_argument("verify_dual_certificate: ops/nu size mismatch");
  Matrix slack = gradient;
  for (int i = 0; i < nu.size(); ++i) slack -= nu(i) * ops[i];
  slack = 0.5 * (slack + slack.adjoint().eval());
  const double lmin =
      Eigen::SelfAdjointEigenSolver<Matrix>(slack, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff();
  return {lmin, lmin >= 0.0};
}

RealVector repair_certificate(const RealVector& nu, double lambda_min, int n_pe) {
  if (n_pe < 0 || n_pe > nu.size())
    throw std::invalid_argument("repair_certificate: bad PE block size");
  if (lambda_min >= 0.0) return nu;
  RealVector out = nu;
  // The 1e-11 margin absorbs eigensolver noise so re-verification certifies.
  out.head(n_pe).array() -= std::abs(lambda_min) + 1e-11;
  return out;
}

double epsilon_prime(const SdpProblem& problem, const SdpSolution& solution) {
  double eps = 1e-12;
  eps = std::max(eps, solution.max_residual);
  eps = std::max(
      eps, (solution.primal - solution.primal.adjoint()).cwiseAbs().maxCoeff());
  eps = std::max(eps,
                 (solution.slack - solution.slack.adjoint()).cwiseAbs().maxCoeff());
  return eps;
}

}  // namespace dmcv
