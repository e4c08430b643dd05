#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dmcv/honest_model.hpp"
#include "dmcv/sdp.hpp"

using namespace dmcv;

namespace {

Matrix random_hermitian(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = Complex(gauss(rng), gauss(rng));
  return 0.5 * (m + m.adjoint().eval());
}

Matrix random_psd(int d, std::mt19937_64& rng) {
  const Matrix h = random_hermitian(d, rng);
  return h * h.adjoint() + 0.1 * Matrix::Identity(d, d);
}

double tr_prod(const Matrix& a, const Matrix& b) {
  return (a * b).trace().real();
}

// Projection of v onto the affine set {Tr[A_i X] = b_i} using a precomputed
// Gram pseudo-inverse; matrices treated as a real inner-product space.
struct AffineProjector {
  std::vector<Matrix> as;
  RealVector b;
  Eigen::LDLT<RealMatrix> gram;

  AffineProjector(std::vector<Matrix> ops, RealVector rhs)
      : as(std::move(ops)), b(std::move(rhs)) {
    const int n = static_cast<int>(as.size());
    RealMatrix g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = tr_prod(as[i], as[j]);
    gram.compute(g);
  }

  Matrix operator()(const Matrix& v) const {
    const int n = static_cast<int>(as.size());
    RealVector resid(n);
    for (int i = 0; i < n; ++i) resid(i) = tr_prod(as[i], v) - b(i);
    const RealVector coeff = gram.solve(resid);
    Matrix out = v;
    for (int i = 0; i < n; ++i) out -= coeff(i) * as[i];
    return out;
  }
};

Matrix psd_project(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint().eval()));
  const RealVector ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal().toDenseMatrix().cast<Complex>() *
         es.eigenvectors().adjoint();
}

// Independent ADMM solve of the same SDP (splitting X = Z, affine vs PSD).
double admm_oracle(const SdpProblem& p, int iters = 20000) {
  const AffineProjector affine(p.constraints, p.rhs);
  const double rho = 1.0;
  Matrix z = Matrix::Identity(p.dim, p.dim);
  Matrix u = Matrix::Zero(p.dim, p.dim);
  Matrix x = z;
  for (int k = 0; k < iters; ++k) {
    x = affine(z - u - p.objective / rho);
    z = psd_project(x + u);
    u += x - z;
  }
  return tr_prod(p.objective, z);
}

// Hit-and-run over the feasible spectrahedron, always stepping to the
// objective-minimizing endpoint of the sampled chord.
double hit_and_run_min(const SdpProblem& p, const Matrix& start,
                       std::mt19937_64& rng, int iters = 3000) {
  const AffineProjector to_null(p.constraints, RealVector::Zero(p.rhs.size()));
  Matrix x = start;
  double best = tr_prod(p.objective, x);
  for (int k = 0; k < iters; ++k) {
    Matrix dir = to_null(random_hermitian(p.dim, rng));
    const double norm = dir.norm();
    if (norm < 1e-12) continue;
    dir /= norm;
    // Chord endpoints: eigenvalues of x^{-1/2} dir x^{-1/2} bound the step.
    Eigen::SelfAdjointEigenSolver<Matrix> xe(x);
    const RealVector ev = xe.eigenvalues().cwiseMax(1e-12);
    const Matrix inv_root = xe.eigenvectors() *
                            ev.cwiseSqrt().cwiseInverse().asDiagonal().toDenseMatrix().cast<Complex>() *
                            xe.eigenvectors().adjoint();
    Eigen::SelfAdjointEigenSolver<Matrix> we(inv_root * dir * inv_root,
                                             Eigen::EigenvaluesOnly);
    const double wmax = we.eigenvalues().maxCoeff();
    const double wmin = we.eigenvalues().minCoeff();
    // 1 + kappa * lambda >= 0 for every eigenvalue lambda of the whitened dir.
    const double hi = wmin < -1e-12 ? -1.0 / wmin : 1e6;
    const double lo = wmax > 1e-12 ? -1.0 / wmax : -1e6;
    const double slope = tr_prod(p.objective, dir);
    const double shrink = 0.999;  // stay strictly inside so x stays invertible
    const double step = slope < 0.0 ? shrink * hi : shrink * lo;
    x += step * dir;
    best = std::min(best, tr_prod(p.objective, x));
  }
  return best;
}

}  // namespace

TEST_CASE("scalar SDP") {
  SdpProblem p;
  p.dim = 1;
  p.objective = Matrix::Constant(1, 1, 3.0);
  p.constraints = {Matrix::Constant(1, 1, 2.0)};
  p.rhs = RealVector::Constant(1, 4.0);
  const SdpSolution s = solve_primal_dual(p);
  CHECK(s.status == SdpStatus::optimal);
  CHECK(s.primal(0, 0).real() == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(s.primal_value == doctest::Approx(6.0).epsilon(1e-7));
  CHECK(s.dual_value == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("2x2 eigenvalue selection") {
  SdpProblem p;
  p.dim = 2;
  p.objective = Matrix::Zero(2, 2);
  p.objective(0, 0) = 1.0;
  p.objective(1, 1) = 2.0;
  p.constraints = {Matrix::Identity(2, 2)};
  p.rhs = RealVector::Constant(1, 1.0);
  const SdpSolution s = solve_primal_dual(p);
  CHECK(s.status == SdpStatus::optimal);
  CHECK(s.primal_value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(s.primal(0, 0).real() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(s.primal(1, 1)) < 1e-6);
}

TEST_CASE("random 6x6 instances match the randomized oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 3; ++trial) {
    SdpProblem p;
    p.dim = 6;
    p.objective = random_hermitian(6, rng);
    Matrix x0 = random_psd(6, rng);
    x0 /= x0.trace().real();
    p.rhs.resize(5);
    for (int i = 0; i < 4; ++i) {
      p.constraints.push_back(random_hermitian(6, rng));
      p.rhs(i) = tr_prod(p.constraints[i], x0);
    }
    p.constraints.push_back(Matrix::Identity(6, 6));  // bounds the feasible set
    p.rhs(4) = 1.0;

    const SdpSolution s = solve_primal_dual(p);
    REQUIRE(s.status == SdpStatus::optimal);
    const double scale = 1.0 + std::abs(s.primal_value);

    const double admm = admm_oracle(p);
    CHECK(std::abs(s.primal_value - admm) < 1e-4 * scale);

    const double sampled = hit_and_run_min(p, x0, rng);
    CHECK(s.primal_value <= sampled + 1e-6 * scale);

    // Weak duality and complementary slackness.
    CHECK(s.dual_value <= s.primal_value + 1e-9 * scale);
    CHECK(std::abs(tr_prod(s.primal, s.slack)) < 1e-6 * scale);

    p.constraints.clear();
    p.rhs.resize(0);
  }
}

TEST_CASE("dependent constraints are eliminated consistently") {
  std::mt19937_64 rng(5);
  SdpProblem p;
  p.dim = 4;
  p.objective = random_hermitian(4, rng);
  Matrix x0 = random_psd(4, rng);
  x0 /= x0.trace().real();
  p.constraints = {Matrix::Identity(4, 4), random_hermitian(4, rng)};
  p.constraints.push_back(p.constraints[0] + p.constraints[1]);  // dependent
  p.rhs.resize(3);
  for (int i = 0; i < 3; ++i) p.rhs(i) = tr_prod(p.constraints[i], x0);

  const SdpSolution s = solve_primal_dual(p);
  CHECK(s.status == SdpStatus::optimal);
  CHECK(s.max_residual < 1e-7);
  // exactly one of the three reports y = 0 (the eliminated one)
  CHECK((s.dual.array() == 0.0).count() == 1);

  // Contradictory rhs on the dependent constraint is infeasible.
  p.rhs(2) += 0.5;
  const SdpSolution bad = solve_primal_dual(p);
  CHECK(bad.status == SdpStatus::infeasible);
}

TEST_CASE("solver determinism") {
  std::mt19937_64 rng(77);
  SdpProblem p;
  p.dim = 5;
  p.objective = random_hermitian(5, rng);
  Matrix x0 = random_psd(5, rng);
  x0 /= x0.trace().real();
  p.rhs.resize(3);
  p.constraints.push_back(Matrix::Identity(5, 5));
  p.rhs(0) = 1.0;
  for (int i = 1; i < 3; ++i) {
    p.constraints.push_back(random_hermitian(5, rng));
    p.rhs(i) = tr_prod(p.constraints[i], x0);
  }
  const SdpSolution a = solve_primal_dual(p);
  const SdpSolution b = solve_primal_dual(p);
  CHECK((a.primal - b.primal).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.dual - b.dual).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("feasibility_point basics") {
  std::vector<Matrix> cons = {Matrix::Identity(3, 3)};
  const RealVector one = RealVector::Constant(1, 1.0);
  double lmin = 0.0;
  const Matrix x = feasibility_point(cons, one, &lmin);
  CHECK((x - Matrix::Identity(3, 3) / 3.0).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(lmin == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
}

TEST_CASE("feasibility_point on honest statistics") {
  const ModulationScheme scheme{0.9, 0.9, 0.9, 10};
  const HonestChannel channel{10.0, 0.2, 0.02};
  const auto labeled = constraint_operators(scheme);
  const HonestStatistics stats = honest_statistics(channel, scheme);

  std::vector<Matrix> cons;
  RealVector rhs(labeled.size());
  const int m = scheme.module_count();
  for (std::size_t i = 0; i < labeled.size(); ++i) cons.push_back(labeled[i].op.data);
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < m; ++z) rhs(x * m + z) = stats.pe(x, z);
  for (int i = 0; i < 16; ++i) rhs(4 * m + i) = stats.tom(i);

  double lmin = 0.0;
  const Matrix rho = feasibility_point(cons, rhs, &lmin);
  CHECK(lmin > 1e-6);
  CHECK(std::abs(rho.trace().real() - 1.0) < 1e-7);
  double max_resid = 0.0;
  for (std::size_t i = 0; i < cons.size(); ++i)
    max_resid = std::max(max_resid, std::abs(tr_prod(cons[i], rho) - rhs(i)));
  CHECK(max_resid < 1e-7);

  // Probabilities scaled off the simplex are rejected.
  CHECK_THROWS_AS(feasibility_point(cons, RealVector(1.1 * rhs), &lmin),
                  std::runtime_error);
}

TEST_CASE("verify and repair certificates") {
  std::mt19937_64 rng(9);
  const int d = 6;
  std::vector<Matrix> ops;
  // Four PSD ops summing to the identity (a random pinching decomposition).
  const Matrix basis = random_hermitian(d, rng);
  Eigen::SelfAdjointEigenSolver<Matrix> es(basis);
  for (int g = 0; g < 4; ++g) {
    Matrix p = Matrix::Zero(d, d);
    for (int k = g; k < d; k += 4) {
      const Vector v = es.eigenvectors().col(k);
      p += v * v.adjoint();
    }
    ops.push_back(p);
  }

  const Matrix grad_psd = random_psd(d, rng);
  const auto [l0, ok0] = verify_dual_certificate(grad_psd, ops, RealVector::Zero(4));
  CHECK(ok0);
  CHECK(l0 > 0.0);

  // Constructed slack diag(0.1 shift): nu = -0.1 on an identity partition.
  const auto [l1, ok1] =
      verify_dual_certificate(grad_psd, ops, RealVector::Constant(4, -0.1));
  CHECK(l1 == doctest::Approx(l0 + 0.1).epsilon(1e-11));
  CHECK(ok1);

  // Violated certificate repaired by the identity shift.
  const RealVector nu = RealVector::Constant(4, l0 + 0.2);
  const auto [lbad, okbad] = verify_dual_certificate(grad_psd, ops, nu);
  CHECK_FALSE(okbad);
  CHECK(lbad == doctest::Approx(-0.2).epsilon(1e-10));
  const RealVector fixed = repair_certificate(nu, lbad, 4);
  CHECK((nu - fixed).maxCoeff() == doctest::Approx(std::abs(lbad)));
  const auto [lfix, okfix] = verify_dual_certificate(grad_psd, ops, fixed);
  CHECK(okfix);
  CHECK(lfix >= 0.0);
  CHECK(lfix < 1e-10);
  CHECK(repair_certificate(nu, 0.0, 4) == nu);
}

TEST_CASE("epsilon_prime") {
  SdpProblem p;
  p.dim = 2;
  p.objective = Matrix::Identity(2, 2);
  p.constraints = {Matrix::Identity(2, 2)};
  p.rhs = RealVector::Constant(1, 1.0);

  SdpSolution exact;
  exact.primal = 0.5 * Matrix::Identity(2, 2);
  exact.slack = Matrix::Zero(2, 2);
  exact.max_residual = 0.0;
  CHECK(epsilon_prime(p, exact) == doctest::Approx(1e-12));

  SdpSolution off = exact;
  off.max_residual = 1e-6;
  CHECK(epsilon_prime(p, off) >= 1e-6);
}
