#include "dmcv/fock_ops.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

namespace dmcv {

namespace {

constexpr double kPi = std::numbers::pi;

// int_a^b gamma^{p+1} e^{-gamma^2} dgamma, normalized by 1/sqrt(m! n!) with
// p = m + n.  Substituting u = gamma^2 gives (1/2) Gamma(s) [P(s,b^2) - P(s,a^2)]
// with s = p/2 + 1 and P the regularized lower incomplete gamma function.
double radial_integral_normalized(int m, int n, double r_low, double r_high) {
  const double s = 0.5 * (m + n) + 1.0;
  const double p_low = r_low <= 0.0 ? 0.0 : boost::math::gamma_p(s, r_low * r_low);
  const double p_high =
      std::isinf(r_high) ? 1.0 : boost::math::gamma_p(s, r_high * r_high);
  const double log_scale =
      std::lgamma(s) - 0.5 * (std::lgamma(m + 1.0) + std::lgamma(n + 1.0));
  return 0.5 * std::exp(log_scale) * (p_high - p_low);
}

// int_{theta1}^{theta2} e^{i k theta} dtheta.
Complex angular_integral(int k, double theta1, double theta2) {
  if (k == 0) return Complex(theta2 - theta1, 0.0);
  const Complex ik(0.0, static_cast<double>(k));
  return (std::exp(ik * theta2) - std::exp(ik * theta1)) / ik;
}

}  // namespace

ModulationScheme::ModulationScheme(double alpha_, double delta_amp_, double delta_mod_,
                                   int cutoff_)
    : alpha(alpha_), delta_amp(delta_amp_), delta_mod(delta_mod_), cutoff(cutoff_) {
  validate();
}

void ModulationScheme::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha: must be > 0");
  if (!(delta_amp > 0.0)) throw std::invalid_argument("delta_amp: must be > 0");
  if (!(delta_mod > 0.0)) throw std::invalid_argument("delta_mod: must be > 0");
  const double ratio = delta_amp / delta_mod;
  if (std::abs(ratio - std::lround(ratio)) > 1e-9 || std::lround(ratio) < 1)
    throw std::invalid_argument(
        "delta_mod: delta_amp/delta_mod must be a positive integer");
  if (cutoff < 2) throw std::invalid_argument("cutoff: must be >= 2");
}

double FockOperator::hermiticity_residual() const {
  return (data - data.adjoint()).cwiseAbs().maxCoeff();
}

void FockOperator::check_valid(double herm_tol) const {
  long prod = 1;
  for (int d : dims) prod *= d;
  if (prod != data.rows() || data.rows() != data.cols())
    throw std::invalid_argument("FockOperator: dims product != matrix dimension");
  if (hermiticity_residual() > herm_tol)
    throw std::invalid_argument("FockOperator: not Hermitian within tolerance");
}

Matrix KrausMap::apply(const Matrix& rho) const {
  Matrix out = Matrix::Zero(out_dim, out_dim);
  for (const Matrix& k : kraus_ops) out.noalias() += k * rho * k.adjoint();
  return out;
}

Matrix KrausMap::apply_adjoint(const Matrix& a) const {
  Matrix out = Matrix::Zero(in_dim, in_dim);
  for (const Matrix& k : kraus_ops) out.noalias() += k.adjoint() * a * k;
  return out;
}

double KrausMap::trace_preservation_residual() const {
  Matrix acc = Matrix::Zero(in_dim, in_dim);
  for (const Matrix& k : kraus_ops) acc.noalias() += k.adjoint() * k;
  return (acc - Matrix::Identity(in_dim, in_dim)).cwiseAbs().maxCoeff();
}

std::array<Complex, 4> alice_amplitudes(double alpha) {
  return {Complex(alpha, 0.0), Complex(-alpha, 0.0), Complex(0.0, alpha),
          Complex(0.0, -alpha)};
}

Vector coherent_fock_vector(Complex amplitude, int cutoff) {
  if (cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");
  Vector v(cutoff);
  const double norm_factor = std::exp(-0.5 * std::norm(amplitude));
  Complex term(norm_factor, 0.0);  // a^k e^{-|a|^2/2} / sqrt(k!)
  for (int k = 0; k < cutoff; ++k) {
    v(k) = term;
    term *= amplitude / std::sqrt(static_cast<double>(k + 1));
  }
  return v;
}

Complex coherent_overlap(Complex a, Complex b) {
  return std::exp(-0.5 * (std::norm(a) + std::norm(b)) + std::conj(b) * a);
}

FockOperator alice_marginal(double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  const auto phi = alice_amplitudes(alpha == 0.0 ? 0.0 : alpha);
  Matrix rho(4, 4);
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y) rho(x, y) = 0.25 * coherent_overlap(phi[x], phi[y]);
  return FockOperator{{4}, rho};
}

FockOperator region_operator(double theta1, double theta2, double r_low, double r_high,
                             int cutoff) {
  Matrix r(cutoff, cutoff);
  for (int m = 0; m < cutoff; ++m) {
    for (int n = 0; n <= m; ++n) {
      const double rad = radial_integral_normalized(m, n, r_low, r_high);
      const Complex ang = angular_integral(m - n, theta1, theta2);
      r(m, n) = ang * (rad / kPi);
      r(n, m) = std::conj(r(m, n));
    }
  }
  return FockOperator{{cutoff}, r};
}

FockOperator key_region_operator(int z, int cutoff) {
  if (z < 0 || z > 3) throw std::invalid_argument("key wedge index must be in 0..3");
  const double theta1 = kPi * (2 * z - 1) / 4.0;
  const double theta2 = kPi * (2 * z + 1) / 4.0;
  return region_operator(theta1, theta2, 0.0,
                         std::numeric_limits<double>::infinity(), cutoff);
}

FockOperator pe_region_operator(int z, const ModulationScheme& scheme) {
  const int m = scheme.module_count();
  if (z < 0 || z >= m) throw std::invalid_argument("PE module index out of range");
  const int wedge = z % 4;
  const int ring = z / 4;
  const double theta1 = kPi * (2 * wedge - 1) / 4.0;
  const double theta2 = kPi * (2 * wedge + 1) / 4.0;
  const double r_low =
      ring == scheme.rings() ? scheme.delta_amp : scheme.delta_mod * ring;
  const double r_high = ring == scheme.rings()
                            ? std::numeric_limits<double>::infinity()
                            : scheme.delta_mod * (ring + 1);
  return region_operator(theta1, theta2, r_low, r_high, scheme.cutoff);
}

Matrix psd_sqrt(const Matrix& h, double clamp_floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -clamp_floor)
      throw std::runtime_error("psd_sqrt: eigenvalue below clamp floor (" +
                               std::to_string(ev(i)) + ")");
    ev(i) = ev(i) < 0.0 ? 0.0 : std::sqrt(ev(i));
  }
  return es.eigenvectors() * ev.asDiagonal().toDenseMatrix().cast<Complex>() *
         es.eigenvectors().adjoint();
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

KrausMap build_G_map(int cutoff) {
  const int in_dim = 4 * cutoff;
  const int out_dim = 4 * cutoff * 4;
  Matrix g = Matrix::Zero(out_dim, in_dim);
  for (int z = 0; z < 4; ++z) {
    const Matrix root = psd_sqrt(key_region_operator(z, cutoff).data);
    // 1_A (x) sqrt(R^z) (x) |z>_Zhat, with Zhat the fastest index.
    for (int x = 0; x < 4; ++x)
      for (int i = 0; i < cutoff; ++i)
        for (int j = 0; j < cutoff; ++j)
          g((x * cutoff + i) * 4 + z, x * cutoff + j) = root(i, j);
  }
  return KrausMap{{g}, in_dim, out_dim};
}

std::vector<Matrix> pinching_kraus(const std::vector<int>& dims) {
  if (dims.empty() || dims.back() != 4)
    throw std::invalid_argument("pinching: operator lacks a 4-dim key register");
  long total = 1;
  for (int d : dims) total *= d;
  const long rest = total / 4;
  std::vector<Matrix> ops;
  ops.reserve(4);
  for (int j = 0; j < 4; ++j) {
    Matrix zj = Matrix::Zero(total, total);
    for (long r = 0; r < rest; ++r) zj(r * 4 + j, r * 4 + j) = 1.0;
    ops.push_back(std::move(zj));
  }
  return ops;
}

FockOperator pinching_Z(const FockOperator& op) {
  op.check_valid(1e-9);
  if (op.dims.empty() || op.dims.back() != 4)
    throw std::invalid_argument("pinching: operator lacks a 4-dim key register");
  Matrix out = Matrix::Zero(op.data.rows(), op.data.cols());
  const long rest = op.data.rows() / 4;
  for (long r = 0; r < rest; ++r)
    for (long c = 0; c < rest; ++c)
      for (int j = 0; j < 4; ++j) out(r * 4 + j, c * 4 + j) = op.data(r * 4 + j, c * 4 + j);
  return FockOperator{op.dims, out};
}

std::vector<FockOperator> ic_povm() {
  const Complex i_unit(0.0, 1.0);
  std::vector<Vector> states;
  states.reserve(16);
  for (int j = 0; j < 4; ++j) {
    Vector v = Vector::Zero(4);
    v(j) = 1.0;
    states.push_back(v);
  }
  for (int j = 0; j < 4; ++j)
    for (int k = j + 1; k < 4; ++k) {
      Vector v = Vector::Zero(4);
      v(j) = 1.0 / std::sqrt(2.0);
      v(k) = 1.0 / std::sqrt(2.0);
      states.push_back(v);
    }
  for (int j = 0; j < 4; ++j)
    for (int k = j + 1; k < 4; ++k) {
      Vector v = Vector::Zero(4);
      v(j) = 1.0 / std::sqrt(2.0);
      v(k) = i_unit / std::sqrt(2.0);
      states.push_back(v);
    }

  Matrix s = Matrix::Zero(4, 4);
  for (const auto& v : states) s += v * v.adjoint();
  // S is positive definite, so the inverse square root is well defined.
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  Eigen::VectorXd inv_root = es.eigenvalues().cwiseSqrt().cwiseInverse();
  const Matrix s_inv_root = es.eigenvectors() *
                            inv_root.asDiagonal().toDenseMatrix().cast<Complex>() *
                            es.eigenvectors().adjoint();

  std::vector<FockOperator> povm;
  povm.reserve(16);
  for (const auto& v : states) {
    const Vector w = s_inv_root * v;
    povm.push_back(FockOperator{{4}, Matrix(w * w.adjoint())});
  }
  return povm;
}

std::vector<LabeledOperator> constraint_operators(const ModulationScheme& scheme) {
  scheme.validate();
  const int m = scheme.module_count();
  const int nc = scheme.cutoff;
  std::vector<LabeledOperator> ops;
  ops.reserve(4 * m + 16);
  for (int x = 0; x < 4; ++x) {
    Matrix proj = Matrix::Zero(4, 4);
    proj(x, x) = 1.0;
    for (int z = 0; z < m; ++z) {
      const FockOperator rz = pe_region_operator(z, scheme);
      ops.push_back(LabeledOperator{
          FockOperator{{4, nc}, kron(proj, rz.data)},
          "pe:x=" + std::to_string(x) + ",z=" + std::to_string(z)});
    }
  }
  const Matrix id_b = Matrix::Identity(nc, nc);
  const auto povm = ic_povm();
  for (int xp = 0; xp < 16; ++xp) {
    ops.push_back(LabeledOperator{FockOperator{{4, nc}, kron(povm[xp].data, id_b)},
                                  "tom:x'=" + std::to_string(xp)});
  }
  return ops;
}

}  // namespace dmcv
