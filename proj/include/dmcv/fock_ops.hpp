#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dmcv {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Protocol geometry: coherent amplitude, PE binning and Fock cutoff.
///
/// The parameter-estimation discretisation covers the plane with 4 angular
/// wedges times Delta/delta rings plus 4 unbounded tail modules, so the
/// module count is always m = 4*Delta/delta + 4.
struct ModulationScheme {
  double alpha = 0.9;      // coherent amplitude (real, > 0)
  double delta_amp = 0.9;  // outer amplitude cut (Delta)
  double delta_mod = 0.9;  // ring width (delta)
  int cutoff = 10;         // Fock truncation N_c

  ModulationScheme() = default;
  ModulationScheme(double alpha_, double delta_amp_, double delta_mod_, int cutoff_);

  int rings() const { return static_cast<int>(std::lround(delta_amp / delta_mod)); }
  int module_count() const { return 4 * rings() + 4; }

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Dense Hermitian operator on a labeled tensor product of truncated spaces.
struct FockOperator {
  std::vector<int> dims;  // subsystem dimensions, in tensor order
  Matrix data;

  int total_dim() const { return static_cast<int>(data.rows()); }
  double hermiticity_residual() const;
  void check_valid(double herm_tol = 1e-12) const;
};

/// Completely positive map given by Kraus operators (out_dim x in_dim each).
struct KrausMap {
  std::vector<Matrix> kraus_ops;
  int in_dim = 0;
  int out_dim = 0;

  Matrix apply(const Matrix& rho) const;
  // Adjoint map: A on the output space -> sum_k K^dag A K on the input space.
  Matrix apply_adjoint(const Matrix& a) const;
  // max |sum_k K^dag K - 1|, the trace-preservation residual.
  double trace_preservation_residual() const;
};

// The four protocol amplitudes in the fixed order {alpha, -alpha, i alpha, -i alpha}.
std::array<Complex, 4> alice_amplitudes(double alpha);

// Truncated Fock representation of |amplitude>, component k = a^k e^{-|a|^2/2}/sqrt(k!).
Vector coherent_fock_vector(Complex amplitude, int cutoff);

// <b|a> = exp(-(|a|^2+|b|^2)/2 + conj(b) a).
Complex coherent_overlap(Complex a, Complex b);

// Alice's 4x4 source-replacement marginal, entry (x,y) = <phi_y|phi_x>/4.
FockOperator alice_marginal(double alpha);

// Key-round region operator R^z for wedge z in {0..3}, radius [0, inf).
FockOperator key_region_operator(int z, int cutoff);

// PE region operator R~^z; z encodes wedge j = z%4 and ring k = z/4,
// rings [delta k, delta (k+1)) and tail [Delta, inf) for k = Delta/delta.
FockOperator pe_region_operator(int z, const ModulationScheme& scheme);

// General wedge-ring operator: angles [theta1, theta2), radii [r_low, r_high)
// (r_high may be infinity). Used by the two wrappers above.
FockOperator region_operator(double theta1, double theta2, double r_low, double r_high,
                             int cutoff);

// Postprocessing map G = 1_A (x) sum_z sqrt(R^z) (x) |z>, AB -> AB Zhat.
// Eigenvalues of R^z in [-1e-8, 0) are clamped to zero before the square root;
// anything below -1e-8 signals an operator-construction bug and throws.
KrausMap build_G_map(int cutoff);

// Pinching of the key register (by convention the last subsystem, dim 4):
// zeroes all blocks off-diagonal in that register.
FockOperator pinching_Z(const FockOperator& op);

// Kraus operators Z_j = (1 (x) |j><j|) of the pinching channel on a space
// whose last subsystem (dim 4) is the key register.
std::vector<Matrix> pinching_kraus(const std::vector<int>& dims);

// Deterministic IC-POVM on the 4-dim Alice space: 16 elements summing to the
// identity, spanning the full operator space.
std::vector<FockOperator> ic_povm();

/// One SDP constraint operator with a human-readable label.
struct LabeledOperator {
  FockOperator op;
  std::string label;
};

// The 4m + 16 constraint operators of the entropy SDP, in the fixed order
// (x,z) = (0,0),(0,1),...,(3,m-1) followed by Gamma_0,...,Gamma_15 (x) 1_B.
std::vector<LabeledOperator> constraint_operators(const ModulationScheme& scheme);

// Hermitian principal square root with small negative eigenvalues clamped to 0.
// Throws if an eigenvalue is below -clamp_floor.
Matrix psd_sqrt(const Matrix& h, double clamp_floor = 1e-8);

Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace dmcv
