#pragma once

#include <cstdint>

#include "dmcv/fock_ops.hpp"

namespace dmcv {

/// Gaussian fiber channel of the honest implementation.
struct HonestChannel {
  double distance_km = 10.0;
  double attenuation_db_per_km = 0.2;  // omega
  double excess_noise = 0.02;          // xi

  double transmittance() const;          // eta = 10^(-omega D / 10)
  double heterodyne_variance() const;    // 1 + eta xi / 2
  void validate() const;
};

double transmittance(double distance_km, double attenuation_db_per_km);

/// Distribution over the full statistics alphabet C: the PE cells (x,z,bot),
/// the tomography cells (bot,bot,x'), and the remainder symbol (bot,bot,bot).
struct AssembledDistribution {
  RealMatrix pe;    // 4 x m, entries p0(x,z,bot)
  RealVector tom;   // 16, entries p0(bot,bot,x')
  double rest = 0;  // p0(bot,bot,bot)

  double total() const { return pe.sum() + tom.sum() + rest; }
};

/// Honest statistics of one (channel, scheme) configuration.
struct HonestStatistics {
  RealMatrix pe;   // 4 x m, p0^sim(x,z); sums to 1
  RealMatrix ec;   // 4 x 4, p0^EC(x,z) over key wedges; sums to 1
  RealVector tom;  // 16, p0^tom(x'); sums to 1
};

// p0^sim over the 4 x m PE modules, by radial adaptive quadrature with a
// 64-point Gauss-Legendre angular rule per wedge.  Total mass 1 within 1e-9.
RealMatrix pe_statistics(const HonestChannel& channel, const ModulationScheme& scheme);

// Same integrand over the four full key wedges (radius [0, inf)); each row
// sums to 1/4.
RealMatrix key_statistics(const HonestChannel& channel, const ModulationScheme& scheme);

// p0^tom(x') = Tr[Gamma_x' rho_A(alpha)].
RealVector tom_statistics(double alpha, const std::vector<FockOperator>& povm);

HonestStatistics honest_statistics(const HonestChannel& channel,
                                   const ModulationScheme& scheme);

// Assembles the full-alphabet distribution from round-type probabilities.
// Requires p_key + p_pe + p_tom = 1 within 1e-12, each in [0, 1].
AssembledDistribution assemble_p0(double p_key, double p_pe, double p_tom,
                                  const HonestStatistics& stats);

// Error-correction leakage per protocol round, p_key (1+f) H(Zhat|Xhat) bits.
// Set per_round_fraction = false to drop the p_key factor.
double ec_leak_rate(const RealMatrix& ec, double f, double p_key,
                    bool per_round_fraction = true);

// Monte Carlo oracle: n heterodyne rounds through the honest channel, binned
// with the PE discretisation.  Deterministic for a fixed seed.
RealMatrix sample_rounds(const HonestChannel& channel, const ModulationScheme& scheme,
                         std::int64_t n, std::uint64_t seed);

}  // namespace dmcv
