#pragma once

#include "dmcv/convex_core.hpp"

namespace dmcv {

/// Affine min-tradeoff function on the full round alphabet: the test symbols
/// (4m parameter-estimation modules, then 16 tomography outcomes) carry
/// coefficients h <= 0; the key-round symbol carries 0, absorbed into the
/// constant.  max_g / min_g are the extreme values of the crossover function.
struct MinTradeoff {
  RealMatrix h_pe;   // 4 x m
  RealVector h_tom;  // 16
  double constant = 0.0;
  double max_g = 0.0;
  double min_g = 0.0;
  double p_key = 0.0;
  double p_pe_cond = 0.0;  // p~^PE, the PE share of a test round
};

// Crossover min-tradeoff function: p_key * (G0 + sum nu_pe p~(x,z)/p~PE
// + sum nu_tom p~(x')/p~tom) for p_tilde a distribution over the 4m + 16 test
// symbols (pe x-major, then tom).  Rejects p_pe_cond in {0, 1}.
double crossover_g(const DualCertificate& cert, const RealVector& p_tilde,
                   double p_key, double p_pe_cond);

// Extremes of crossover_g over point masses: p_key * (G0 + max/min of
// {nu_pe/p~PE} u {nu_tom/p~tom}).
std::pair<double, double> g_extremes(const DualCertificate& cert, double p_key,
                                     double p_pe_cond);

// Conversion to the full min-tradeoff function; (p_key, p_pe, p_tom) is the
// round-type distribution, so p~PE = p_pe/(p_pe + p_tom).
MinTradeoff min_tradeoff_from_crossover(const DualCertificate& cert, double p_key,
                                        double p_pe, double p_tom);

// Evaluate f on a distribution over the 4m + 16 + 1 symbols (test symbols
// then the key-round remainder).
double eval_min_tradeoff(const MinTradeoff& mt, const RealVector& p);

// Second-order entropy-accumulation quantities; d_O is the output alphabet
// size per round, log base 2 throughout.
double eat_V(const MinTradeoff& mt, double d_O);
double eat_Ka(const MinTradeoff& mt, double d_O, double a);  // a in (1,2)

// f at the honest statistics: p_key * (G0 + sum nu_pe . stats.pe
// + sum nu_tom . stats.tom); equals crossover_g at the honest conditional
// test distribution.
double f_at_p0(const DualCertificate& cert, const HonestStatistics& stats,
               double p_key);

// Conservative product-alphabet output dimension: 5 * 17 * 5 * (m + 1).
int default_output_dim(int module_count);

}  // namespace dmcv
