#pragma once

#include "dmcv/tradeoff.hpp"

namespace dmcv {

/// Security budget of a finite-size run.  All epsilons in (0,1); a is the
/// Renyi parameter in (1,2).
struct SecurityParams {
  double n = 1e12;           // round count
  double eps = 1e-9;         // smoothing
  double eps_phys_na = 1e-3;
  double eps_tom = 1e-8;
  double eps_ec = 1e-10;
  double eps_ec_c = 1e-6;
  double eps_pe_c = 1e-6;
  double a = 1.0 + 1e-8;

  double eps_phys() const;  // eps + sqrt(2 eps_tom / eps_phys_na)
  // Throws std::invalid_argument naming the violated relation.
  void validate() const;
};

/// Round-type probabilities (key, parameter estimation, tomography).
struct RoundProbabilities {
  double key = 0.0;
  double pe = 0.0;
  double tom = 0.0;
};

struct RatePoint {
  double alpha = 0.0;
  double a = 0.0;
  double p_key = 0.0;
  double p_pe_cond = 0.0;
  double asymptotic_rate = 0.0;
  double finite_rate = 0.0;
  double delta_pe = 0.0;
  double delta_tom = 0.0;
  double eps_prime = 0.0;
  double lambda_min = 0.0;
  double gap = 0.0;   // certificate relative duality gap
  bool positive = false;
};

// Gamma(x) = -log2(1 - sqrt(1 - x^2)) for x in (0, 1], evaluated stably for
// small x; Gamma(1) = 0.
double gamma_fn(double x);

// Concentration bound for an affine statistic h of n multinoulli draws from
// pi: deviation exceeding the returned value has probability <= eps_fail.
// The last h entry must be 0 (remainder symbol); log base 2.
double multinoulli_deviation(const RealVector& pi, const RealVector& h, double n,
                             double eps_fail);

// Tolerances for the parameter-estimation and tomography tests, from the
// assembled round distribution p0 and the min-tradeoff coefficients.
double delta_tol_pe(const MinTradeoff& mt, const AssembledDistribution& p0,
                    double n, double eps_pe_c);
double delta_tol_tom(const MinTradeoff& mt, const AssembledDistribution& p0,
                     double n, double eps_tom);

// Finite-size key rate in bits/round; may be negative.  leak_rate is the
// per-round error-correction leakage, already scaled by p_key if the
// key-round convention is in use.  d_O <= 0 selects the default product
// alphabet dimension.
double finite_key_rate(const DualCertificate& cert, const MinTradeoff& mt,
                       const HonestStatistics& stats, const SecurityParams& sec,
                       const RoundProbabilities& probs, double leak_rate,
                       double d_O = 0.0);

// Asymptotic rate: f at the honest statistics with p_key -> 1 minus the leak.
double asymptotic_rate(const DualCertificate& cert, const HonestStatistics& stats,
                       double leak_rate_limit);

// 1 - eps_pe_c - eps_ec_c > eps_phys_na.
bool completeness_check(const SecurityParams& sec);

/// One solved (channel, scheme) point the grid search can reuse.
struct CertifiedPoint {
  DualCertificate cert;
  HonestStatistics stats;
};

struct RateGrids {
  std::vector<double> a;          // subset of (1, 2)
  std::vector<double> p_key;      // subset of (0, 1)
  std::vector<double> p_pe_cond;  // PE share of a test round
};

RateGrids default_rate_grids();

// Maximize the finite rate over the grids and the supplied certified points
// (one per alpha).  Deterministic tie-break: smallest a, then largest p_key,
// then smallest alpha.  Returns the best point even if negative.
RatePoint optimize_rate(const std::vector<CertifiedPoint>& points,
                        const RateGrids& grids, SecurityParams sec, double f_ec);

}  // namespace dmcv
