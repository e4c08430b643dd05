#include "dmcv/tradeoff.hpp"

#include <cmath>
#include <numbers>

namespace dmcv {

namespace {

constexpr double kLn2 = std::numbers::ln2;

void check_weights(double p_key, double p_pe_cond) {
  if (!(p_key >= 0.0) || !(p_key < 1.0))
    throw std::invalid_argument("p_key: must lie in [0, 1)");
  if (!(p_pe_cond > 0.0) || !(p_pe_cond < 1.0))
    throw std::invalid_argument("p_pe_cond: must lie strictly in (0, 1)");
}

}  // namespace

double crossover_g(const DualCertificate& cert, const RealVector& p_tilde,
                   double p_key, double p_pe_cond) {
  check_weights(p_key, p_pe_cond);
  const int m = static_cast<int>(cert.nu_pe.cols());
  if (p_tilde.size() != 4 * m + 16)
    throw std::invalid_argument("p_tilde: expected 4m + 16 test symbols");
  const double p_tom_cond = 1.0 - p_pe_cond;
  double acc = cert.g0;
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < m; ++z)
      acc += cert.nu_pe(x, z) * p_tilde(x * m + z) / p_pe_cond;
  for (int i = 0; i < 16; ++i)
    acc += cert.nu_tom(i) * p_tilde(4 * m + i) / p_tom_cond;
  return p_key * acc;
}

std::pair<double, double> g_extremes(const DualCertificate& cert, double p_key,
                                     double p_pe_cond) {
  check_weights(p_key, p_pe_cond);
  const double p_tom_cond = 1.0 - p_pe_cond;
  double nu_max = cert.nu_pe.maxCoeff() / p_pe_cond;
  double nu_min = cert.nu_pe.minCoeff() / p_pe_cond;
  nu_max = std::max(nu_max, cert.nu_tom.maxCoeff() / p_tom_cond);
  nu_min = std::min(nu_min, cert.nu_tom.minCoeff() / p_tom_cond);
  return {p_key * (cert.g0 + nu_max), p_key * (cert.g0 + nu_min)};
}

MinTradeoff min_tradeoff_from_crossover(const DualCertificate& cert, double p_key,
                                        double p_pe, double p_tom) {
  if (!(p_pe > 0.0) || !(p_tom > 0.0) ||
      std::abs(p_key + p_pe + p_tom - 1.0) > 1e-12)
    throw std::invalid_argument(
        "round probabilities must lie on the simplex with p_pe, p_tom > 0");
  if (p_key >= 1.0) throw std::invalid_argument("p_key: must be < 1");
  const double p_pe_cond = p_pe / (p_pe + p_tom);
  const double p_tom_cond = 1.0 - p_pe_cond;

  MinTradeoff mt;
  mt.p_key = p_key;
  mt.p_pe_cond = p_pe_cond;
  std::tie(mt.max_g, mt.min_g) = g_extremes(cert, p_key, p_pe_cond);
  const double nu_max = std::max(cert.nu_pe.maxCoeff() / p_pe_cond,
                                 cert.nu_tom.maxCoeff() / p_tom_cond);
  const int m = static_cast<int>(cert.nu_pe.cols());
  const double scale = p_key / (1.0 - p_key);
  mt.h_pe.resize(4, m);
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < m; ++z)
      mt.h_pe(x, z) = scale * (cert.nu_pe(x, z) / p_pe_cond - nu_max);
  mt.h_tom.resize(16);
  for (int i = 0; i < 16; ++i)
    mt.h_tom(i) = scale * (cert.nu_tom(i) / p_tom_cond - nu_max);
  mt.constant = p_key * (cert.g0 + nu_max);
  return mt;
}

double eval_min_tradeoff(const MinTradeoff& mt, const RealVector& p) {
  const int m = static_cast<int>(mt.h_pe.cols());
  if (p.size() != 4 * m + 17)
    throw std::invalid_argument("p: expected 4m + 16 test symbols plus remainder");
  double acc = mt.constant;
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < m; ++z) acc += mt.h_pe(x, z) * p(x * m + z);
  for (int i = 0; i < 16; ++i) acc += mt.h_tom(i) * p(4 * m + i);
  return acc;  // the remainder symbol carries coefficient 0
}

double eat_V(const MinTradeoff& mt, double d_O) {
  if (!(d_O >= 2.0)) throw std::invalid_argument("d_O: must be >= 2");
  const double spread = mt.max_g - mt.min_g;
  return std::sqrt(spread * spread / (1.0 - mt.p_key) + 2.0) +
         std::log2(2.0 * d_O * d_O + 1.0);
}

double eat_Ka(const MinTradeoff& mt, double d_O, double a) {
  if (!(d_O >= 2.0)) throw std::invalid_argument("d_O: must be >= 2");
  if (!(a > 1.0) || !(a < 2.0))
    throw std::invalid_argument("a: must lie strictly in (1, 2)");
  const double exponent = 2.0 * std::log2(d_O) + (mt.max_g - mt.min_g);
  const double log_arg = std::log(std::exp2(exponent) + std::exp(2.0));
  return std::exp2((a - 1.0) * exponent) * log_arg * log_arg * log_arg /
         (6.0 * std::pow(2.0 - a, 3.0) * kLn2);
}

double f_at_p0(const DualCertificate& cert, const HonestStatistics& stats,
               double p_key) {
  const int m = static_cast<int>(cert.nu_pe.cols());
  if (stats.pe.cols() != m)
    throw std::invalid_argument("statistics and certificate module counts differ");
  double acc = cert.g0;
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < m; ++z) acc += cert.nu_pe(x, z) * stats.pe(x, z);
  acc += cert.nu_tom.dot(stats.tom);
  return p_key * acc;
}

int default_output_dim(int module_count) {
  return 5 * 17 * 5 * (module_count + 1);
}

}  // namespace dmcv
