#include "dmcv/finite_rate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dmcv {

namespace {

constexpr double kLn2 = std::numbers::ln2;

double log2_ratio(double num, double den) { return std::log2(num / den); }

}  // namespace

double SecurityParams::eps_phys() const {
  return eps + std::sqrt(2.0 * eps_tom / eps_phys_na);
}

void SecurityParams::validate() const {
  if (!(n >= 1.0)) throw std::invalid_argument("n: must be >= 1");
  for (const auto& [v, name] :
       {std::pair{eps, "eps"}, {eps_phys_na, "eps_phys_na"}, {eps_tom, "eps_tom"},
        {eps_ec, "eps_ec"}, {eps_ec_c, "eps_ec_c"}, {eps_pe_c, "eps_pe_c"}})
    if (!(v > 0.0) || !(v < 1.0))
      throw std::invalid_argument(std::string(name) + ": must lie in (0, 1)");
  if (!(eps_tom < eps_phys_na / 2.0))
    throw std::invalid_argument("eps_tom: requires eps_tom < eps_phys_na / 2");
  const double slack = 1.0 - std::sqrt(2.0 * eps_tom / eps_phys_na);
  if (!(eps < slack))
    throw std::invalid_argument(
        "eps: requires eps < 1 - sqrt(2 eps_tom / eps_phys_na)");
  if (!(eps_phys() < 1.0))
    throw std::invalid_argument("eps: requires eps_phys < 1");
  if (!(a > 1.0) || !(a < 2.0))
    throw std::invalid_argument("a: must lie strictly in (1, 2)");
}

double gamma_fn(double x) {
  if (!(x > 0.0) || x > 1.0)
    throw std::invalid_argument("gamma_fn: x must lie in (0, 1]");
  // 1 - sqrt(1-x^2) = x^2 / (1 + sqrt(1-x^2)), exact and stable for small x.
  const double root = std::sqrt(std::max(0.0, 1.0 - x * x));
  return std::log2((1.0 + root) / (x * x));
}

double multinoulli_deviation(const RealVector& pi, const RealVector& h, double n,
                             double eps_fail) {
  const int k = static_cast<int>(pi.size());
  if (h.size() != k) throw std::invalid_argument("h: size must match pi");
  if (k < 1 || std::abs(h(k - 1)) != 0.0)
    throw std::invalid_argument("h: last entry must be 0");
  if (pi.minCoeff() < -1e-12 || std::abs(pi.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("pi: must lie on the probability simplex");
  if (!(n >= 1.0)) throw std::invalid_argument("n: must be >= 1");
  if (!(eps_fail > 0.0) || !(eps_fail < 1.0))
    throw std::invalid_argument("eps_fail: must lie in (0, 1)");

  // Suffix sums: tail_p(i) = sum_{j > i} pi_j, tail_hp(i) = sum_{j > i} h_j pi_j.
  RealVector tail_p = RealVector::Zero(k), tail_hp = RealVector::Zero(k);
  for (int i = k - 2; i >= 0; --i) {
    tail_p(i) = tail_p(i + 1) + pi(i + 1);
    tail_hp(i) = tail_hp(i + 1) + h(i + 1) * pi(i + 1);
  }

  double sum_gc2 = 0.0;
  double before = 1.0;  // 1 - sum_{j < i} pi_j
  for (int i = 0; i < k; ++i) {
    const double after = tail_p(i);  // 1 - sum_{j <= i} pi_j
    const double gamma = before > 0.0 ? pi(i) * after / before : 0.0;
    const double c = h(i) - (after > 0.0 ? tail_hp(i) / after : 0.0);
    sum_gc2 += gamma * c * c;
    before -= pi(i);
  }
  const double d_span = h.maxCoeff() - h.minCoeff();
  return 2.0 * std::sqrt(std::log2(n / eps_fail) * sum_gc2 / n) +
         (3.0 * d_span / n) * std::log2(2.0 / eps_fail);
}

double delta_tol_pe(const MinTradeoff& mt, const AssembledDistribution& p0,
                    double n, double eps_pe_c) {
  const int m = static_cast<int>(mt.h_pe.cols());
  RealVector pi(4 * m + 1), h(4 * m + 1);
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < m; ++z) {
      pi(x * m + z) = p0.pe(x, z);
      h(x * m + z) = mt.h_pe(x, z);
    }
  pi(4 * m) = std::max(0.0, 1.0 - p0.pe.sum());
  h(4 * m) = 0.0;
  return multinoulli_deviation(pi, h, n, eps_pe_c);
}

double delta_tol_tom(const MinTradeoff& mt, const AssembledDistribution& p0,
                     double n, double eps_tom) {
  RealVector pi(17), h(17);
  pi.head(16) = p0.tom;
  h.head(16) = mt.h_tom;
  pi(16) = std::max(0.0, 1.0 - p0.tom.sum());
  h(16) = 0.0;
  return multinoulli_deviation(pi, h, n, eps_tom);
}

double finite_key_rate(const DualCertificate& cert, const MinTradeoff& mt,
                       const HonestStatistics& stats, const SecurityParams& sec,
                       const RoundProbabilities& probs, double leak_rate,
                       double d_O) {
  sec.validate();
  const int m = static_cast<int>(cert.nu_pe.cols());
  if (d_O <= 0.0) d_O = static_cast<double>(default_output_dim(m));
  const AssembledDistribution p0 =
      assemble_p0(probs.key, probs.pe, probs.tom, stats);

  const double f0 = f_at_p0(cert, stats, probs.key);
  const double d_pe = delta_tol_pe(mt, p0, sec.n, sec.eps_pe_c);
  const double d_tom = delta_tol_tom(mt, p0, sec.n, sec.eps_tom);
  const double v = eat_V(mt, d_O);
  const double ka = eat_Ka(mt, d_O, sec.a);

  const double t = sec.a - 1.0;
  const double log5 = std::log2(5.0);
  const double log_out = std::log2(17.0 * (m + 1.0));
  const double eps_diff = sec.eps_phys_na - sec.eps_tom;
  const double eps2 = sec.eps * sec.eps;

  const double sqrt_terms =
      std::sqrt(0.5 * std::log(32.0 / (eps2 * eps_diff))) * log5 +
      std::sqrt(0.5 * std::log(512.0 / (eps2 * eps_diff))) * log_out;

  const double inv_n_terms =
      gamma_fn(sec.eps / 16.0) / t + (sec.a / t) * log2_ratio(1.0, eps_diff) +
      sec.n * leak_rate + 2.0 * log2_ratio(1.0, sec.eps_phys()) +
      2.0 * gamma_fn(sec.eps / 4.0) + 3.0 * gamma_fn(sec.eps / 16.0);

  return f0 - d_pe - d_tom - t * (kLn2 / 2.0) * v * v - t * t * ka -
         probs.pe * log5 - (1.0 - probs.key) * log_out -
         sqrt_terms / std::sqrt(sec.n) - inv_n_terms / sec.n;
}

double asymptotic_rate(const DualCertificate& cert, const HonestStatistics& stats,
                       double leak_rate_limit) {
  return f_at_p0(cert, stats, 1.0) - leak_rate_limit;
}

bool completeness_check(const SecurityParams& sec) {
  return 1.0 - sec.eps_pe_c - sec.eps_ec_c > sec.eps_phys_na;
}

RateGrids default_rate_grids() {
  RateGrids g;
  // Log-spaced a - 1 wide enough to bracket the n^(-3/4) schedule for
  // n in [1e10, 1e16].
  for (int i = 0; i < 12; ++i)
    g.a.push_back(1.0 + std::pow(10.0, -12.0 + 10.0 * i / 11.0));
  // p_key from 0.8 to 0.9999, log-spaced in 1 - p_key: the optimum sits near
  // 1 - p_key ~ n^(-1/2) scaled by the tradeoff spread, so density near 1
  // matters more than uniform coverage.
  for (int i = 0; i < 12; ++i)
    g.p_key.push_back(1.0 - 0.2 * std::pow(5.0e-4, i / 11.0));
  g.p_pe_cond = {0.5, 0.7, 0.9};
  return g;
}

RatePoint optimize_rate(const std::vector<CertifiedPoint>& points,
                        const RateGrids& grids, SecurityParams sec, double f_ec) {
  if (points.empty() || grids.a.empty() || grids.p_key.empty() ||
      grids.p_pe_cond.empty())
    throw std::invalid_argument("optimize_rate: empty grid");

  // Tie-break order: ascending a, descending p_key, ascending alpha; strict
  // improvement keeps the first candidate encountered.
  std::vector<double> as = grids.a, keys = grids.p_key;
  std::sort(as.begin(), as.end());
  std::sort(keys.begin(), keys.end(), std::greater<>());
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return points[i].cert.scheme.alpha < points[j].cert.scheme.alpha;
  });

  RatePoint best;
  best.finite_rate = -std::numeric_limits<double>::infinity();
  for (const double a : as) {
    sec.a = a;
    for (const double p_key : keys) {
      for (const std::size_t idx : order) {
        const CertifiedPoint& pt = points[idx];
        const double leak = ec_leak_rate(pt.stats.ec, f_ec, p_key);
        const double asym =
            asymptotic_rate(pt.cert, pt.stats, ec_leak_rate(pt.stats.ec, f_ec, 1.0));
        for (const double ppc : grids.p_pe_cond) {
          const RoundProbabilities probs{p_key, (1.0 - p_key) * ppc,
                                         (1.0 - p_key) * (1.0 - ppc)};
          const MinTradeoff mt =
              min_tradeoff_from_crossover(pt.cert, p_key, probs.pe, probs.tom);
          const double rate =
              finite_key_rate(pt.cert, mt, pt.stats, sec, probs, leak);
          if (rate > best.finite_rate) {
            best.alpha = pt.cert.scheme.alpha;
            best.a = a;
            best.p_key = p_key;
            best.p_pe_cond = ppc;
            best.asymptotic_rate = asym;
            best.finite_rate = rate;
            best.delta_pe = delta_tol_pe(
                mt, assemble_p0(probs.key, probs.pe, probs.tom, pt.stats), sec.n,
                sec.eps_pe_c);
            best.delta_tom = delta_tol_tom(
                mt, assemble_p0(probs.key, probs.pe, probs.tom, pt.stats), sec.n,
                sec.eps_tom);
            best.eps_prime = pt.cert.eps_prime;
            best.lambda_min = pt.cert.lambda_min;
            best.gap = pt.cert.primal_ub > 0.0
                           ? (pt.cert.primal_ub - pt.cert.lower_bound) /
                                 pt.cert.primal_ub
                           : 0.0;
          }
        }
      }
    }
  }
  best.positive = best.finite_rate > 0.0;
  return best;
}

}  // namespace dmcv
