#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dmcv/finite_rate.hpp"

using namespace dmcv;

namespace {

DualCertificate synthetic_cert(int m, double g0, double nu_scale,
                               std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  DualCertificate cert;
  cert.g0 = g0;
  cert.nu_pe = RealMatrix::Zero(4, m);
  cert.nu_tom = RealVector::Zero(16);
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < m; ++z) cert.nu_pe(x, z) = nu_scale * gauss(rng);
  for (int i = 0; i < 16; ++i) cert.nu_tom(i) = nu_scale * gauss(rng);
  return cert;
}

RealVector random_simplex(int n, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo;
  RealVector p(n);
  for (int i = 0; i < n; ++i) p(i) = expo(rng);
  return p / p.sum();
}

HonestStatistics synthetic_stats(int m, std::mt19937_64& rng) {
  HonestStatistics stats;
  const RealVector pe = random_simplex(4 * m, rng);
  stats.pe = Eigen::Map<const RealMatrix>(pe.data(), 4, m);
  stats.ec = RealMatrix::Constant(4, 4, 1.0 / 16.0);
  stats.tom = random_simplex(16, rng);
  return stats;
}

}  // namespace

TEST_CASE("gamma_fn") {
  CHECK(gamma_fn(1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(gamma_fn(0.6) == doctest::Approx(std::log2(5.0)).epsilon(1e-14));
  // For x = 1e-9 the value is log2(2e18) up to a 1e-19 relative correction.
  CHECK(gamma_fn(1e-9) ==
        doctest::Approx(1.0 + 18.0 * std::log2(10.0)).epsilon(1e-14));
  // Monotone decreasing on (0, 1].
  double prev = gamma_fn(1e-12);
  for (double x : {1e-9, 1e-6, 1e-3, 0.1, 0.5, 0.9, 1.0}) {
    const double v = gamma_fn(x);
    CHECK(v < prev);
    prev = v;
  }
  CHECK_THROWS_AS(gamma_fn(0.0), std::invalid_argument);
  CHECK_THROWS_AS(gamma_fn(-0.5), std::invalid_argument);
  CHECK_THROWS_AS(gamma_fn(1.5), std::invalid_argument);
}

TEST_CASE("multinoulli_deviation hand values") {
  const double n = 1e6, eps = 1e-3;

  // Two symbols: the chain collapses to a single Bernoulli term.
  RealVector pi(2), h(2);
  pi << 0.3, 0.7;
  h << -1.7, 0.0;
  const double var = 0.3 * 0.7 * 1.7 * 1.7;
  const double expected = 2.0 * std::sqrt(std::log2(n / eps) * var / n) +
                          (3.0 * 1.7 / n) * std::log2(2.0 / eps);
  CHECK(multinoulli_deviation(pi, h, n, eps) ==
        doctest::Approx(expected).epsilon(1e-13));

  // Constant-zero coefficients carry no deviation at all.
  RealVector h0 = RealVector::Zero(2);
  CHECK(multinoulli_deviation(pi, h0, n, eps) == 0.0);

  // Zero-probability symbols do not contribute and never divide by zero.
  RealVector pi4(4), h4(4);
  pi4 << 0.3, 0.0, 0.7, 0.0;
  h4 << -1.7, 5.0, 0.0, 0.0;
  const double with_zero = multinoulli_deviation(pi4, h4, n, eps);
  CHECK(std::isfinite(with_zero));
  // The padded instance only widens the coefficient span (second term).
  RealVector h4b(4);
  h4b << -1.7, -1.0, 0.0, 0.0;
  CHECK(multinoulli_deviation(pi4, h4b, n, eps) ==
        doctest::Approx(expected).epsilon(1e-13));

  CHECK_THROWS_AS(multinoulli_deviation(pi, RealVector::Ones(2), n, eps),
                  std::invalid_argument);
  CHECK_THROWS_AS(multinoulli_deviation(pi, RealVector::Zero(3), n, eps),
                  std::invalid_argument);
  RealVector bad = pi * 2.0;
  CHECK_THROWS_AS(multinoulli_deviation(bad, h, n, eps), std::invalid_argument);
  CHECK_THROWS_AS(multinoulli_deviation(pi, h, 0.5, eps), std::invalid_argument);
  CHECK_THROWS_AS(multinoulli_deviation(pi, h, n, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(multinoulli_deviation(pi, h, n, 1.0), std::invalid_argument);
}

TEST_CASE("multinoulli_deviation symbol-order invariance") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  const int k = 6;
  RealVector pi = random_simplex(k, rng);
  RealVector h(k);
  for (int i = 0; i < k - 1; ++i) h(i) = gauss(rng);
  h(k - 1) = 0.0;
  const double base = multinoulli_deviation(pi, h, 1e8, 1e-4);
  std::vector<int> perm = {0, 1, 2, 3, 4};
  for (int t = 0; t < 10; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    RealVector pp(k), hp(k);
    for (int i = 0; i < k - 1; ++i) {
      pp(i) = pi(perm[i]);
      hp(i) = h(perm[i]);
    }
    pp(k - 1) = pi(k - 1);
    hp(k - 1) = 0.0;
    CHECK(multinoulli_deviation(pp, hp, 1e8, 1e-4) ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("multinoulli_deviation concentration by simulation") {
  // 3-symbol multinoulli, n = 1e4 draws per trial, 2e5 trials: empirical
  // exceedance of the affine statistic must respect the failure budget.
  RealVector pi(3), h(3);
  pi << 0.2, 0.5, 0.3;
  h << 4.0, -2.0, 0.0;
  const double n = 1e4, eps_fail = 0.1;
  const double delta = multinoulli_deviation(pi, h, n, eps_fail);
  const double mean = h.dot(pi);

  std::mt19937_64 rng(20260823);
  const int trials = 200000;
  int violations = 0;
  for (int t = 0; t < trials; ++t) {
    std::binomial_distribution<int> b0(static_cast<int>(n), pi(0));
    const int n0 = b0(rng);
    std::binomial_distribution<int> b1(static_cast<int>(n) - n0,
                                       pi(1) / (1.0 - pi(0)));
    const int n1 = b1(rng);
    const double stat = (h(0) * n0 + h(1) * n1) / n;
    if (std::abs(stat - mean) > delta) ++violations;
  }
  CHECK(violations <= eps_fail * trials);
  // The bound is not vacuous: the tolerance is a small multiple of the
  // binomial standard deviation scale.
  CHECK(delta < 0.5);
  CHECK(delta > 0.01);
}

TEST_CASE("delta_tol scaling under the test-fraction schedule") {
  std::mt19937_64 rng(31);
  const int m = 8;
  const DualCertificate cert = synthetic_cert(m, 1.0, 0.2, rng);
  const HonestStatistics stats = synthetic_stats(m, rng);

  // p_key = 1 - n^(-1/2): the tolerances should shrink like
  // sqrt(log n) n^(-1/4) modulo slowly varying factors.
  double prev_pe = 1e30, prev_tom = 1e30;
  std::vector<double> scaled;
  for (double n : {1e8, 1e10, 1e12, 1e14, 1e16}) {
    const double p_key = 1.0 - std::pow(n, -0.5);
    const RoundProbabilities probs{p_key, (1.0 - p_key) * 0.5,
                                   (1.0 - p_key) * 0.5};
    const MinTradeoff mt =
        min_tradeoff_from_crossover(cert, p_key, probs.pe, probs.tom);
    const AssembledDistribution p0 =
        assemble_p0(probs.key, probs.pe, probs.tom, stats);
    const double d_pe = delta_tol_pe(mt, p0, n, 1e-6);
    const double d_tom = delta_tol_tom(mt, p0, n, 1e-8);
    CHECK(d_pe > 0.0);
    CHECK(d_tom > 0.0);
    CHECK(d_pe < prev_pe);
    CHECK(d_tom < prev_tom);
    prev_pe = d_pe;
    prev_tom = d_tom;
    scaled.push_back(d_pe * std::pow(n, 0.25) / std::sqrt(std::log2(n)));
  }
  const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
  CHECK(*hi / *lo < 1.5);
}

TEST_CASE("finite_key_rate approaches the asymptotic rate") {
  std::mt19937_64 rng(47);
  const int m = 8;
  // Small multiplier spread keeps the accumulation overheads mild so the
  // finite rate converges at numerically accessible round counts.
  const DualCertificate cert = synthetic_cert(m, 1.0, 0.01, rng);
  const HonestStatistics stats = synthetic_stats(m, rng);
  const double asym = asymptotic_rate(cert, stats, 0.0);
  CHECK(asym == doctest::Approx(f_at_p0(cert, stats, 1.0)).epsilon(1e-14));

  SecurityParams sec;
  double prev = -1e30;
  double last_rate = 0.0;
  for (double n : {1e10, 1e12, 1e14, 1e16, 1e18}) {
    sec.n = n;
    sec.a = 1.0 + std::pow(n, -0.75);
    const double p_key = 1.0 - std::pow(n, -0.5);
    const RoundProbabilities probs{p_key, (1.0 - p_key) * 0.5,
                                   (1.0 - p_key) * 0.5};
    const MinTradeoff mt =
        min_tradeoff_from_crossover(cert, p_key, probs.pe, probs.tom);
    const double rate = finite_key_rate(cert, mt, stats, sec, probs, 0.0);
    CHECK(rate <= asym + 1e-9);
    CHECK(rate >= prev);
    prev = rate;
    last_rate = rate;
  }
  // Residual overhead at n = 1e18 is dominated by Gamma(eps/16) n^(-1/4).
  CHECK(asym - last_rate < 5e-3);
}

TEST_CASE("finite_key_rate diverges as a approaches 2") {
  std::mt19937_64 rng(53);
  const int m = 8;
  const DualCertificate cert = synthetic_cert(m, 1.0, 0.01, rng);
  const HonestStatistics stats = synthetic_stats(m, rng);
  SecurityParams sec;
  sec.n = 1e12;
  const double p_key = 0.999;
  const RoundProbabilities probs{p_key, 0.0005, 0.0005};
  const MinTradeoff mt =
      min_tradeoff_from_crossover(cert, p_key, probs.pe, probs.tom);
  sec.a = 1.0 + 1e-6;
  const double moderate = finite_key_rate(cert, mt, stats, sec, probs, 0.0);
  sec.a = 1.999;
  const double extreme = finite_key_rate(cert, mt, stats, sec, probs, 0.0);
  CHECK(extreme < moderate);
  CHECK(extreme < -1e6);
}

TEST_CASE("SecurityParams validation and completeness") {
  SecurityParams sec;
  CHECK_NOTHROW(sec.validate());
  CHECK(sec.eps_phys() ==
        doctest::Approx(sec.eps + std::sqrt(2.0 * sec.eps_tom / sec.eps_phys_na))
            .epsilon(1e-14));
  CHECK(completeness_check(sec));

  SecurityParams bad = sec;
  bad.n = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = sec;
  bad.eps = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = sec;
  bad.eps_tom = bad.eps_phys_na;  // breaks eps_tom < eps_phys_na / 2
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = sec;
  bad.eps = 0.999;  // breaks eps < 1 - sqrt(2 eps_tom / eps_phys_na)
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = sec;
  bad.a = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = sec;
  bad.a = 2.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  SecurityParams loose = sec;
  loose.eps_pe_c = 0.5;
  loose.eps_ec_c = 0.5;
  CHECK_FALSE(completeness_check(loose));
}

TEST_CASE("default_rate_grids coverage") {
  const RateGrids g = default_rate_grids();
  CHECK(g.a.size() == 12);
  CHECK(g.p_key.size() == 12);
  CHECK(g.p_pe_cond.size() == 3);
  for (double a : g.a) {
    CHECK(a > 1.0);
    CHECK(a < 2.0);
  }
  CHECK(g.a.front() == doctest::Approx(1.0 + 1e-12).epsilon(1e-3));
  CHECK(g.a.back() == doctest::Approx(1.01).epsilon(1e-3));
  for (double p : g.p_key) {
    CHECK(p >= 0.8 - 1e-12);
    CHECK(p <= 0.9999 + 1e-12);
  }
  CHECK(g.p_key.front() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(g.p_key.back() == doctest::Approx(0.9999).epsilon(1e-12));
  // Bracket the schedule a - 1 = n^(-3/4) for n in [1e10, 1e15].
  CHECK(g.a.front() - 1.0 < std::pow(1e15, -0.75));
  CHECK(g.a.back() - 1.0 > std::pow(1e10, -0.75));
}

TEST_CASE("optimize_rate grid search") {
  std::mt19937_64 rng(61);
  const int m = 8;
  CertifiedPoint p1{synthetic_cert(m, 1.0, 0.02, rng), synthetic_stats(m, rng)};
  p1.cert.scheme.alpha = 0.7;
  CertifiedPoint p2{synthetic_cert(m, 0.5, 0.02, rng), synthetic_stats(m, rng)};
  p2.cert.scheme.alpha = 0.9;
  SecurityParams sec;
  sec.n = 1e12;

  // Singleton grids reproduce a direct evaluation.
  RateGrids single;
  single.a = {1.0 + 1e-8};
  single.p_key = {0.999};
  single.p_pe_cond = {0.5};
  const RatePoint rp = optimize_rate({p1}, single, sec, 0.02);
  const RoundProbabilities probs{0.999, 0.0005, 0.0005};
  const MinTradeoff mt =
      min_tradeoff_from_crossover(p1.cert, 0.999, probs.pe, probs.tom);
  SecurityParams direct = sec;
  direct.a = 1.0 + 1e-8;
  const double leak = ec_leak_rate(p1.stats.ec, 0.02, 0.999);
  CHECK(rp.finite_rate ==
        doctest::Approx(finite_key_rate(p1.cert, mt, p1.stats, direct, probs, leak))
            .epsilon(1e-13));
  CHECK(rp.alpha == 0.7);
  CHECK(rp.a == 1.0 + 1e-8);
  CHECK(rp.p_key == 0.999);
  CHECK(rp.p_pe_cond == 0.5);
  CHECK(rp.asymptotic_rate ==
        doctest::Approx(asymptotic_rate(p1.cert, p1.stats,
                                        ec_leak_rate(p1.stats.ec, 0.02, 1.0)))
            .epsilon(1e-13));
  CHECK(rp.positive == (rp.finite_rate > 0.0));
  CHECK(rp.finite_rate <= rp.asymptotic_rate + 1e-9);

  // A superset of grids and points can only improve the optimum.
  const RateGrids grids = default_rate_grids();
  const RatePoint one = optimize_rate({p1}, grids, sec, 0.02);
  const RatePoint both = optimize_rate({p1, p2}, grids, sec, 0.02);
  CHECK(both.finite_rate >= one.finite_rate - 1e-15);
  RateGrids wider = grids;
  wider.p_pe_cond.push_back(0.35);
  const RatePoint wide = optimize_rate({p1, p2}, wider, sec, 0.02);
  CHECK(wide.finite_rate >= both.finite_rate - 1e-15);
  CHECK(one.finite_rate <= one.asymptotic_rate + 1e-9);

  // Determinism and the tie-break toward the smaller alpha.
  CertifiedPoint twin = p1;
  twin.cert.scheme.alpha = 0.8;
  const RatePoint tied = optimize_rate({twin, p1}, single, sec, 0.02);
  CHECK(tied.alpha == 0.7);
  const RatePoint again = optimize_rate({p1, p2}, grids, sec, 0.02);
  CHECK(again.finite_rate == both.finite_rate);
  CHECK(again.a == both.a);
  CHECK(again.p_key == both.p_key);
  CHECK(again.alpha == both.alpha);

  CHECK_THROWS_AS(optimize_rate({}, grids, sec, 0.02), std::invalid_argument);
  RateGrids empty = grids;
  empty.a.clear();
  CHECK_THROWS_AS(optimize_rate({p1}, empty, sec, 0.02), std::invalid_argument);
}

TEST_CASE("finite rate from a solved low-cutoff instance") {
  const ModulationScheme scheme{0.9, 0.9, 0.9, 6};
  const HonestChannel channel{10.0, 0.2, 0.01};
  const auto ctx = make_objective_context(scheme);
  std::vector<Matrix> ops;
  for (const auto& label : constraint_operators(scheme))
    ops.push_back(label.op.data);
  const HonestStatistics stats = honest_statistics(channel, scheme);
  FwOptions opts;
  opts.max_iter = 60;
  const FwResult res = frank_wolfe(ctx, ops, constraint_rhs(stats), opts);

  SecurityParams sec;
  sec.n = 1e12;
  const RatePoint rp =
      optimize_rate({{res.certificate, stats}}, default_rate_grids(), sec, 0.01);
  CHECK(std::isfinite(rp.finite_rate));
  CHECK(rp.finite_rate <= rp.asymptotic_rate + 1e-9);
  CHECK(rp.delta_pe > 0.0);
  CHECK(rp.delta_tom > 0.0);
  CHECK(rp.gap >= 0.0);
  CHECK(rp.eps_prime >= 0.0);

  // More rounds never hurt the optimized rate.
  SecurityParams sec15 = sec;
  sec15.n = 1e15;
  const RatePoint rp15 =
      optimize_rate({{res.certificate, stats}}, default_rate_grids(), sec15, 0.01);
  CHECK(rp15.finite_rate >= rp.finite_rate - 1e-12);
}
