#include "dmcv/honest_model.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace dmcv {

namespace {

constexpr double kPi = std::numbers::pi;

using AngularRule = boost::math::quadrature::gauss<double, 64>;
using RadialRule = boost::math::quadrature::gauss_kronrod<double, 31>;

// Heterodyne outcome density around a displaced coherent state, integrated
// over one wedge-ring cell with the 1/4 state prior folded in.
double cell_mass(Complex center, double variance, double theta1, double theta2,
                 double r_low, double r_high) {
  const double mag = std::abs(center);
  const double phase = std::arg(center);
  const auto radial = [&](double gamma) {
    // One joint exponent per node; splitting off exp(-gamma^2/v) overflows the
    // angular factor at the semi-infinite endpoint.
    const auto angular = [&](double theta) {
      const double diff2 = gamma * gamma + mag * mag -
                           2.0 * gamma * mag * std::cos(theta - phase);
      return std::exp(-diff2 / variance);
    };
    const double ang = AngularRule::integrate(angular, theta1, theta2);
    return gamma * ang / (4.0 * kPi * variance);
  };
  double err = 0.0;
  const double value = RadialRule::integrate(radial, r_low, r_high, 15, 1e-13, &err);
  if (err > 1e-10)
    throw std::runtime_error("cell_mass: radial quadrature failed to reach 1e-10");
  return value;
}

}  // namespace

double transmittance(double distance_km, double attenuation_db_per_km) {
  if (distance_km < 0.0) throw std::invalid_argument("distance_km must be >= 0");
  if (!(attenuation_db_per_km > 0.0))
    throw std::invalid_argument("attenuation_db_per_km must be > 0");
  return std::pow(10.0, -attenuation_db_per_km * distance_km / 10.0);
}

double HonestChannel::transmittance() const {
  return dmcv::transmittance(distance_km, attenuation_db_per_km);
}

double HonestChannel::heterodyne_variance() const {
  return 1.0 + transmittance() * excess_noise / 2.0;
}

void HonestChannel::validate() const {
  if (distance_km < 0.0) throw std::invalid_argument("distance_km: must be >= 0");
  if (!(attenuation_db_per_km > 0.0))
    throw std::invalid_argument("attenuation_db_per_km: must be > 0");
  if (excess_noise < 0.0) throw std::invalid_argument("xi: must be >= 0");
}

RealMatrix pe_statistics(const HonestChannel& channel, const ModulationScheme& scheme) {
  channel.validate();
  scheme.validate();
  const double eta = channel.transmittance();
  const double v = channel.heterodyne_variance();
  const auto phi = alice_amplitudes(scheme.alpha);
  const int m = scheme.module_count();
  RealMatrix p(4, m);
  for (int x = 0; x < 4; ++x) {
    const Complex center = std::sqrt(eta) * phi[x];
    for (int z = 0; z < m; ++z) {
      const int wedge = z % 4;
      const int ring = z / 4;
      const double theta1 = kPi * (2 * wedge - 1) / 4.0;
      const double theta2 = kPi * (2 * wedge + 1) / 4.0;
      const double r_low =
          ring == scheme.rings() ? scheme.delta_amp : scheme.delta_mod * ring;
      const double r_high = ring == scheme.rings()
                                ? std::numeric_limits<double>::infinity()
                                : scheme.delta_mod * (ring + 1);
      p(x, z) = cell_mass(center, v, theta1, theta2, r_low, r_high);
    }
  }
  return p;
}

RealMatrix key_statistics(const HonestChannel& channel, const ModulationScheme& scheme) {
  channel.validate();
  scheme.validate();
  const double eta = channel.transmittance();
  const double v = channel.heterodyne_variance();
  const auto phi = alice_amplitudes(scheme.alpha);
  RealMatrix p(4, 4);
  for (int x = 0; x < 4; ++x) {
    const Complex center = std::sqrt(eta) * phi[x];
    for (int z = 0; z < 4; ++z) {
      const double theta1 = kPi * (2 * z - 1) / 4.0;
      const double theta2 = kPi * (2 * z + 1) / 4.0;
      p(x, z) = cell_mass(center, v, theta1, theta2, 0.0,
                          std::numeric_limits<double>::infinity());
    }
  }
  return p;
}

RealVector tom_statistics(double alpha, const std::vector<FockOperator>& povm) {
  const FockOperator rho = alice_marginal(alpha);
  RealVector p(povm.size());
  for (std::size_t i = 0; i < povm.size(); ++i)
    p(i) = (povm[i].data * rho.data).trace().real();
  return p;
}

HonestStatistics honest_statistics(const HonestChannel& channel,
                                   const ModulationScheme& scheme) {
  return HonestStatistics{pe_statistics(channel, scheme),
                          key_statistics(channel, scheme),
                          tom_statistics(scheme.alpha, ic_povm())};
}

AssembledDistribution assemble_p0(double p_key, double p_pe, double p_tom,
                                  const HonestStatistics& stats) {
  if (p_key < 0.0 || p_pe < 0.0 || p_tom < 0.0 ||
      std::abs(p_key + p_pe + p_tom - 1.0) > 1e-12)
    throw std::invalid_argument("round probabilities must lie on the simplex");
  AssembledDistribution d;
  d.pe = p_pe * stats.pe;
  d.tom = p_tom * stats.tom;
  d.rest = 1.0 - d.pe.sum() - d.tom.sum();
  return d;
}

double ec_leak_rate(const RealMatrix& ec, double f, double p_key,
                    bool per_round_fraction) {
  if (f < 0.0) throw std::invalid_argument("f must be >= 0");
  double h = 0.0;  // H(Zhat|Xhat) in bits, 0 log 0 = 0
  for (int x = 0; x < ec.rows(); ++x) {
    const double px = ec.row(x).sum();
    for (int z = 0; z < ec.cols(); ++z) {
      const double pxz = ec(x, z);
      if (pxz > 0.0 && px > 0.0) h -= pxz * std::log2(pxz / px);
    }
  }
  return (per_round_fraction ? p_key : 1.0) * (1.0 + f) * h;
}

RealMatrix sample_rounds(const HonestChannel& channel, const ModulationScheme& scheme,
                         std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  channel.validate();
  scheme.validate();
  const double eta = channel.transmittance();
  const double sigma = std::sqrt(channel.heterodyne_variance() / 2.0);
  const auto phi = alice_amplitudes(scheme.alpha);
  const int nrings = scheme.rings();
  std::mt19937_64 rng(seed);
  const auto uniform01 = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
  };

  RealMatrix freq = RealMatrix::Zero(4, scheme.module_count());
  for (std::int64_t i = 0; i < n; ++i) {
    const int x = static_cast<int>(rng() & 3u);
    // Box-Muller; hand-rolled so fixed seeds reproduce across toolchains.
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const Complex noise(r * std::cos(2.0 * kPi * u2), r * std::sin(2.0 * kPi * u2));
    const Complex y = std::sqrt(eta) * phi[x] + sigma * noise;

    const double radius = std::abs(y);
    double theta = std::arg(y);  // (-pi, pi]
    int wedge = static_cast<int>(std::floor((theta + kPi / 4.0) / (kPi / 2.0)));
    wedge = ((wedge % 4) + 4) % 4;
    const int ring = radius >= scheme.delta_amp
                         ? nrings
                         : static_cast<int>(std::floor(radius / scheme.delta_mod));
    freq(x, wedge + 4 * ring) += 1.0;
  }
  return freq / static_cast<double>(n);
}

}  // namespace dmcv
