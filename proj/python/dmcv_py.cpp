#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dmcv/reports.hpp"

namespace py = pybind11;
using namespace dmcv;

namespace {

// One solved sweep point bundled for Python consumption.
struct SolveResult {
  DualCertificate certificate;
  HonestStatistics stats;
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  bool converged = false;
  int iterations = 0;
};

SolveResult solve_asymptotic(const ModulationScheme& scheme,
                             const HonestChannel& channel, int max_iter,
                             double gap, int lb_cadence) {
  SolveResult out;
  const auto ctx = make_objective_context(scheme);
  std::vector<Matrix> ops;
  for (const auto& labeled : constraint_operators(scheme))
    ops.push_back(labeled.op.data);
  out.stats = honest_statistics(channel, scheme);
  FwOptions opts;
  opts.max_iter = max_iter;
  opts.gap = gap;
  opts.lb_cadence = lb_cadence;
  FwResult res = frank_wolfe(ctx, ops, constraint_rhs(out.stats), opts);
  res.certificate.channel = channel;
  out.certificate = res.certificate;
  out.upper_bound = res.upper_bound;
  out.lower_bound = res.lower_bound;
  out.converged = res.trace.converged;
  out.iterations = static_cast<int>(res.trace.iterates.size());
  return out;
}

}  // namespace

PYBIND11_MODULE(_dmcv, m) {
  m.doc() = "Certified asymptotic and finite-size key rates for "
            "discrete-modulated CV-QKD";

  py::class_<ModulationScheme>(m, "ModulationScheme")
      .def(py::init<double, double, double, int>(), py::arg("alpha") = 0.9,
           py::arg("delta_amp") = 0.9, py::arg("delta_mod") = 0.9,
           py::arg("cutoff") = 10)
      .def_readwrite("alpha", &ModulationScheme::alpha)
      .def_readwrite("delta_amp", &ModulationScheme::delta_amp)
      .def_readwrite("delta_mod", &ModulationScheme::delta_mod)
      .def_readwrite("cutoff", &ModulationScheme::cutoff)
      .def("module_count", &ModulationScheme::module_count)
      .def("validate", &ModulationScheme::validate);

  py::class_<HonestChannel>(m, "HonestChannel")
      .def(py::init<double, double, double>(), py::arg("distance_km") = 10.0,
           py::arg("attenuation_db_per_km") = 0.2, py::arg("excess_noise") = 0.02)
      .def_readwrite("distance_km", &HonestChannel::distance_km)
      .def_readwrite("attenuation_db_per_km", &HonestChannel::attenuation_db_per_km)
      .def_readwrite("excess_noise", &HonestChannel::excess_noise)
      .def("transmittance", &HonestChannel::transmittance);

  py::class_<HonestStatistics>(m, "HonestStatistics")
      .def_readonly("pe", &HonestStatistics::pe)
      .def_readonly("ec", &HonestStatistics::ec)
      .def_readonly("tom", &HonestStatistics::tom);

  py::class_<DualCertificate>(m, "DualCertificate")
      .def_readonly("scheme", &DualCertificate::scheme)
      .def_readonly("channel", &DualCertificate::channel)
      .def_readonly("nu_pe", &DualCertificate::nu_pe)
      .def_readonly("nu_tom", &DualCertificate::nu_tom)
      .def_readonly("g0", &DualCertificate::g0)
      .def_readonly("eps_prime", &DualCertificate::eps_prime)
      .def_readonly("primal_ub", &DualCertificate::primal_ub)
      .def_readonly("lower_bound", &DualCertificate::lower_bound)
      .def_readonly("lambda_min", &DualCertificate::lambda_min);

  py::class_<SolveResult>(m, "SolveResult")
      .def_readonly("certificate", &SolveResult::certificate)
      .def_readonly("stats", &SolveResult::stats)
      .def_readonly("upper_bound", &SolveResult::upper_bound)
      .def_readonly("lower_bound", &SolveResult::lower_bound)
      .def_readonly("converged", &SolveResult::converged)
      .def_readonly("iterations", &SolveResult::iterations);

  py::class_<SecurityParams>(m, "SecurityParams")
      .def(py::init<>())
      .def_readwrite("n", &SecurityParams::n)
      .def_readwrite("eps", &SecurityParams::eps)
      .def_readwrite("eps_phys_na", &SecurityParams::eps_phys_na)
      .def_readwrite("eps_tom", &SecurityParams::eps_tom)
      .def_readwrite("eps_ec", &SecurityParams::eps_ec)
      .def_readwrite("eps_ec_c", &SecurityParams::eps_ec_c)
      .def_readwrite("eps_pe_c", &SecurityParams::eps_pe_c)
      .def_readwrite("a", &SecurityParams::a)
      .def("validate", &SecurityParams::validate);

  py::class_<RateGrids>(m, "RateGrids")
      .def(py::init<>())
      .def_readwrite("a", &RateGrids::a)
      .def_readwrite("p_key", &RateGrids::p_key)
      .def_readwrite("p_pe_cond", &RateGrids::p_pe_cond);

  py::class_<RatePoint>(m, "RatePoint")
      .def_readonly("alpha", &RatePoint::alpha)
      .def_readonly("a", &RatePoint::a)
      .def_readonly("p_key", &RatePoint::p_key)
      .def_readonly("p_pe_cond", &RatePoint::p_pe_cond)
      .def_readonly("asymptotic_rate", &RatePoint::asymptotic_rate)
      .def_readonly("finite_rate", &RatePoint::finite_rate)
      .def_readonly("delta_pe", &RatePoint::delta_pe)
      .def_readonly("delta_tom", &RatePoint::delta_tom)
      .def_readonly("positive", &RatePoint::positive);

  m.def("honest_statistics", &honest_statistics, py::arg("channel"),
        py::arg("scheme"));
  m.def("ec_leak_rate", &ec_leak_rate, py::arg("ec"), py::arg("f"),
        py::arg("p_key"), py::arg("per_round_fraction") = true);
  m.def("solve_asymptotic", &solve_asymptotic, py::arg("scheme"),
        py::arg("channel"), py::arg("max_iter") = 300, py::arg("gap") = 0.02,
        py::arg("lb_cadence") = 15,
        py::call_guard<py::gil_scoped_release>());
  m.def("asymptotic_rate", &asymptotic_rate, py::arg("certificate"),
        py::arg("stats"), py::arg("leak_rate"));
  m.def("default_rate_grids", &default_rate_grids);
  m.def(
      "optimize_rate",
      [](const std::vector<SolveResult>& solved, const RateGrids& grids,
         const SecurityParams& sec, double f_ec) {
        std::vector<CertifiedPoint> points;
        for (const auto& s : solved) points.push_back({s.certificate, s.stats});
        return optimize_rate(points, grids, sec, f_ec);
      },
      py::arg("solved"), py::arg("grids"), py::arg("security"), py::arg("f_ec"),
      py::call_guard<py::gil_scoped_release>());
  m.def("gamma_fn", &gamma_fn, py::arg("x"));
  m.def("multinoulli_deviation", &multinoulli_deviation, py::arg("pi"),
        py::arg("h"), py::arg("n"), py::arg("eps_fail"));
  m.def("pe_statistics", &pe_statistics, py::arg("channel"), py::arg("scheme"));
  m.def("sample_rounds", &sample_rounds, py::arg("channel"), py::arg("scheme"),
        py::arg("n"), py::arg("seed"));
}
