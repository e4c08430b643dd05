#include "dmcv/reports.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace dmcv {

namespace {

using nlohmann::json;

std::vector<double> number_or_array(const json& v, const std::string& key) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array() && !v.empty()) {
    for (const auto& e : v) {
      if (!e.is_number())
        throw std::invalid_argument(key + ": entries must be numbers");
      out.push_back(e.get<double>());
    }
  } else {
    throw std::invalid_argument(key + ": expected a number or non-empty array");
  }
  return out;
}

double number_field(const json& v, const std::string& key) {
  if (!v.is_number()) throw std::invalid_argument(key + ": expected a number");
  return v.get<double>();
}

template <typename F>
void parallel_for(int n, int workers, F&& body) {
  workers = std::max(1, std::min(workers, n));
  std::atomic<int> next{0};
  std::mutex mu;
  std::exception_ptr first_error;
  const auto run = [&] {
    for (int i; (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

json real_matrix_to_json(const RealMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows.push_back(m(i, j));
  return rows;
}

RealMatrix real_matrix_from_json(const json& v, int rows, int cols,
                                 const std::string& key) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows * cols)
    throw std::invalid_argument(key + ": wrong element count");
  RealMatrix m(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = v[k++].get<double>();
  return m;
}

json complex_matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      rows.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
  return rows;
}

Matrix complex_matrix_from_json(const json& v, int rows, int cols,
                                const std::string& key) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows * cols)
    throw std::invalid_argument(key + ": wrong element count");
  Matrix m(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const auto& pair = v[k++];
      if (!pair.is_array() || pair.size() != 2)
        throw std::invalid_argument(key + ": entries must be (re, im) pairs");
      m(i, j) = Complex(pair[0].get<double>(), pair[1].get<double>());
    }
  return m;
}

void hash_bytes(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

struct SweepPoint {
  double distance = 0.0;
  double alpha = 0.0;
};

struct SolvedPoint {
  DualCertificate cert;
  Matrix gradient;
  HonestStatistics stats;
  bool from_cache = false;
  bool ok = false;
  std::string error;
};

// Solve (or load from cache) one sweep point; on success the certificate is
// persisted so later runs and cmd_finite can reuse it.
SolvedPoint solve_point(const RunConfig& config, const SweepPoint& pt,
                        const std::string& cache_dir) {
  SolvedPoint result;
  const ModulationScheme scheme = config.scheme(pt.alpha);
  const HonestChannel channel = config.channel(pt.distance);
  result.stats = honest_statistics(channel, scheme);

  std::string cache_path;
  if (!cache_dir.empty())
    cache_path = cache_dir + "/" + certificate_cache_name(scheme, channel);

  if (!cache_path.empty() && std::filesystem::exists(cache_path)) {
    try {
      const CertificateFile file = load_certificate_file(cache_path);
      const VerifyReport report = verify_certificate_file(file);
      const bool matches = file.cert.scheme.alpha == scheme.alpha &&
                           file.cert.scheme.cutoff == scheme.cutoff &&
                           file.cert.channel.distance_km == channel.distance_km &&
                           file.cert.channel.excess_noise == channel.excess_noise;
      if (matches && report.hash_ok && report.certified) {
        result.cert = file.cert;
        result.gradient = file.gradient;
        result.from_cache = true;
        result.ok = true;
        return result;
      }
    } catch (const std::exception&) {
      // fall through to a fresh solve
    }
  }

  const auto ctx = make_objective_context(scheme);
  std::vector<Matrix> ops;
  for (const auto& labeled : constraint_operators(scheme))
    ops.push_back(labeled.op.data);
  const FwResult fw =
      frank_wolfe(ctx, ops, constraint_rhs(result.stats), config.solver);
  // Re-certify at the final iterate so the persisted gradient and multipliers
  // verify against each other.
  auto [value, cert] =
      taylor_lower_bound(fw.rho, ctx, ops, constraint_rhs(result.stats),
                         config.solver.eps_prime_floor);
  cert.channel = channel;
  result.cert = cert;
  result.gradient = gradient_r(fw.rho, ctx);
  result.ok = true;

  if (!cache_path.empty()) {
    CertificateFile file;
    file.cert = result.cert;
    file.gradient = result.gradient;
    file.content_hash = operator_content_hash(scheme);
    save_certificate_file(cache_path, file);
  }
  return result;
}

}  // namespace

ModulationScheme RunConfig::scheme(double alpha_value) const {
  return ModulationScheme{alpha_value, delta_amp, delta_mod, cutoff};
}

HonestChannel RunConfig::channel(double distance) const {
  return HonestChannel{distance, attenuation_db_per_km, xi};
}

void RunConfig::validate() const {
  if (alpha.empty()) throw std::invalid_argument("alpha: must be non-empty");
  for (const double a : alpha) scheme(a).validate();
  if (distance_km.empty())
    throw std::invalid_argument("distance_km: must be non-empty");
  for (const double d : distance_km) channel(d).validate();
  if (!(f_ec >= 0.0)) throw std::invalid_argument("f_ec: must be >= 0");
  if (n.empty()) throw std::invalid_argument("n: must be non-empty");
  for (const double rounds : n) {
    SecurityParams sec = security;
    sec.n = rounds;
    sec.validate();
  }
  if (!(solver.gap > 0.0)) throw std::invalid_argument("solver_gap: must be > 0");
  if (solver.max_iter < 1)
    throw std::invalid_argument("solver_max_iter: must be >= 1");
  if (solver.lb_cadence < 1)
    throw std::invalid_argument("solver_cadence: must be >= 1");
  if (!(solver.sdp_tol > 0.0))
    throw std::invalid_argument("solver_tol: must be > 0");
  if (grids.a.empty() || grids.p_key.empty() || grids.p_pe_cond.empty())
    throw std::invalid_argument("grids: must be non-empty");
  if (mc_samples < 1) throw std::invalid_argument("mc_samples: must be >= 1");
}

RunConfig config_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config: expected an object");

  RunConfig config;
  for (const auto& [key, value] : doc.items()) {
    if (key == "alpha") config.alpha = number_or_array(value, key);
    else if (key == "delta_amp") config.delta_amp = number_field(value, key);
    else if (key == "delta_mod") config.delta_mod = number_field(value, key);
    else if (key == "cutoff") config.cutoff = static_cast<int>(number_field(value, key));
    else if (key == "distance_km") config.distance_km = number_or_array(value, key);
    else if (key == "attenuation_db_per_km")
      config.attenuation_db_per_km = number_field(value, key);
    else if (key == "xi") config.xi = number_field(value, key);
    else if (key == "f_ec") config.f_ec = number_field(value, key);
    else if (key == "leak_per_round_fraction") {
      if (!value.is_boolean())
        throw std::invalid_argument(key + ": expected a boolean");
      config.leak_per_round_fraction = value.get<bool>();
    } else if (key == "eps") config.security.eps = number_field(value, key);
    else if (key == "eps_phys_na")
      config.security.eps_phys_na = number_field(value, key);
    else if (key == "eps_tom") config.security.eps_tom = number_field(value, key);
    else if (key == "eps_ec") config.security.eps_ec = number_field(value, key);
    else if (key == "eps_ec_c") config.security.eps_ec_c = number_field(value, key);
    else if (key == "eps_pe_c") config.security.eps_pe_c = number_field(value, key);
    else if (key == "n") config.n = number_or_array(value, key);
    else if (key == "solver_tol") config.solver.sdp_tol = number_field(value, key);
    else if (key == "solver_max_iter")
      config.solver.max_iter = static_cast<int>(number_field(value, key));
    else if (key == "solver_gap") config.solver.gap = number_field(value, key);
    else if (key == "solver_cadence")
      config.solver.lb_cadence = static_cast<int>(number_field(value, key));
    else if (key == "a_grid") config.grids.a = number_or_array(value, key);
    else if (key == "p_key_grid") config.grids.p_key = number_or_array(value, key);
    else if (key == "p_pe_cond_grid")
      config.grids.p_pe_cond = number_or_array(value, key);
    else if (key == "mc_samples")
      config.mc_samples = static_cast<std::int64_t>(number_field(value, key));
    else
      throw std::invalid_argument(key + ": unknown configuration key");
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json_text(buffer.str());
}

std::uint64_t operator_content_hash(const ModulationScheme& scheme) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  // The constraint operators alone do not depend on alpha, so the scheme
  // parameters enter the hash explicitly to catch any echo mismatch.
  hash_bytes(h, &scheme.alpha, sizeof scheme.alpha);
  hash_bytes(h, &scheme.delta_amp, sizeof scheme.delta_amp);
  hash_bytes(h, &scheme.delta_mod, sizeof scheme.delta_mod);
  hash_bytes(h, &scheme.cutoff, sizeof scheme.cutoff);
  for (const auto& labeled : constraint_operators(scheme)) {
    const Matrix& m = labeled.op.data;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double re = m(i, j).real(), im = m(i, j).imag();
        hash_bytes(h, &re, sizeof re);
        hash_bytes(h, &im, sizeof im);
      }
  }
  return h;
}

void save_certificate_file(const std::string& path, const CertificateFile& file) {
  json doc;
  doc["format_version"] = file.format_version;
  doc["alpha"] = file.cert.scheme.alpha;
  doc["delta_amp"] = file.cert.scheme.delta_amp;
  doc["delta_mod"] = file.cert.scheme.delta_mod;
  doc["cutoff"] = file.cert.scheme.cutoff;
  doc["distance_km"] = file.cert.channel.distance_km;
  doc["attenuation_db_per_km"] = file.cert.channel.attenuation_db_per_km;
  doc["xi"] = file.cert.channel.excess_noise;
  doc["nu_pe"] = real_matrix_to_json(file.cert.nu_pe);
  doc["nu_tom"] = real_matrix_to_json(file.cert.nu_tom);
  doc["g0"] = file.cert.g0;
  doc["eps_prime"] = file.cert.eps_prime;
  doc["primal_ub"] = file.cert.primal_ub;
  doc["lower_bound"] = file.cert.lower_bound;
  doc["lambda_min"] = file.cert.lambda_min;
  doc["sdp_iterations"] = file.cert.sdp_iterations;
  doc["sdp_residual"] = file.cert.sdp_residual;
  doc["gradient_dim"] = static_cast<int>(file.gradient.rows());
  doc["gradient"] = complex_matrix_to_json(file.gradient);
  doc["content_hash"] = file.content_hash;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("certificate: cannot write " + path);
  out << doc.dump(1) << '\n';
  if (!out) throw std::runtime_error("certificate: write failed for " + path);
}

CertificateFile load_certificate_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("certificate: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("certificate: ") + e.what());
  }

  CertificateFile file;
  file.format_version = doc.at("format_version").get<int>();
  if (file.format_version != 1)
    throw std::runtime_error("certificate: unsupported format version");
  file.cert.scheme.alpha = doc.at("alpha").get<double>();
  file.cert.scheme.delta_amp = doc.at("delta_amp").get<double>();
  file.cert.scheme.delta_mod = doc.at("delta_mod").get<double>();
  file.cert.scheme.cutoff = doc.at("cutoff").get<int>();
  file.cert.channel.distance_km = doc.at("distance_km").get<double>();
  file.cert.channel.attenuation_db_per_km =
      doc.at("attenuation_db_per_km").get<double>();
  file.cert.channel.excess_noise = doc.at("xi").get<double>();
  const int m = file.cert.scheme.module_count();
  file.cert.nu_pe = real_matrix_from_json(doc.at("nu_pe"), 4, m, "nu_pe");
  file.cert.nu_tom = real_matrix_from_json(doc.at("nu_tom"), 16, 1, "nu_tom");
  file.cert.g0 = doc.at("g0").get<double>();
  file.cert.eps_prime = doc.at("eps_prime").get<double>();
  file.cert.primal_ub = doc.at("primal_ub").get<double>();
  file.cert.lower_bound = doc.at("lower_bound").get<double>();
  file.cert.lambda_min = doc.at("lambda_min").get<double>();
  file.cert.sdp_iterations = doc.at("sdp_iterations").get<int>();
  file.cert.sdp_residual = doc.at("sdp_residual").get<double>();
  const int dim = doc.at("gradient_dim").get<int>();
  file.gradient = complex_matrix_from_json(doc.at("gradient"), dim, dim, "gradient");
  file.content_hash = doc.at("content_hash").get<std::uint64_t>();
  return file;
}

VerifyReport verify_certificate_file(const CertificateFile& file) {
  VerifyReport report;
  const std::uint64_t expected = operator_content_hash(file.cert.scheme);
  report.hash_ok = expected == file.content_hash;
  if (!report.hash_ok) {
    report.detail = "operator content hash mismatch";
    return report;
  }
  std::vector<Matrix> ops;
  for (const auto& labeled : constraint_operators(file.cert.scheme))
    ops.push_back(labeled.op.data);
  const auto [lambda_min, certified] =
      verify_dual_certificate(file.gradient, ops, file.cert.nu_flat());
  report.lambda_min = lambda_min;
  report.eps_prime = file.cert.eps_prime;
  report.certified = certified || lambda_min >= -file.cert.eps_prime;
  if (!report.certified) report.detail = "dual slack not positive semidefinite";
  return report;
}

std::string certificate_cache_name(const ModulationScheme& scheme,
                                   const HonestChannel& channel) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "cert_D%.6g_xi%.6g_alpha%.6g_Damp%.6g_dmod%.6g_Nc%d.json",
                channel.distance_km, channel.excess_noise, scheme.alpha,
                scheme.delta_amp, scheme.delta_mod, scheme.cutoff);
  return buf;
}

int cmd_operators(const RunConfig& config, std::ostream& out) {
  const ModulationScheme scheme = config.scheme(config.alpha.front());
  const int m = scheme.module_count();
  bool ok = true;
  const auto report = [&](const std::string& name, double residual, double tol) {
    const bool pass = residual < tol;
    ok = ok && pass;
    out << (pass ? "pass" : "FAIL") << "  " << name << "  residual "
        << fmt(residual) << "  tol " << fmt(tol) << '\n';
  };

  const int d = scheme.cutoff;
  Matrix key_sum = Matrix::Zero(d, d);
  for (int z = 0; z < 4; ++z) key_sum += key_region_operator(z, scheme.cutoff).data;
  report("key region sum = 1", (key_sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(),
         1e-9);

  Matrix pe_sum = Matrix::Zero(d, d);
  for (int z = 0; z < m; ++z) pe_sum += pe_region_operator(z, scheme).data;
  report("pe region sum = 1", (pe_sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(),
         1e-9);

  report("G isometry", build_G_map(scheme.cutoff).trace_preservation_residual(),
         1e-8);

  const auto povm = ic_povm();
  Matrix povm_sum = Matrix::Zero(4, 4);
  for (const auto& element : povm) povm_sum += element.data;
  report("ic povm sum = 1",
         (povm_sum - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::MatrixXcd span(16, 16);
  for (int i = 0; i < 16; ++i)
    span.col(i) = Eigen::Map<const Vector>(povm[i].data.data(), 16);
  Eigen::ColPivHouseholderQR<Matrix> qr(span);
  const bool full_rank = qr.rank() == 16;
  ok = ok && full_rank;
  out << (full_rank ? "pass" : "FAIL") << "  ic povm span rank  " << qr.rank()
      << "  expected 16\n";

  double herm = 0.0;
  for (const auto& labeled : constraint_operators(scheme))
    herm = std::max(herm, labeled.op.hermiticity_residual());
  report("constraint operators hermitian", herm, 1e-10);

  return ok ? kExitOk : kExitInvariant;
}

int cmd_asymptotic(const RunConfig& config, const std::string& out_dir,
                   const std::string& cache_dir, int workers, std::ostream& out) {
  std::vector<SweepPoint> points;
  for (const double d : config.distance_km)
    for (const double a : config.alpha) points.push_back({d, a});
  std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.alpha < b.alpha;
  });

  std::vector<SolvedPoint> solved(points.size());
  parallel_for(static_cast<int>(points.size()), workers, [&](int i) {
    try {
      solved[i] = solve_point(config, points[i], cache_dir);
    } catch (const std::exception& e) {
      solved[i].ok = false;
      solved[i].error = e.what();
    }
  });

  std::ofstream csv(out_dir + "/asymptotic.csv");
  if (!csv) {
    out << "error: cannot write " << out_dir << "/asymptotic.csv\n";
    return kExitIo;
  }
  csv << "distance_km,xi,alpha,delta_amp,delta_mod,cutoff,f_ec,rate,primal_ub,"
         "lower_bound,gap,eps_prime,sdp_iterations,argmax,status\n";

  bool any_solver_failure = false;
  std::size_t idx = 0;
  while (idx < points.size()) {
    // one distance block at a time; mark the argmax alpha within it
    std::size_t end = idx;
    while (end < points.size() && points[end].distance == points[idx].distance)
      ++end;
    double best_rate = -std::numeric_limits<double>::infinity();
    std::size_t best = idx;
    std::vector<double> rates(end - idx, 0.0);
    for (std::size_t i = idx; i < end; ++i) {
      if (!solved[i].ok) continue;
      const double leak = ec_leak_rate(solved[i].stats.ec, config.f_ec, 1.0,
                                       config.leak_per_round_fraction);
      const double rate = asymptotic_rate(solved[i].cert, solved[i].stats, leak);
      rates[i - idx] = rate;
      if (rate > best_rate) {
        best_rate = rate;
        best = i;
      }
    }
    for (std::size_t i = idx; i < end; ++i) {
      const SweepPoint& pt = points[i];
      csv << fmt(pt.distance) << ',' << fmt(config.xi) << ',' << fmt(pt.alpha)
          << ',' << fmt(config.delta_amp) << ',' << fmt(config.delta_mod) << ','
          << config.cutoff << ',' << fmt(config.f_ec) << ',';
      if (solved[i].ok) {
        const DualCertificate& cert = solved[i].cert;
        const double gap = cert.primal_ub != 0.0
                               ? (cert.primal_ub - cert.lower_bound) /
                                     std::abs(cert.primal_ub)
                               : 0.0;
        csv << fmt(rates[i - idx]) << ',' << fmt(cert.primal_ub) << ','
            << fmt(cert.lower_bound) << ',' << fmt(gap) << ','
            << fmt(cert.eps_prime) << ',' << cert.sdp_iterations << ','
            << (i == best ? 1 : 0) << ','
            << (solved[i].from_cache ? "cached" : "solved") << '\n';
      } else {
        any_solver_failure = true;
        csv << ",,,,,,0,error:" << solved[i].error << '\n';
      }
    }
    idx = end;
  }
  out << "wrote " << out_dir << "/asymptotic.csv (" << points.size()
      << " rows)\n";
  return any_solver_failure ? kExitSolver : kExitOk;
}

int cmd_finite(const RunConfig& config, const std::string& out_dir,
               const std::string& cache_dir, int workers, std::ostream& out) {
  // Load every (distance, alpha) certificate up front; missing entries are a
  // usage error pointing at the asymptotic pass.
  struct DistanceBlock {
    double distance = 0.0;
    std::vector<CertifiedPoint> points;
  };
  std::vector<DistanceBlock> blocks;
  for (const double d : config.distance_km) {
    DistanceBlock block;
    block.distance = d;
    for (const double a : config.alpha) {
      const ModulationScheme scheme = config.scheme(a);
      const HonestChannel channel = config.channel(d);
      const std::string path =
          cache_dir + "/" + certificate_cache_name(scheme, channel);
      if (cache_dir.empty() || !std::filesystem::exists(path)) {
        out << "error: missing certificate " << path
            << "; run the asymptotic subcommand first\n";
        return kExitIo;
      }
      const CertificateFile file = load_certificate_file(path);
      const VerifyReport report = verify_certificate_file(file);
      if (!report.hash_ok || !report.certified) {
        out << "error: certificate " << path << " failed verification: "
            << report.detail << '\n';
        return kExitInvariant;
      }
      block.points.push_back({file.cert, honest_statistics(channel, scheme)});
    }
    blocks.push_back(std::move(block));
  }

  struct Row {
    double distance = 0.0;
    double n = 0.0;
    RatePoint rate;
  };
  std::vector<Row> rows;
  std::vector<double> n_grid = config.n;
  std::sort(n_grid.begin(), n_grid.end());
  for (const auto& block : blocks)
    for (const double rounds : n_grid) rows.push_back({block.distance, rounds, {}});

  parallel_for(static_cast<int>(rows.size()), workers, [&](int i) {
    const auto& block = blocks[i / n_grid.size()];
    SecurityParams sec = config.security;
    sec.n = rows[i].n;
    rows[i].rate = optimize_rate(block.points, config.grids, sec, config.f_ec);
  });

  std::ofstream csv(out_dir + "/finite.csv");
  if (!csv) {
    out << "error: cannot write " << out_dir << "/finite.csv\n";
    return kExitIo;
  }
  csv << "distance_km,xi,n,alpha,a,p_key,p_pe_cond,f_ec,finite_rate,"
         "asymptotic_rate,delta_pe,delta_tom,eps_prime,lambda_min,gap,"
         "positive\n";
  for (const Row& row : rows) {
    const RatePoint& r = row.rate;
    csv << fmt(row.distance) << ',' << fmt(config.xi) << ',' << fmt(row.n) << ','
        << fmt(r.alpha) << ',' << fmt(r.a) << ',' << fmt(r.p_key) << ','
        << fmt(r.p_pe_cond) << ',' << fmt(config.f_ec) << ','
        << fmt(r.finite_rate) << ',' << fmt(r.asymptotic_rate) << ','
        << fmt(r.delta_pe) << ',' << fmt(r.delta_tom) << ',' << fmt(r.eps_prime)
        << ',' << fmt(r.lambda_min) << ',' << fmt(r.gap) << ','
        << (r.positive ? 1 : 0) << '\n';
  }
  out << "wrote " << out_dir << "/finite.csv (" << rows.size() << " rows)\n";
  return kExitOk;
}

int cmd_verify(const std::string& certificate_path,
               const std::optional<RunConfig>& config, std::ostream& out) {
  CertificateFile file;
  try {
    file = load_certificate_file(certificate_path);
  } catch (const std::exception& e) {
    out << "error: " << e.what() << '\n';
    return kExitIo;
  }
  if (config) {
    const ModulationScheme configured = config->scheme(file.cert.scheme.alpha);
    if (operator_content_hash(configured) != file.content_hash) {
      out << "error: operator content hash mismatch between config and "
             "certificate\n";
      return kExitInvariant;
    }
  }
  const VerifyReport report = verify_certificate_file(file);
  out << "hash " << (report.hash_ok ? "ok" : "MISMATCH") << '\n';
  if (report.hash_ok) {
    out << "lambda_min " << fmt(report.lambda_min) << '\n'
        << "eps_prime " << fmt(report.eps_prime) << '\n'
        << "lower_bound " << fmt(file.cert.lower_bound) << '\n'
        << (report.certified ? "certified" : "UNCERTIFIED") << '\n';
  }
  return report.hash_ok && report.certified ? kExitOk : kExitInvariant;
}

int cmd_mc_check(const RunConfig& config, std::uint64_t seed, std::ostream& out) {
  const ModulationScheme scheme = config.scheme(config.alpha.front());
  const HonestChannel channel = config.channel(config.distance_km.front());
  const int m = scheme.module_count();
  bool ok = true;

  // Sampled PE frequencies against the quadrature distribution, cell by cell.
  const RealMatrix analytic = pe_statistics(channel, scheme);
  const double n = static_cast<double>(config.mc_samples);
  const RealMatrix freq = sample_rounds(channel, scheme, config.mc_samples, seed);
  double worst_z = 0.0;
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < m; ++z) {
      const double p = analytic(x, z);
      const double sigma = std::sqrt(std::max(p * (1.0 - p) / n, 1e-300));
      worst_z = std::max(worst_z, std::abs(freq(x, z) - p) / sigma);
    }
  const bool cells_ok = worst_z < 4.0;
  ok = ok && cells_ok;
  out << (cells_ok ? "pass" : "FAIL") << "  pe cells vs quadrature  worst z "
      << fmt(worst_z) << "  threshold 4\n";

  // Concentration experiment: the tolerance bound must hold empirically for
  // an affine statistic over one wedge row at small n.
  RealVector pi(m + 1), h(m + 1);
  double row_mass = 0.0;
  for (int z = 0; z < m; ++z) {
    pi(z) = analytic(0, z);
    row_mass += pi(z);
    h(z) = static_cast<double>(m - z);
  }
  pi(m) = 1.0 - row_mass;
  h(m) = 0.0;
  const double small_n = 1e4, eps_fail = 0.05;
  const double delta = multinoulli_deviation(pi, h, small_n, eps_fail);
  const double mean = h.dot(pi);
  std::mt19937_64 rng(seed + 1);
  const int trials = 2000;
  int violations = 0;
  for (int t = 0; t < trials; ++t) {
    double stat = 0.0, remaining = 1.0;
    int left = static_cast<int>(small_n);
    for (int z = 0; z < m && left > 0; ++z) {
      std::binomial_distribution<int> bin(left, std::min(1.0, pi(z) / remaining));
      const int count = bin(rng);
      stat += h(z) * count;
      left -= count;
      remaining -= pi(z);
    }
    if (std::abs(stat / small_n - mean) > delta) ++violations;
  }
  const double violation_rate = static_cast<double>(violations) / trials;
  const bool conc_ok = violation_rate <= eps_fail;
  ok = ok && conc_ok;
  out << (conc_ok ? "pass" : "FAIL") << "  concentration tolerance  violations "
      << fmt(violation_rate) << "  budget " << fmt(eps_fail) << "  delta "
      << fmt(delta) << '\n';

  return ok ? kExitOk : kExitInvariant;
}

}  // namespace dmcv
