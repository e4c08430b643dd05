#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "dmcv/finite_rate.hpp"

namespace dmcv {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitInvariant = 1,
  kExitSolver = 2,
  kExitIo = 3,
};

/// Flat, typed run configuration; every key carries its unit in its name.
/// Scalar grid keys accept either one number or an array.
struct RunConfig {
  // scheme
  std::vector<double> alpha = {0.9};
  double delta_amp = 0.9;
  double delta_mod = 0.9;
  int cutoff = 10;
  // channel
  std::vector<double> distance_km = {10.0};
  double attenuation_db_per_km = 0.2;
  double xi = 0.02;
  // protocol
  double f_ec = 0.0;
  bool leak_per_round_fraction = true;
  // security (the Renyi parameter comes from the grid, not from here)
  SecurityParams security;
  std::vector<double> n = {1e12};
  // solver
  FwOptions solver;
  // finite-size optimization grids
  RateGrids grids = default_rate_grids();
  // Monte Carlo check budget
  std::int64_t mc_samples = 1000000;

  ModulationScheme scheme(double alpha_value) const;
  HonestChannel channel(double distance) const;

  // Throws std::invalid_argument naming the offending key.
  void validate() const;
};

// Parse a flat JSON object; unknown keys are rejected by name.
RunConfig config_from_json_text(const std::string& text);
RunConfig load_config(const std::string& path);

// FNV-1a 64 over the dense entries of the constraint operators, in fixed
// constraint order, hashing the IEEE-754 bytes of (re, im) per entry.
std::uint64_t operator_content_hash(const ModulationScheme& scheme);

/// Serialized certificate: versioned JSON with full-precision matrices as
/// row-major (re, im) pairs plus the operator content hash.  The gradient at
/// the certifying iterate is stored so the dual slack can be re-verified
/// without re-solving.
struct CertificateFile {
  int format_version = 1;
  DualCertificate cert;
  Matrix gradient;
  std::uint64_t content_hash = 0;
};

void save_certificate_file(const std::string& path, const CertificateFile& file);
CertificateFile load_certificate_file(const std::string& path);

/// Outcome of re-verifying a stored certificate.
struct VerifyReport {
  bool hash_ok = false;
  bool certified = false;
  double lambda_min = 0.0;
  double eps_prime = 0.0;
  std::string detail;
};

// Rebuilds the constraint operators from the scheme echoed in the file,
// re-checks the content hash and the dual slack.
VerifyReport verify_certificate_file(const CertificateFile& file);

// Cache filename for one (scheme, channel) point, unique per parameters.
std::string certificate_cache_name(const ModulationScheme& scheme,
                                   const HonestChannel& channel);

// Subcommands.  out_dir receives CSV files; cache_dir (optional) is consulted
// before solving and populated after.  All report text goes to `out`.
int cmd_operators(const RunConfig& config, std::ostream& out);
int cmd_asymptotic(const RunConfig& config, const std::string& out_dir,
                   const std::string& cache_dir, int workers, std::ostream& out);
int cmd_finite(const RunConfig& config, const std::string& out_dir,
               const std::string& cache_dir, int workers, std::ostream& out);
int cmd_verify(const std::string& certificate_path,
               const std::optional<RunConfig>& config, std::ostream& out);
int cmd_mc_check(const RunConfig& config, std::uint64_t seed, std::ostream& out);

}  // namespace dmcv
