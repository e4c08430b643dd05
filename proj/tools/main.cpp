#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "dmcv/reports.hpp"

namespace {

dmcv::RunConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) {
    dmcv::RunConfig config;
    config.validate();
    return config;
  }
  return dmcv::load_config(config_path);
}

int ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    std::cerr << "error: cannot create directory " << dir << ": " << ec.message()
              << '\n';
    return dmcv::kExitIo;
  }
  return dmcv::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified key rates for discrete-modulated CV-QKD"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", cache_dir, certificate_path;
  int workers = 1;
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "Path to a flat JSON run config");
  app.add_option("--out", out_dir, "Output directory for CSV/report files");
  app.add_option("--cache", cache_dir, "Certificate cache directory");
  app.add_option("--workers", workers, "Worker thread count")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "RNG seed for sampling checks");

  auto* operators = app.add_subcommand("operators", "Operator identity checks");
  auto* asymptotic =
      app.add_subcommand("asymptotic", "Certified asymptotic rate sweep");
  auto* finite = app.add_subcommand("finite", "Finite-size rate sweep");
  auto* verify = app.add_subcommand("verify", "Re-verify a stored certificate");
  verify->add_option("certificate", certificate_path, "Certificate file path")
      ->required();
  auto* mc_check =
      app.add_subcommand("mc-check", "Monte Carlo oracle and concentration checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      std::optional<dmcv::RunConfig> config;
      if (!config_path.empty()) config = dmcv::load_config(config_path);
      return dmcv::cmd_verify(certificate_path, config, std::cout);
    }
    const dmcv::RunConfig config = load_or_default(config_path);
    if (operators->parsed()) return dmcv::cmd_operators(config, std::cout);
    if (mc_check->parsed()) return dmcv::cmd_mc_check(config, seed, std::cout);
    if (const int rc = ensure_dir(out_dir); rc != dmcv::kExitOk) return rc;
    if (!cache_dir.empty())
      if (const int rc = ensure_dir(cache_dir); rc != dmcv::kExitOk) return rc;
    if (asymptotic->parsed())
      return dmcv::cmd_asymptotic(config, out_dir, cache_dir, workers, std::cout);
    if (finite->parsed())
      return dmcv::cmd_finite(config, out_dir, cache_dir, workers, std::cout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dmcv::kExitInvariant;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dmcv::kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dmcv::kExitSolver;
  }
  return dmcv::kExitOk;
}
