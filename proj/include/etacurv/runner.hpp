#pragma once

#include <optional>
#include <string>
#include <vector>

#include "etacurv/estimates.hpp"
#include "etacurv/solver.hpp"

// Configuration files, the solve/verify/convergence/barriers commands, and
// result persistence. Exit-code contract: 0 success, 1 configuration or
// hypothesis error, 2 solver failure, 3 verification failure.
namespace etacurv::runner {

struct RunConfig {
  grid::DomainSpec domain;
  geom::Curvature equation = geom::Curvature::KEta;
  std::string psi_src, phi_src;
  expr::Expression psi, phi;
  double h = 0.0;
  std::vector<double> h_list;
  solver::SolverConfig solver_config;
  std::string route = "lorentz_gauss";
  bool cache = true;
  std::optional<expr::Expression> reference;
  std::string reference_src;
  std::optional<expr::Expression> phi_tilde;
  std::string phi_tilde_src;
  estimates::BarrierParams barrier_params;
  std::vector<double> barrier_deltas;  // empty: {0.2, 0.1, 0.05, 0.025} * inradius
  double barrier_angle = -M_PI / 2.0;  // n = 2 boundary point parameter
  std::uint64_t config_hash = 0;       // content hash of the file

  static RunConfig load(const std::string& path);
};

/// Hypothesis validation shared by all commands: psi > 0 and psi_z >= 0 on
/// sampled points of the closure x [-mu, mu], spacelike boundary data
/// |grad phi restricted to the boundary| < 1. Throws ConfigError naming the
/// violated hypothesis.
void validate_hypotheses(const RunConfig& cfg, double mu);

struct CommandOptions {
  std::string out_dir = "out";
  bool no_cache = false;
  int threads = 0;  // 0: hardware default
};

int cmd_solve(const std::string& config_path, const CommandOptions& opts);
int cmd_verify(const std::string& solution_path, const std::string& config_path,
               const CommandOptions& opts);
int cmd_convergence(const std::string& config_path, const CommandOptions& opts);
int cmd_barriers(const std::string& config_path, const CommandOptions& opts);

/// Exposed for tests: run one solve of the configured equation (the full
/// pipeline for the main equation) and serialize outputs under out_dir.
int solve_to_directory(const RunConfig& cfg, const std::string& out_dir, bool use_cache);

}  // namespace etacurv::runner
