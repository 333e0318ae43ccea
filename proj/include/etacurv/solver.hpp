#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "etacurv/expression.hpp"
#include "etacurv/geometry.hpp"
#include "etacurv/grid.hpp"

// Damped-Newton/continuation solvers for the three Dirichlet problems:
// the mean-curvature supersolution, the Lorentz-Gauss (strictly convex)
// subsolution, and the main K_eta equation. The continuation path
// interpolates the right-hand side between the curvature of the starting
// iterate and the target, so every stage starts admissible.
namespace etacurv::solver {

struct ProblemSpec {
  grid::DomainSpec domain;
  geom::Curvature equation = geom::Curvature::KEta;
  expr::Expression psi;  // psi(x, z) > 0, psi_z >= 0
  expr::Expression phi;  // boundary data, closed form on the closure
};

struct SolverConfig {
  double newton_tol = 1e-10;   // max-norm of the residual
  int max_newton = 50;
  double damping_factor = 0.5;
  double min_step = 1e-6;
  int continuation_steps = 8;
  double theta_min = 1e-3;     // spacelike guard: reject |Du| > 1 - theta_min
  double cone_guard = 1e-10;   // reject admissibility margin <= cone_guard
};

enum class FailureKind {
  None,
  NotSpacelike,
  ConeExit,
  ConvexityLost,
  Stagnation,
  LinearSolve,
  BadSubsolution,
};

struct FailureInfo {
  FailureKind kind = FailureKind::None;
  int node = -1;
  Vec x;
  Vec kappa;
  double margin = 0.0;
  std::string message;
};

struct SolveResult {
  grid::GridField u;
  bool converged = false;
  std::vector<int> iterations;            // per continuation stage
  std::vector<double> stage_residuals;    // final residual per stage
  std::vector<double> residual_history;   // all accepted residual norms
  double final_residual = 0.0;
  double theta0 = 0.0;       // 1 - max |Du|
  double cone_margin = 0.0;  // min over nodes of the equation's margin
  FailureInfo failure;
};

/// Right-hand side of a stage, with its z-derivative.
struct Rhs {
  std::function<double(const Vec&, double)> value;
  std::function<double(const Vec&, double)> dz;
};

SolveResult solve_mean_curvature(const ProblemSpec& problem,
                                 std::shared_ptr<const grid::GridSkeleton> skel,
                                 const SolverConfig& config);

SolveResult solve_lorentz_gauss(const ProblemSpec& problem,
                                std::shared_ptr<const grid::GridSkeleton> skel,
                                const SolverConfig& config);

/// Main equation; starts from an admissible subsolution (kappa in Gamma at
/// every node, K_eta[u_sub] >= psi(x, u_sub) - 1e-8, boundary trace = phi).
SolveResult solve_k_eta(const ProblemSpec& problem, const grid::GridField& subsolution,
                        const SolverConfig& config);

/// Subsolution v = phi + c q for affine spacelike phi, with q the quadratic
/// level function of the (disk/ellipse) domain; c found by scan + bisection so
/// that lambda(D^2 v) in Gamma, sup |Dv| < 1 and K_eta[v] >= psi_sup on the
/// grid. Returns nothing when no admissible c exists (use the Lorentz-Gauss
/// route instead); throws ConfigError when phi is not affine spacelike.
std::optional<grid::GridField> build_quadratic_subsolution(
    std::shared_ptr<const grid::GridSkeleton> skel, const expr::Expression& phi,
    double psi_sup, const SolverConfig& config);

/// Nodewise curvature value of the equation on a field (used to seed
/// continuation paths and to validate subsolutions). Throws NotSpacelikeError
/// if the field is not spacelike at some node.
Vec curvature_of_field(const grid::GridField& u, geom::Curvature eq);

/// Discrete residual f(kappa(A[u])) - rhs(x, u) over interior nodes.
Vec residual_of_field(const grid::GridField& u, geom::Curvature eq, const Rhs& rhs);

/// The full Theorem-1.2-style pipeline: mean-curvature supersolution,
/// subsolution by the requested route, then the K_eta solve.
struct PipelineResult {
  SolveResult supersolution;
  SolveResult subsolution;  // meaningful when route == "lorentz_gauss"
  grid::GridField usub;     // the subsolution actually used
  SolveResult main;
  std::string route;
  double mu0 = 0.0;
  bool ok = false;
  std::string error;
};

PipelineResult run_pipeline(const ProblemSpec& problem,
                            std::shared_ptr<const grid::GridSkeleton> skel,
                            const std::string& route, const SolverConfig& config);

}  // namespace etacurv::solver
