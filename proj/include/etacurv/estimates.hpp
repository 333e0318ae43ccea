#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etacurv/expression.hpp"
#include "etacurv/grid.hpp"

// Numerical verification of the a priori estimates on computed solutions:
// sub/supersolution comparison, the gradient bound, Pogorelov-type interior
// second-derivative reports, boundary barriers on the strip omega_delta, and
// the boundary trace quantities m and S_{1;n}.
namespace etacurv::estimates {

/// One verdict: satisfied <=> lhs <= rhs + tol, slack = rhs - lhs.
struct CheckEntry {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
  double slack = 0.0;
  std::map<std::string, double> params;
};

struct EstimateReport {
  std::vector<CheckEntry> entries;
  std::map<std::string, double> constants;

  bool all_satisfied() const;
  const CheckEntry* find(const std::string& name) const;
};

CheckEntry make_check(const std::string& name, double lhs, double rhs, double tol = 0.0);

/// Value, gradient and Hessian of a grid field recovered at an off-grid point
/// (used on the boundary) by a weighted least-squares cubic fit over nearby
/// nodes and boundary-trace samples.
struct FittedJet {
  bool ok = false;
  double value = 0.0;
  Vec grad;
  Mat hess;
};
FittedJet fit_jet_at(const grid::GridField& u, const Vec& x);

/// u_sub <= u <= u_super nodewise within 1e-6 (1 + |u|_inf), the same ordering
/// for the inner-normal derivatives at sampled boundary points, and the
/// boundary gradient bound sup |Du| <= max(sup |Du_sub|, sup |Du_super|) < 1.
std::vector<CheckEntry> check_comparison(const grid::GridField& u,
                                         const grid::GridField& usub,
                                         const grid::GridField& usuper,
                                         int boundary_samples = 64);

/// sup w~ <= exp((sup|D_x psi| / (n inf psi)) 2 sup|phi| + diam) sup_boundary w~
/// with the sups sampled over the closure x [-mu0, mu0]; also reports theta0.
std::vector<CheckEntry> check_gradient_bound(const grid::GridField& u,
                                             const expr::Expression& psi,
                                             const expr::Expression& phi, double mu0,
                                             std::map<std::string, double>* constants = nullptr,
                                             int boundary_samples = 64);

/// Interior second-derivative magnitudes zeta^alpha |D^2 u| with
/// zeta = phi_tilde - u, plus the global-reduction ratio
/// sup |D^2 u| / (1 + sup_boundary |D^2 u|). Report-only entries (the
/// constants in the estimates are not explicit); refinement trends are
/// compared by the caller across resolutions. Throws ConfigError when
/// phi_tilde fails its hypotheses (spacelike convex, > u inside, = u on the
/// boundary within h^2).
std::vector<CheckEntry> pogorelov_report(const grid::GridField& u,
                                         const expr::Expression& phi_tilde,
                                         const std::vector<double>& alphas,
                                         int boundary_samples = 64);

struct BarrierParams {
  double theta = 0.1;
  double K = 1.0;
  double delta = 0.05;
  double t = 0.0;  // 0: default 1.1 N delta / 2, so delta < 2t/N
  double N = 1.0;
  double b = 1.0;  // exponent of the 1 - exp(-bW) transform
};

/// The boundary strip omega_delta at a boundary point in its rotated frame
/// (tangents first, inner normal last), with the barrier
/// v = rho(x') - x_n - theta |x'|^2 + K x_n^2 and Psi = v - t d + (N/2) d^2
/// evaluated on volume samples and on the three boundary pieces.
struct BarrierBundle {
  grid::DomainSpec domain;
  Vec x0;
  Mat frame;  // columns: n-1 tangents, then the inner normal
  BarrierParams params;

  struct Sample {
    Vec xloc;   // (x', x_n) in the frame
    Vec xglob;
    double v = 0.0;
    double dist = 0.0;  // distance to the boundary
    double psi = 0.0;
    Vec kappa_d2v;  // eigenvalues of the frame Hessian of v at this x'
  };
  std::vector<Sample> interior;
  std::vector<Sample> part1, part2, part3;  // x_n = rho; x_n = rho + delta^2; |x'| = delta

  double rho(const Vec& xprime) const;           // exact boundary graph height
  Vec rho_grad(const Vec& xprime) const;
  Mat rho_hess(const Vec& xprime) const;
  Vec to_global(const Vec& xloc) const;
};

/// Requires (kappa^b_1 - 3 theta, ..., kappa^b_{n-1} - 3 theta, 2K) in Gamma
/// at x0; throws ConfigError otherwise.
BarrierBundle build_barriers(const grid::DomainSpec& domain, const Vec& x0,
                             const BarrierParams& params);

/// The three piecewise inequalities on the strip boundary, the largest eta0
/// with lambda(D^2 v - 2 eta0 I) in Gamma (bisection over (0, 1]), Psi <= 0,
/// -t d + (N/2) d^2 <= 0, and boundedness of the 1 - exp(-bW) transform.
std::vector<CheckEntry> check_barrier_inequalities(const BarrierBundle& bundle);

/// On a solved field: m = inf over the boundary of the tangential trace
/// quantity, and the minimum of S_{1;n}(D^2 u, Du) in the frame whose last
/// vector is the inner normal. The two routes must agree; both minima are
/// asserted positive.
std::vector<CheckEntry> boundary_normal_quantities(const grid::GridField& u,
                                                   const grid::DomainSpec& domain,
                                                   int samples = 64);

/// 1 - exp(-b w): increasing in w and bounded above by 1.
double wtilde(double b, double w);

}  // namespace etacurv::estimates
