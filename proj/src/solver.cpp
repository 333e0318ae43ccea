#include "etacurv/solver.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

#include "etacurv/symfun.hpp"

namespace etacurv::solver {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Stage right-hand side t * target(x, z) + (1 - t) * base_i; the base term is
// per-node data (the curvature of the continuation's starting iterate).
struct StageRhs {
  const Rhs* target = nullptr;
  double t = 1.0;
  const Vec* base = nullptr;

  double value(int i, const Vec& x, double z) const {
    double v = t * target->value(x, z);
    if (base) v += (1.0 - t) * (*base)(i);
    return v;
  }
  double dz(const Vec& x, double z) const { return t * target->dz(x, z); }
};

struct NodeState {
  geom::GraphJet jet;
};

struct GuardHit {
  bool hit = false;
  bool spacelike = false;
  int node = -1;
  Vec kappa;
  double value = 0.0;  // |Du| or cone margin
};

bool evaluate(const grid::GridField& u, geom::Curvature eq, const StageRhs& rhs,
              const SolverConfig& cfg, std::vector<NodeState>& states, Vec& residual,
              GuardHit& guard) {
  const auto& sk = u.skeleton();
  const int m = sk.num_nodes();
  states.resize(m);
  residual.resize(m);
  guard = GuardHit{};
  for (int i = 0; i < m; ++i) {
    const Vec du = u.gradient_at(i);
    const double s = du.norm();
    if (s > 1.0 - cfg.theta_min) {
      guard = {true, true, i, Vec(), s};
      return false;
    }
    states[i].jet = geom::make_jet(du, u.hessian_at(i));
    if (geom::needs_cone_guard(eq)) {
      const double margin = geom::admissibility_margin(eq, states[i].jet.kappa);
      if (margin <= cfg.cone_guard) {
        guard = {true, false, i, states[i].jet.kappa, margin};
        return false;
      }
    }
    residual(i) = geom::curvature_value(eq, states[i].jet.kappa) -
                  rhs.value(i, sk.node_coord(i), u.values()(i));
  }
  return true;
}

void assemble_jacobian(const grid::GridField& u, geom::Curvature eq, const StageRhs& rhs,
                       const std::vector<NodeState>& states, SpMat& jac) {
  const auto& sk = u.skeleton();
  const int m = sk.num_nodes();
  const int n = sk.dim();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(m) * (2 + 3 * sk.num_lines()));
  grid::StencilEntry st[3];
  for (int i = 0; i < m; ++i) {
    const auto lc = geom::linearize(states[i].jet, eq);
    for (int d = 0; d < n; ++d) {
      sk.line_second_stencil(i, sk.axis_line(d), st);
      for (const auto& e : st) {
        if (e.node >= 0) trip.emplace_back(i, e.node, lc.Gij(d, d) * e.w);
      }
    }
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        // H_pq = (S_d1 - S_d2)/2; the value depends on both symmetric slots
        const double gpq = 2.0 * lc.Gij(p, q);
        sk.line_second_stencil(i, sk.diag_line(p, q, false), st);
        for (const auto& e : st) {
          if (e.node >= 0) trip.emplace_back(i, e.node, 0.5 * gpq * e.w);
        }
        sk.line_second_stencil(i, sk.diag_line(p, q, true), st);
        for (const auto& e : st) {
          if (e.node >= 0) trip.emplace_back(i, e.node, -0.5 * gpq * e.w);
        }
      }
    }
    for (int d = 0; d < n; ++d) {
      sk.line_gradient_stencil(i, sk.axis_line(d), st);
      for (const auto& e : st) {
        if (e.node >= 0) trip.emplace_back(i, e.node, lc.Gs(d) * e.w);
      }
    }
    trip.emplace_back(i, i, -rhs.dz(sk.node_coord(i), u.values()(i)));
  }
  jac.resize(m, m);
  jac.setFromTriplets(trip.begin(), trip.end());
}

FailureInfo guard_failure(const grid::GridSkeleton& sk, const GuardHit& g) {
  FailureInfo f;
  f.kind = g.spacelike ? FailureKind::NotSpacelike : FailureKind::ConeExit;
  f.node = g.node;
  f.x = sk.node_coord(g.node);
  f.kappa = g.kappa;
  f.margin = g.value;
  f.message = g.spacelike
                  ? "spacelike guard violated: |Du| = " + std::to_string(g.value)
                  : "admissibility cone left: margin = " + std::to_string(g.value);
  return f;
}

struct NewtonOutcome {
  bool converged = false;
  int iterations = 0;
  double final_residual = 0.0;
  FailureInfo failure;
};

NewtonOutcome newton_stage(grid::GridField& u, geom::Curvature eq, const StageRhs& rhs,
                           const SolverConfig& cfg, std::vector<double>& history) {
  const auto& sk = u.skeleton();
  NewtonOutcome out;
  std::vector<NodeState> states, trial_states;
  Vec residual, trial_residual;
  GuardHit guard;
  if (!evaluate(u, eq, rhs, cfg, states, residual, guard)) {
    out.failure = guard_failure(sk, guard);
    out.failure.message = "initial iterate infeasible: " + out.failure.message;
    return out;
  }
  double rnorm = residual.cwiseAbs().maxCoeff();
  history.push_back(rnorm);

  SpMat jac;
  Eigen::SparseLU<SpMat> lu;
  grid::GridField trial = u;

  for (int it = 0; it < cfg.max_newton; ++it) {
    if (rnorm <= cfg.newton_tol) {
      out.converged = true;
      out.iterations = it;
      out.final_residual = rnorm;
      return out;
    }
    assemble_jacobian(u, eq, rhs, states, jac);
    lu.compute(jac);
    if (lu.info() != Eigen::Success) {
      out.failure.kind = FailureKind::LinearSolve;
      out.failure.message = "sparse LU factorization failed";
      out.iterations = it;
      out.final_residual = rnorm;
      return out;
    }
    const Vec step = lu.solve(-residual);

    double s = 1.0;
    bool accepted = false;
    GuardHit last_guard;
    while (s >= cfg.min_step) {
      trial.values() = u.values() + s * step;
      GuardHit g;
      if (!evaluate(trial, eq, rhs, cfg, trial_states, trial_residual, g)) {
        last_guard = g;
        s *= cfg.damping_factor;
        continue;
      }
      const double rt = trial_residual.cwiseAbs().maxCoeff();
      if (rt <= (1.0 - 1e-4 * s) * rnorm) {
        u.values().swap(trial.values());
        states.swap(trial_states);
        residual.swap(trial_residual);
        rnorm = rt;
        history.push_back(rnorm);
        accepted = true;
        break;
      }
      s *= cfg.damping_factor;
    }
    if (!accepted) {
      if (last_guard.hit) {
        out.failure = guard_failure(sk, last_guard);
      } else {
        out.failure.kind = FailureKind::Stagnation;
        out.failure.message = "line search stalled at residual " + std::to_string(rnorm);
      }
      out.iterations = it + 1;
      out.final_residual = rnorm;
      return out;
    }
  }
  out.converged = rnorm <= cfg.newton_tol;
  out.iterations = cfg.max_newton;
  out.final_residual = rnorm;
  if (!out.converged) {
    out.failure.kind = FailureKind::Stagnation;
    out.failure.message =
        "Newton iteration budget exhausted at residual " + std::to_string(rnorm);
  }
  return out;
}

void finalize(SolveResult& res, geom::Curvature eq) {
  const auto& sk = res.u.skeleton();
  double max_grad = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < sk.num_nodes(); ++i) {
    const Vec du = res.u.gradient_at(i);
    max_grad = std::max(max_grad, du.norm());
    const auto jet = geom::make_jet(du, res.u.hessian_at(i));
    min_margin = std::min(min_margin, geom::admissibility_margin(eq, jet.kappa));
  }
  res.theta0 = 1.0 - max_grad;
  res.cone_margin = min_margin;
}

SolveResult continuation_solve(geom::Curvature eq, const Rhs& target, grid::GridField start,
                               const SolverConfig& cfg) {
  SolveResult res;
  res.u = std::move(start);

  Vec base;
  try {
    base = curvature_of_field(res.u, eq);
  } catch (const NotSpacelikeError& e) {
    res.failure.kind = FailureKind::NotSpacelike;
    res.failure.message = std::string("starting iterate not spacelike: ") + e.what();
    return res;
  }

  const int stages = std::max(1, cfg.continuation_steps);
  for (int s = 1; s <= stages; ++s) {
    StageRhs rhs{&target, static_cast<double>(s) / stages, &base};
    const auto out = newton_stage(res.u, eq, rhs, cfg, res.residual_history);
    res.iterations.push_back(out.iterations);
    res.stage_residuals.push_back(out.final_residual);
    res.final_residual = out.final_residual;
    if (!out.converged) {
      res.failure = out.failure;
      return res;
    }
  }
  res.converged = true;
  finalize(res, eq);
  return res;
}

grid::GridField seed_from_phi(std::shared_ptr<const grid::GridSkeleton> skel,
                              const expr::Expression& phi) {
  grid::GridField u(std::move(skel));
  u.fill([&phi](const Vec& x) { return phi.eval(x); });
  return u;
}

}  // namespace

Vec curvature_of_field(const grid::GridField& u, geom::Curvature eq) {
  const auto& sk = u.skeleton();
  Vec out(sk.num_nodes());
  for (int i = 0; i < sk.num_nodes(); ++i) {
    const auto jet = geom::make_jet(u.gradient_at(i), u.hessian_at(i));
    out(i) = geom::curvature_value(eq, jet.kappa);
  }
  return out;
}

Vec residual_of_field(const grid::GridField& u, geom::Curvature eq, const Rhs& rhs) {
  const auto& sk = u.skeleton();
  Vec out(sk.num_nodes());
  for (int i = 0; i < sk.num_nodes(); ++i) {
    const auto jet = geom::make_jet(u.gradient_at(i), u.hessian_at(i));
    out(i) =
        geom::curvature_value(eq, jet.kappa) - rhs.value(sk.node_coord(i), u.values()(i));
  }
  return out;
}

SolveResult solve_mean_curvature(const ProblemSpec& problem,
                                 std::shared_ptr<const grid::GridSkeleton> skel,
                                 const SolverConfig& config) {
  Rhs rhs;
  rhs.value = [&problem](const Vec& x, double z) { return problem.psi.eval(x, z); };
  const expr::Expression dz = problem.psi.diff_z();
  rhs.dz = [dz](const Vec& x, double z) { return dz.eval(x, z); };
  auto start = seed_from_phi(skel, problem.phi);
  auto res = continuation_solve(geom::Curvature::Mean, rhs, std::move(start), config);
  return res;
}

SolveResult solve_lorentz_gauss(const ProblemSpec& problem,
                                std::shared_ptr<const grid::GridSkeleton> skel,
                                const SolverConfig& config) {
  Rhs rhs;
  rhs.value = [&problem](const Vec& x, double z) { return problem.psi.eval(x, z); };
  const expr::Expression dz = problem.psi.diff_z();
  rhs.dz = [dz](const Vec& x, double z) { return dz.eval(x, z); };
  auto start = seed_from_phi(skel, problem.phi);
  auto res =
      continuation_solve(geom::Curvature::LorentzGauss, rhs, std::move(start), config);
  if (!res.converged && res.failure.kind == FailureKind::ConeExit) {
    res.failure.kind = FailureKind::ConvexityLost;
    res.failure.message = "strict convexity lost: " + res.failure.message;
  }
  return res;
}

SolveResult solve_k_eta(const ProblemSpec& problem, const grid::GridField& subsolution,
                        const SolverConfig& config) {
  SolveResult res;
  const auto& sk = subsolution.skeleton();

  // subsolution admissibility: kappa in Gamma and K_eta >= psi(x, usub) - 1e-8
  for (int i = 0; i < sk.num_nodes(); ++i) {
    Vec du;
    double margin = 0.0, keta = 0.0;
    try {
      du = subsolution.gradient_at(i);
      const auto jet = geom::make_jet(du, subsolution.hessian_at(i));
      margin = symfun::gamma_margin(jet.kappa);
      keta = symfun::f_eta(jet.kappa);
      if (margin <= 0.0) throw NotAdmissibleError(margin);
    } catch (const std::exception& e) {
      res.u = subsolution;
      res.failure.kind = FailureKind::BadSubsolution;
      res.failure.node = i;
      res.failure.x = sk.node_coord(i);
      res.failure.message = std::string("subsolution not admissible at node: ") + e.what();
      return res;
    }
    const double want = problem.psi.eval(sk.node_coord(i), subsolution.values()(i));
    if (keta < want - 1e-8) {
      res.u = subsolution;
      res.failure.kind = FailureKind::BadSubsolution;
      res.failure.node = i;
      res.failure.x = sk.node_coord(i);
      res.failure.margin = keta - want;
      res.failure.message = "subsolution inequality K_eta >= psi fails by " +
                            std::to_string(want - keta);
      return res;
    }
  }

  Rhs rhs;
  rhs.value = [&problem](const Vec& x, double z) { return problem.psi.eval(x, z); };
  const expr::Expression dz = problem.psi.diff_z();
  rhs.dz = [dz](const Vec& x, double z) { return dz.eval(x, z); };
  return continuation_solve(geom::Curvature::KEta, rhs, subsolution, config);
}

std::optional<grid::GridField> build_quadratic_subsolution(
    std::shared_ptr<const grid::GridSkeleton> skel, const expr::Expression& phi,
    double psi_sup, const SolverConfig& config) {
  const auto& sk = *skel;
  const auto& dom = sk.domain();
  const int n = sk.dim();

  // phi must be affine spacelike (second derivatives vanish, slope < 1)
  {
    const Vec probe = 0.5 * (dom.bbox_min() + dom.bbox_max());
    if (phi.hessian(probe).cwiseAbs().maxCoeff() > 1e-10 ||
        phi.hessian(dom.center).cwiseAbs().maxCoeff() > 1e-10) {
      throw ConfigError("quadratic subsolution route requires affine boundary data");
    }
    if (phi.gradient(dom.center).norm() >= 1.0) {
      throw ConfigError("affine boundary data is not spacelike");
    }
  }
  if (dom.kind == grid::DomainSpec::Kind::Superellipse && dom.power() != 2.0) {
    // no quadratic vanishes on a non-ellipse superellipse boundary
    return std::nullopt;
  }

  const Vec slope = phi.gradient(dom.center);
  // q = (sum ((x-c)/a)^2 - 1)/2: zero on the boundary, D^2 q = diag(1/a_i^2)
  Mat d2q = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) d2q(i, i) = 1.0 / (dom.semi_axes(i) * dom.semi_axes(i));
  auto qval = [&](const Vec& x) {
    double s = -0.5;
    for (int i = 0; i < n; ++i) {
      const double t = (x(i) - dom.center(i)) / dom.semi_axes(i);
      s += 0.5 * t * t;
    }
    return s;
  };
  auto qgrad = [&](const Vec& x) {
    Vec g(n);
    for (int i = 0; i < n; ++i) {
      g(i) = (x(i) - dom.center(i)) / (dom.semi_axes(i) * dom.semi_axes(i));
    }
    return g;
  };

  // feasible(c): spacelike with margin, kappa in Gamma, K_eta >= psi_sup at all nodes
  auto feasibility = [&](double c) {
    double min_keta = std::numeric_limits<double>::infinity();
    for (int i = 0; i < sk.num_nodes(); ++i) {
      const Vec x = sk.node_coord(i);
      const Vec du = slope + c * qgrad(x);
      if (du.norm() > 1.0 - config.theta_min) return -std::numeric_limits<double>::infinity();
      const auto jet = geom::make_jet(du, c * d2q);
      if (symfun::gamma_margin(jet.kappa) <= config.cone_guard) {
        return -std::numeric_limits<double>::infinity();
      }
      min_keta = std::min(min_keta, symfun::f_eta(jet.kappa));
    }
    return min_keta - psi_sup;
  };

  // upper bound for c from the spacelike constraint, then scan + bisection for
  // the smallest feasible c
  double c_cap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < sk.num_nodes(); ++i) {
    const double qg = qgrad(sk.node_coord(i)).norm();
    if (qg > 1e-14) {
      c_cap = std::min(c_cap, (1.0 - config.theta_min) / qg * 2.0);
    }
  }
  if (!std::isfinite(c_cap)) c_cap = 1e3;

  const int scan = 64;
  double feasible_c = -1.0, infeasible_below = 0.0;
  for (int k = 1; k <= scan; ++k) {
    const double c = c_cap * k / scan;
    if (feasibility(c) >= 0.0) {
      feasible_c = c;
      infeasible_below = c_cap * (k - 1) / scan;
      break;
    }
  }
  if (feasible_c < 0.0) return std::nullopt;
  // bisect down to the transition, keep a feasible value
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (infeasible_below + feasible_c);
    if (mid <= 0.0) break;
    (feasibility(mid) >= 0.0 ? feasible_c : infeasible_below) = mid;
  }

  grid::GridField v(skel);
  const double c = feasible_c;
  auto phi_aff = [&](const Vec& x) { return phi.eval(x); };
  for (int i = 0; i < sk.num_nodes(); ++i) {
    const Vec x = sk.node_coord(i);
    v.values()(i) = phi_aff(x) + c * qval(x);
  }
  v.set_boundary(phi_aff);  // q vanishes on the boundary
  return v;
}

PipelineResult run_pipeline(const ProblemSpec& problem,
                            std::shared_ptr<const grid::GridSkeleton> skel,
                            const std::string& route, const SolverConfig& config) {
  PipelineResult pr;
  pr.route = route;
  const int n = skel->dim();

  // supersolution: H = n/(n-1) psi^{1/n}
  {
    Rhs rhs;
    const auto& psi = problem.psi;
    rhs.value = [&psi, n](const Vec& x, double z) {
      return static_cast<double>(n) / (n - 1) * std::pow(psi.eval(x, z), 1.0 / n);
    };
    const expr::Expression dz = psi.diff_z();
    rhs.dz = [&psi, dz, n](const Vec& x, double z) {
      const double p = psi.eval(x, z);
      return 1.0 / (n - 1) * std::pow(p, 1.0 / n - 1.0) * dz.eval(x, z);
    };
    auto start = grid::GridField(skel);
    start.fill([&problem](const Vec& x) { return problem.phi.eval(x); });
    pr.supersolution =
        continuation_solve(geom::Curvature::Mean, rhs, std::move(start), config);
    if (!pr.supersolution.converged) {
      pr.error = "mean-curvature supersolution failed: " + pr.supersolution.failure.message;
      return pr;
    }
  }

  double phi_max = 0.0;
  for (int c = 0; c < skel->num_crossings(); ++c) {
    phi_max = std::max(phi_max, std::abs(problem.phi.eval(skel->crossing_point(c))));
  }
  pr.mu0 = std::max(phi_max, pr.supersolution.u.max_abs());

  if (route == "quadratic") {
    double psi_sup = 0.0;
    for (int i = 0; i < skel->num_nodes(); ++i) {
      const Vec x = skel->node_coord(i);
      for (int k = -4; k <= 4; ++k) {
        psi_sup = std::max(psi_sup, problem.psi.eval(x, pr.mu0 * k / 4.0));
      }
    }
    auto v = build_quadratic_subsolution(skel, problem.phi, psi_sup, config);
    if (!v) {
      pr.error =
          "no admissible quadratic subsolution; use the lorentz_gauss route instead";
      return pr;
    }
    pr.usub = std::move(*v);
  } else if (route == "lorentz_gauss") {
    pr.subsolution = solve_lorentz_gauss(problem, skel, config);
    if (!pr.subsolution.converged) {
      pr.error = "Lorentz-Gauss subsolution failed: " + pr.subsolution.failure.message;
      return pr;
    }
    pr.usub = pr.subsolution.u;
  } else {
    pr.error = "unknown subsolution route: " + route;
    return pr;
  }

  pr.main = solve_k_eta(problem, pr.usub, config);
  if (!pr.main.converged) {
    pr.error = "main solve failed: " + pr.main.failure.message;
    return pr;
  }
  pr.ok = true;
  return pr;
}

}  // namespace etacurv::solver
