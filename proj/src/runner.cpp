#include "etacurv/runner.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace etacurv::runner {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Vec json_vec(const json& j) {
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  cfg.config_hash = fnv1a(text);
  try {
    const auto& dj = j.at("domain");
    const std::string kind = dj.at("kind").get<std::string>();
    const int n = dj.value("n", 2);
    Vec center = dj.contains("center") ? json_vec(dj.at("center")) : Vec::Zero(n);
    if (center.size() != n) throw ConfigError("domain.center has wrong dimension");
    if (kind == "disk") {
      cfg.domain = grid::DomainSpec::disk(n, center, dj.at("radius").get<double>());
    } else if (kind == "ellipse") {
      cfg.domain = grid::DomainSpec::ellipse(center, json_vec(dj.at("semi_axes")));
    } else if (kind == "superellipse") {
      cfg.domain = grid::DomainSpec::superellipse(center, json_vec(dj.at("semi_axes")),
                                                  dj.at("exponent").get<double>());
    } else {
      throw ConfigError("unknown domain kind: " + kind);
    }
    if (cfg.domain.n < 2 || cfg.domain.n > 3) {
      throw ConfigError("only n = 2 and n = 3 grids are supported");
    }

    const std::string eq = j.value("equation", "k_eta");
    if (eq == "k_eta") {
      cfg.equation = geom::Curvature::KEta;
    } else if (eq == "mean_curvature") {
      cfg.equation = geom::Curvature::Mean;
    } else if (eq == "lorentz_gauss") {
      cfg.equation = geom::Curvature::LorentzGauss;
    } else {
      throw ConfigError("unknown equation: " + eq);
    }

    cfg.psi_src = j.at("psi").get<std::string>();
    cfg.phi_src = j.at("phi").get<std::string>();
    cfg.psi = expr::Expression::parse(cfg.psi_src, cfg.domain.n);
    cfg.phi = expr::Expression::parse(cfg.phi_src, cfg.domain.n);
    if (cfg.phi.depends_on_z()) throw ConfigError("phi must not depend on z");

    if (j.contains("h")) cfg.h = j.at("h").get<double>();
    if (j.contains("h_list")) {
      for (const auto& v : j.at("h_list")) cfg.h_list.push_back(v.get<double>());
      for (size_t i = 1; i < cfg.h_list.size(); ++i) {
        if (!(cfg.h_list[i] < cfg.h_list[i - 1])) {
          throw ConfigError("h_list must be strictly decreasing");
        }
      }
      if (cfg.h == 0.0 && !cfg.h_list.empty()) cfg.h = cfg.h_list.front();
    }
    if (cfg.h <= 0.0) throw ConfigError("config must set a positive h (or h_list)");

    if (j.contains("solver")) {
      const auto& sj = j.at("solver");
      auto& sc = cfg.solver_config;
      sc.newton_tol = sj.value("newton_tol", sc.newton_tol);
      sc.max_newton = sj.value("max_newton", sc.max_newton);
      sc.continuation_steps = sj.value("continuation_steps", sc.continuation_steps);
      sc.theta_min = sj.value("theta_min", sc.theta_min);
      sc.cone_guard = sj.value("cone_guard", sc.cone_guard);
      sc.min_step = sj.value("min_step", sc.min_step);
      if (sc.newton_tol <= 0 || sc.theta_min <= 0 || sc.cone_guard <= 0 ||
          sc.min_step <= 0 || sc.max_newton <= 0 || sc.continuation_steps <= 0) {
        throw ConfigError("solver parameters must be positive");
      }
    }
    cfg.route = j.value("subsolution_route", cfg.route);
    if (cfg.route != "lorentz_gauss" && cfg.route != "quadratic") {
      throw ConfigError("subsolution_route must be lorentz_gauss or quadratic");
    }
    cfg.cache = j.value("cache", true);

    if (j.contains("reference")) {
      cfg.reference_src = j.at("reference").get<std::string>();
      cfg.reference = expr::Expression::parse(cfg.reference_src, cfg.domain.n);
    }
    if (j.contains("phi_tilde")) {
      cfg.phi_tilde_src = j.at("phi_tilde").get<std::string>();
      cfg.phi_tilde = expr::Expression::parse(cfg.phi_tilde_src, cfg.domain.n);
    }
    if (j.contains("barriers")) {
      const auto& bj = j.at("barriers");
      auto& bp = cfg.barrier_params;
      bp.theta = bj.value("theta", bp.theta);
      bp.K = bj.value("K", bp.K);
      bp.N = bj.value("N", bp.N);
      bp.t = bj.value("t", 0.0);
      bp.b = bj.value("b", bp.b);
      if (bj.contains("delta")) {
        cfg.barrier_deltas = {bj.at("delta").get<double>()};
      } else if (bj.contains("deltas")) {
        for (const auto& v : bj.at("deltas")) cfg.barrier_deltas.push_back(v.get<double>());
      }
      cfg.barrier_angle = bj.value("angle", cfg.barrier_angle);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
  return cfg;
}

void validate_hypotheses(const RunConfig& cfg, double mu) {
  const auto& dom = cfg.domain;
  const int n = dom.n;
  const expr::Expression psi_z = cfg.psi.diff_z();
  const int zsamp = cfg.psi.depends_on_z() ? 17 : 1;

  // psi > 0 and psi_z >= 0 on an interior sample grid x [-mu, mu]
  const int per_axis = 9;
  std::vector<Vec> pts;
  {
    const Vec lo = dom.bbox_min(), hi = dom.bbox_max();
    std::vector<int> idx(n, 0);
    while (true) {
      Vec x(n);
      for (int a = 0; a < n; ++a) {
        x(a) = lo(a) + (hi(a) - lo(a)) * idx[a] / (per_axis - 1);
      }
      if (dom.level(x) <= 0.0) pts.push_back(x);
      int a = 0;
      for (; a < n; ++a) {
        if (++idx[a] < per_axis) break;
        idx[a] = 0;
      }
      if (a == n) break;
    }
  }
  for (const auto& x : pts) {
    for (int k = 0; k < zsamp; ++k) {
      const double z = zsamp == 1 ? 0.0 : -mu + 2.0 * mu * k / (zsamp - 1);
      if (!(cfg.psi.eval(x, z) > 0.0)) {
        throw ConfigError("hypothesis violated: psi > 0 fails at a sampled point");
      }
      if (psi_z.eval(x, z) < -1e-14) {
        throw ConfigError("hypothesis violated: psi_z >= 0 fails at a sampled point");
      }
    }
  }

  // |grad phi| restricted to the boundary < 1 (spacelike boundary data)
  for (const auto& bp : grid::boundary_geometry(dom, 128)) {
    const Vec g = cfg.phi.gradient(bp.x);
    const Vec gt = g - bp.inner_normal.dot(g) * bp.inner_normal;
    if (gt.norm() >= 1.0) {
      throw ConfigError(
          "hypothesis violated: |boundary gradient of phi| < 1 fails (boundary data "
          "is not spacelike)");
    }
  }
}

namespace {

json failure_json(const solver::FailureInfo& f) {
  json j;
  switch (f.kind) {
    case solver::FailureKind::None: j["kind"] = "none"; break;
    case solver::FailureKind::NotSpacelike: j["kind"] = "not_spacelike"; break;
    case solver::FailureKind::ConeExit: j["kind"] = "cone_exit"; break;
    case solver::FailureKind::ConvexityLost: j["kind"] = "convexity_lost"; break;
    case solver::FailureKind::Stagnation: j["kind"] = "stagnation"; break;
    case solver::FailureKind::LinearSolve: j["kind"] = "linear_solve"; break;
    case solver::FailureKind::BadSubsolution: j["kind"] = "bad_subsolution"; break;
  }
  if (f.node >= 0) {
    j["node"] = f.node;
    j["x"] = std::vector<double>(f.x.data(), f.x.data() + f.x.size());
    if (f.kappa.size()) {
      j["kappa"] = std::vector<double>(f.kappa.data(), f.kappa.data() + f.kappa.size());
    }
    j["margin"] = f.margin;
  }
  if (!f.message.empty()) j["message"] = f.message;
  return j;
}

json result_json(const solver::SolveResult& r) {
  json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["stage_residuals"] = r.stage_residuals;
  j["final_residual"] = r.final_residual;
  j["theta0"] = r.theta0;
  j["cone_margin"] = r.cone_margin;
  if (r.failure.kind != solver::FailureKind::None) j["failure"] = failure_json(r.failure);
  return j;
}

json entries_json(const std::vector<estimates::CheckEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    json je;
    je["name"] = e.name;
    je["lhs"] = e.lhs;
    je["rhs"] = e.rhs;
    je["satisfied"] = e.satisfied;
    je["slack"] = e.slack;
    if (!e.params.empty()) je["params"] = e.params;
    arr.push_back(je);
  }
  return arr;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << text;
}

struct SolveArtifacts {
  solver::PipelineResult pipeline;       // equation == KEta
  solver::SolveResult single;            // other equations
  bool is_pipeline = false;
  std::shared_ptr<const grid::GridSkeleton> skel;
};

SolveArtifacts run_configured_solve(const RunConfig& cfg, double h) {
  SolveArtifacts art;
  art.skel = grid::GridSkeleton::build(cfg.domain, h);
  solver::ProblemSpec problem{cfg.domain, cfg.equation, cfg.psi, cfg.phi};
  if (cfg.equation == geom::Curvature::KEta) {
    art.is_pipeline = true;
    art.pipeline = solver::run_pipeline(problem, art.skel, cfg.route, cfg.solver_config);
  } else if (cfg.equation == geom::Curvature::Mean) {
    art.single = solver::solve_mean_curvature(problem, art.skel, cfg.solver_config);
  } else {
    art.single = solver::solve_lorentz_gauss(problem, art.skel, cfg.solver_config);
  }
  return art;
}

const solver::SolveResult& main_result(const SolveArtifacts& art) {
  return art.is_pipeline ? art.pipeline.main : art.single;
}

}  // namespace

int solve_to_directory(const RunConfig& cfg, const std::string& out_dir, bool use_cache) {
  fs::create_directories(out_dir);
  const std::string key = hex64(cfg.config_hash);
  const fs::path cache_dir = fs::path(out_dir) / "cache" / key;
  const std::vector<std::string> names = {"solution.csv", "report.json", "usub.csv",
                                          "usuper.csv"};

  if (use_cache && fs::exists(cache_dir / "report.json")) {
    for (const auto& name : names) {
      if (fs::exists(cache_dir / name)) {
        fs::copy_file(cache_dir / name, fs::path(out_dir) / name,
                      fs::copy_options::overwrite_existing);
      }
    }
    std::cout << "cache hit " << key << "\n";
    return 0;
  }

  const auto t0 = std::chrono::steady_clock::now();
  validate_hypotheses(cfg, std::max(1.0, 2.0 * std::abs(cfg.phi.eval(cfg.domain.center))));
  const auto art = run_configured_solve(cfg, cfg.h);
  const auto& res = main_result(art);
  const auto t1 = std::chrono::steady_clock::now();
  const double wall_ms =
      std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() / 1000.0;

  json report;
  report["config_hash"] = key;
  report["grid_hash"] = hex64(art.skel->content_hash());
  report["h"] = cfg.h;
  report["n"] = cfg.domain.n;
  report["equation"] = art.is_pipeline ? "k_eta"
                       : cfg.equation == geom::Curvature::Mean ? "mean_curvature"
                                                               : "lorentz_gauss";
  if (art.is_pipeline) {
    report["route"] = art.pipeline.route;
    report["mu0"] = art.pipeline.mu0;
    report["supersolution"] = result_json(art.pipeline.supersolution);
    if (art.pipeline.route == "lorentz_gauss") {
      report["subsolution"] = result_json(art.pipeline.subsolution);
    }
    report["main"] = result_json(art.pipeline.main);
    if (!art.pipeline.ok) report["error"] = art.pipeline.error;
  } else {
    report["main"] = result_json(res);
  }
  report["wall_time_ms"] = wall_ms;

  const bool ok = art.is_pipeline ? art.pipeline.ok : res.converged;
  if (!ok) {
    write_text((fs::path(out_dir) / "report.json").string(), report.dump(2) + "\n");
    const std::string why = art.is_pipeline ? art.pipeline.error : res.failure.message;
    std::cerr << "solver failure: " << why << "\n";
    return 2;
  }

  grid::write_csv(res.u, (fs::path(out_dir) / "solution.csv").string());
  if (art.is_pipeline) {
    grid::write_csv(art.pipeline.usub, (fs::path(out_dir) / "usub.csv").string());
    grid::write_csv(art.pipeline.supersolution.u,
                    (fs::path(out_dir) / "usuper.csv").string());
  }
  write_text((fs::path(out_dir) / "report.json").string(), report.dump(2) + "\n");

  if (use_cache) {
    fs::create_directories(cache_dir);
    for (const auto& name : names) {
      const fs::path src = fs::path(out_dir) / name;
      if (fs::exists(src)) {
        fs::copy_file(src, cache_dir / name, fs::copy_options::overwrite_existing);
      }
    }
  }
  std::cout << "converged: theta0 = " << res.theta0 << ", cone margin = " << res.cone_margin
            << ", residual = " << res.final_residual << "\n";
  return 0;
}

int cmd_solve(const std::string& config_path, const CommandOptions& opts) {
  try {
    RunConfig cfg = RunConfig::load(config_path);
    return solve_to_directory(cfg, opts.out_dir, cfg.cache && !opts.no_cache);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_verify(const std::string& solution_path, const std::string& config_path,
               const CommandOptions& opts) {
  try {
    RunConfig cfg = RunConfig::load(config_path);
    validate_hypotheses(cfg, std::max(1.0, 2.0 * std::abs(cfg.phi.eval(cfg.domain.center))));
    auto skel = grid::GridSkeleton::build(cfg.domain, cfg.h);
    grid::GridField u = grid::read_csv(skel, solution_path);
    u.set_boundary([&cfg](const Vec& x) { return cfg.phi.eval(x); });

    std::vector<estimates::CheckEntry> entries;
    std::map<std::string, double> constants;

    // residual of the configured equation on the loaded field
    solver::Rhs rhs;
    rhs.value = [&cfg](const Vec& x, double z) { return cfg.psi.eval(x, z); };
    const expr::Expression dz = cfg.psi.diff_z();
    rhs.dz = [dz](const Vec& x, double z) { return dz.eval(x, z); };
    double residual_norm = 0.0;
    bool admissible = true;
    try {
      residual_norm =
          solver::residual_of_field(u, cfg.equation, rhs).cwiseAbs().maxCoeff();
    } catch (const std::exception&) {
      admissible = false;
    }
    const double res_tol = std::max(1e-7, 1e3 * cfg.solver_config.newton_tol);
    {
      auto e = estimates::make_check("solution_residual", admissible ? residual_norm : 1e30,
                                     res_tol);
      entries.push_back(e);
    }

    double mu0 = u.max_abs();
    if (cfg.equation == geom::Curvature::KEta) {
      // recompute the comparison pair at the same resolution
      solver::ProblemSpec problem{cfg.domain, cfg.equation, cfg.psi, cfg.phi};
      auto pipeline = solver::run_pipeline(problem, skel, cfg.route, cfg.solver_config);
      if (pipeline.ok) {
        mu0 = std::max(mu0, pipeline.mu0);
        auto cmp = estimates::check_comparison(u, pipeline.usub, pipeline.supersolution.u);
        entries.insert(entries.end(), cmp.begin(), cmp.end());
      } else {
        auto e = estimates::make_check("comparison_pipeline_available", 1.0, 0.0);
        e.params["note"] = 0.0;
        entries.push_back(e);
      }
      auto bq = estimates::boundary_normal_quantities(u, cfg.domain);
      entries.insert(entries.end(), bq.begin(), bq.end());

      // AM-GM nodewise: K_eta^{1/n} <= (n-1)/n sigma_1
      const int n = cfg.domain.n;
      double worst = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < skel->num_nodes(); ++i) {
        const auto jet = geom::make_jet(u.gradient_at(i), u.hessian_at(i));
        const double lhs = std::pow(std::max(0.0, geom::k_eta(jet)), 1.0 / n);
        const double rhsv = (n - 1.0) / n * geom::mean_curvature(jet);
        worst = std::max(worst, lhs - rhsv);
      }
      entries.push_back(estimates::make_check("am_gm_nodewise", worst, 0.0, 1e-12));
    }

    auto gb = estimates::check_gradient_bound(u, cfg.psi, cfg.phi, mu0, &constants);
    entries.insert(entries.end(), gb.begin(), gb.end());

    if (cfg.phi_tilde) {
      auto pg = estimates::pogorelov_report(u, *cfg.phi_tilde, {0.0, 0.5, 1.0, 2.0});
      entries.insert(entries.end(), pg.begin(), pg.end());
    }

    json rep;
    rep["config_hash"] = hex64(cfg.config_hash);
    rep["grid_hash"] = hex64(skel->content_hash());
    rep["checks"] = entries_json(entries);
    rep["constants"] = constants;
    fs::create_directories(opts.out_dir);
    write_text((fs::path(opts.out_dir) / "estimates.json").string(), rep.dump(2) + "\n");

    bool all_ok = true;
    for (const auto& e : entries) all_ok = all_ok && e.satisfied;
    std::cout << (all_ok ? "verify: all checks passed" : "verify: some checks FAILED")
              << " (" << entries.size() << " checks)\n";
    return all_ok ? 0 : 3;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_convergence(const std::string& config_path, const CommandOptions& opts) {
  try {
    RunConfig cfg = RunConfig::load(config_path);
    if (cfg.h_list.size() < 3) {
      throw ConfigError("convergence study needs an h_list with at least 3 entries");
    }
    if (!cfg.reference) {
      throw ConfigError("convergence study needs a reference solution expression");
    }
    validate_hypotheses(cfg, std::max(1.0, 2.0 * std::abs(cfg.phi.eval(cfg.domain.center))));

    // the reference must be admissible for the configured equation
    {
      const Vec probe = cfg.domain.center;
      const Vec du = cfg.reference->gradient(probe);
      const Mat d2u = cfg.reference->hessian(probe);
      const auto jet = geom::make_jet(du, d2u);
      if (geom::admissibility_margin(cfg.equation, jet.kappa) <= 0.0) {
        throw ConfigError("reference solution is not admissible for the equation");
      }
    }

    std::vector<double> errs;
    for (double h : cfg.h_list) {
      const auto art = run_configured_solve(cfg, h);
      const auto& res = main_result(art);
      const bool ok = art.is_pipeline ? art.pipeline.ok : res.converged;
      if (!ok) {
        std::cerr << "solver failure at h = " << h << "\n";
        return 2;
      }
      double err = 0.0;
      for (int i = 0; i < art.skel->num_nodes(); ++i) {
        err = std::max(err, std::abs(res.u.values()(i) -
                                     cfg.reference->eval(art.skel->node_coord(i))));
      }
      errs.push_back(err);
    }

    std::ostringstream csv;
    csv << "h,linf_error,observed_order\n";
    double final_order = 0.0;
    std::cout << "h          L_inf error     order\n";
    for (size_t i = 0; i < errs.size(); ++i) {
      double order = 0.0;
      if (i > 0) {
        order = std::log(errs[i - 1] / errs[i]) / std::log(cfg.h_list[i - 1] / cfg.h_list[i]);
        final_order = order;
      }
      char line[128];
      std::snprintf(line, sizeof line, "%-10g %-15.6e %-8.3f\n", cfg.h_list[i], errs[i],
                    order);
      std::cout << line;
      csv << cfg.h_list[i] << "," << errs[i] << "," << order << "\n";
    }
    fs::create_directories(opts.out_dir);
    write_text((fs::path(opts.out_dir) / "convergence.csv").string(), csv.str());
    return final_order >= 1.8 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_barriers(const std::string& config_path, const CommandOptions& opts) {
  try {
    RunConfig cfg = RunConfig::load(config_path);
    std::vector<double> deltas = cfg.barrier_deltas;
    if (deltas.empty()) {
      for (double f : {0.2, 0.1, 0.05, 0.025}) deltas.push_back(f * cfg.domain.inradius());
    }
    Vec x0;
    if (cfg.domain.n == 2) {
      x0 = cfg.domain.boundary_point((Vec(1) << cfg.barrier_angle).finished());
    } else {
      x0 = cfg.domain.boundary_point((Vec(2) << M_PI / 2.0, cfg.barrier_angle).finished());
    }

    json all = json::array();
    bool any_pass = false;
    for (double d : deltas) {
      estimates::BarrierParams params = cfg.barrier_params;
      params.delta = d;
      params.t = cfg.barrier_params.t;  // 0 -> default 1.1 N delta / 2 inside the builder
      const auto bundle = estimates::build_barriers(cfg.domain, x0, params);
      const auto entries = estimates::check_barrier_inequalities(bundle);
      bool pass = true;
      for (const auto& e : entries) pass = pass && e.satisfied;
      any_pass = any_pass || pass;
      json jd;
      jd["delta"] = d;
      jd["t"] = bundle.params.t;
      jd["N"] = bundle.params.N;
      jd["theta"] = bundle.params.theta;
      jd["K"] = bundle.params.K;
      jd["checks"] = entries_json(entries);
      all.push_back(jd);
      std::cout << "delta = " << d << (pass ? ": all barrier checks hold" : ": FAILS")
                << "\n";
    }
    fs::create_directories(opts.out_dir);
    write_text((fs::path(opts.out_dir) / "barriers.json").string(), all.dump(2) + "\n");
    return any_pass ? 0 : 3;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace etacurv::runner
