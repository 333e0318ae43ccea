#include "etacurv/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "etacurv/geometry.hpp"
#include "etacurv/symfun.hpp"

namespace etacurv::estimates {

bool EstimateReport::all_satisfied() const {
  for (const auto& e : entries) {
    if (!e.satisfied) return false;
  }
  return true;
}

const CheckEntry* EstimateReport::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

CheckEntry make_check(const std::string& name, double lhs, double rhs, double tol) {
  CheckEntry e;
  e.name = name;
  e.lhs = lhs;
  e.rhs = rhs;
  e.satisfied = lhs <= rhs + tol;
  e.slack = rhs - lhs;
  return e;
}

namespace {

CheckEntry report_value(const std::string& name, double value) {
  CheckEntry e;
  e.name = name;
  e.lhs = value;
  e.rhs = value;
  e.satisfied = true;
  e.slack = 0.0;
  return e;
}

// multi-indices |alpha| <= deg in n variables, graded order
std::vector<std::vector<int>> multi_indices(int n, int deg) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == n - 1) {
      cur[pos] = left;
      out.push_back(cur);
      return;
    }
    for (int e = 0; e <= left; ++e) {
      cur[pos] = e;
      rec(pos + 1, left - e);
    }
  };
  for (int total = 0; total <= deg; ++total) rec(0, total);
  return out;
}

double monomial(const Vec& xi, const std::vector<int>& a) {
  double v = 1.0;
  for (size_t i = 0; i < a.size(); ++i) {
    for (int e = 0; e < a[i]; ++e) v *= xi(static_cast<int>(i));
  }
  return v;
}

// orthonormal tangent basis + normal, deterministic
Mat boundary_frame(const grid::DomainSpec& domain, const Vec& x) {
  const int n = domain.n;
  const Vec nin = domain.inner_normal(x);
  Mat q(n, n);
  q.col(n - 1) = nin;
  int filled = 1;
  for (int axis = 0; axis < n && filled < n; ++axis) {
    Vec e = Vec::Zero(n);
    e(axis) = 1.0;
    e -= nin.dot(e) * nin;
    for (int c = 0; c < filled - 1; ++c) e -= q.col(c).dot(e) * q.col(c);
    if (e.norm() > 1e-8) {
      q.col(filled - 1) = e / e.norm();
      ++filled;
    }
  }
  return q;  // columns 0..n-2 tangents, column n-1 inner normal
}

}  // namespace

FittedJet fit_jet_at(const grid::GridField& u, const Vec& x) {
  const auto& sk = u.skeleton();
  const int n = sk.dim();
  const double h = sk.spacing();
  const auto idx = multi_indices(n, 3);
  const int ncoef = static_cast<int>(idx.size());

  FittedJet out;
  for (double radius = 3.5 * h; radius <= 8.0 * h; radius *= 1.4) {
    std::vector<std::pair<Vec, double>> pts;  // offset, value
    std::vector<double> wts;
    for (int i = 0; i < sk.num_nodes(); ++i) {
      const Vec d = sk.node_coord(i) - x;
      const double r = d.norm();
      if (r <= radius) {
        pts.push_back({d, u.values()(i)});
        wts.push_back(std::pow(1.0 - r / (1.01 * radius), 4));
      }
    }
    for (int c = 0; c < sk.num_crossings(); ++c) {
      const Vec d = sk.crossing_point(c) - x;
      const double r = d.norm();
      if (r <= radius) {
        pts.push_back({d, u.boundary_values()(c)});
        wts.push_back(std::pow(1.0 - r / (1.01 * radius), 4));
      }
    }
    if (static_cast<int>(pts.size()) < 2 * ncoef) continue;

    Mat A(pts.size(), ncoef);
    Vec b(pts.size());
    for (size_t k = 0; k < pts.size(); ++k) {
      const double sw = std::sqrt(wts[k]);
      for (int c = 0; c < ncoef; ++c) A(static_cast<int>(k), c) = sw * monomial(pts[k].first / radius, idx[c]);
      b(static_cast<int>(k)) = sw * pts[k].second;
    }
    const Vec coef = A.colPivHouseholderQr().solve(b);

    out.ok = true;
    out.grad = Vec::Zero(n);
    out.hess = Mat::Zero(n, n);
    for (int c = 0; c < ncoef; ++c) {
      int total = 0;
      for (int a = 0; a < n; ++a) total += idx[c][a];
      if (total == 0) out.value = coef(c);
      if (total == 1) {
        for (int a = 0; a < n; ++a) {
          if (idx[c][a] == 1) out.grad(a) = coef(c) / radius;
        }
      }
      if (total == 2) {
        for (int a = 0; a < n; ++a) {
          if (idx[c][a] == 2) out.hess(a, a) = 2.0 * coef(c) / (radius * radius);
          for (int bb = a + 1; bb < n; ++bb) {
            if (idx[c][a] == 1 && idx[c][bb] == 1) {
              out.hess(a, bb) = out.hess(bb, a) = coef(c) / (radius * radius);
            }
          }
        }
      }
    }
    return out;
  }
  return out;  // ok = false
}

std::vector<CheckEntry> check_comparison(const grid::GridField& u,
                                         const grid::GridField& usub,
                                         const grid::GridField& usuper,
                                         int boundary_samples) {
  const auto& sk = u.skeleton();
  if (usub.skeleton().content_hash() != sk.content_hash() ||
      usuper.skeleton().content_hash() != sk.content_hash()) {
    throw ConfigError("check_comparison: fields live on different grids");
  }
  const double tol = 1e-6 * (1.0 + u.max_abs());
  std::vector<CheckEntry> out;

  const double worst_lower = (usub.values() - u.values()).maxCoeff();
  const double worst_upper = (u.values() - usuper.values()).maxCoeff();
  {
    auto e = make_check("comparison_subsolution_below", worst_lower, tol);
    e.params["tolerance"] = tol;
    out.push_back(e);
    auto e2 = make_check("comparison_supersolution_above", worst_upper, tol);
    e2.params["tolerance"] = tol;
    out.push_back(e2);
  }

  // inner-normal derivative ordering and boundary gradient bound at samples
  const auto bps = grid::boundary_geometry(sk.domain(), boundary_samples);
  double worst_nd = -std::numeric_limits<double>::infinity();
  double sup_du = 0.0, sup_du_sub = 0.0, sup_du_super = 0.0;
  int covered = 0;
  for (const auto& bp : bps) {
    const auto ju = fit_jet_at(u, bp.x);
    const auto js = fit_jet_at(usub, bp.x);
    const auto jS = fit_jet_at(usuper, bp.x);
    if (!ju.ok || !js.ok || !jS.ok) continue;
    ++covered;
    const double dnu = bp.inner_normal.dot(ju.grad);
    const double dns = bp.inner_normal.dot(js.grad);
    const double dnS = bp.inner_normal.dot(jS.grad);
    worst_nd = std::max(worst_nd, std::max(dns - dnu, dnu - dnS));
    sup_du = std::max(sup_du, ju.grad.norm());
    sup_du_sub = std::max(sup_du_sub, js.grad.norm());
    sup_du_super = std::max(sup_du_super, jS.grad.norm());
  }
  {
    auto e = make_check("comparison_normal_derivative_ordering", worst_nd, tol);
    e.params["coverage"] = static_cast<double>(covered) / bps.size();
    out.push_back(e);
    auto e2 = make_check("boundary_gradient_dominated", sup_du,
                         std::max(sup_du_sub, sup_du_super), tol);
    out.push_back(e2);
    auto e3 = make_check("boundary_gradient_spacelike", std::max(sup_du_sub, sup_du_super),
                         1.0);
    e3.params["theta_boundary"] = 1.0 - std::max(sup_du_sub, sup_du_super);
    out.push_back(e3);
  }
  return out;
}

std::vector<CheckEntry> check_gradient_bound(const grid::GridField& u,
                                             const expr::Expression& psi,
                                             const expr::Expression& phi, double mu0,
                                             std::map<std::string, double>* constants,
                                             int boundary_samples) {
  const auto& sk = u.skeleton();
  const auto& dom = sk.domain();
  const int n = sk.dim();

  // sample |D_x psi| and inf psi over the closure x [-mu0, mu0]
  std::vector<expr::Expression> dpsi;
  for (int a = 0; a < n; ++a) dpsi.push_back(psi.diff_x(a));
  const int zsamp = psi.depends_on_z() ? 21 : 1;
  double sup_dpsi = 0.0, inf_psi = std::numeric_limits<double>::infinity();
  auto scan_point = [&](const Vec& x) {
    for (int k = 0; k < zsamp; ++k) {
      const double z = zsamp == 1 ? 0.0 : -mu0 + 2.0 * mu0 * k / (zsamp - 1);
      double g2 = 0.0;
      for (int a = 0; a < n; ++a) {
        const double d = dpsi[a].eval(x, z);
        g2 += d * d;
      }
      sup_dpsi = std::max(sup_dpsi, std::sqrt(g2));
      inf_psi = std::min(inf_psi, psi.eval(x, z));
    }
  };
  for (int i = 0; i < sk.num_nodes(); ++i) scan_point(sk.node_coord(i));
  for (int c = 0; c < sk.num_crossings(); ++c) scan_point(sk.crossing_point(c));
  if (inf_psi <= 0.0) throw ConfigError("check_gradient_bound: psi must be positive");

  double sup_wt = 0.0, max_du = 0.0;
  for (int i = 0; i < sk.num_nodes(); ++i) {
    const double g = u.gradient_at(i).norm();
    if (g >= 1.0) throw NotSpacelikeError(g);
    max_du = std::max(max_du, g);
    sup_wt = std::max(sup_wt, 1.0 / std::sqrt(1.0 - g * g));
  }

  double sup_wt_bd = 0.0, sup_phi = 0.0;
  const auto bps = grid::boundary_geometry(dom, boundary_samples);
  int covered = 0;
  for (const auto& bp : bps) {
    sup_phi = std::max(sup_phi, std::abs(phi.eval(bp.x)));
    const auto j = fit_jet_at(u, bp.x);
    if (!j.ok) continue;
    ++covered;
    const double g = std::min(j.grad.norm(), 1.0 - 1e-12);
    sup_wt_bd = std::max(sup_wt_bd, 1.0 / std::sqrt(1.0 - g * g));
  }

  const double bconst = sup_dpsi / (n * inf_psi);
  const double rhs = std::exp(bconst * 2.0 * sup_phi + dom.diameter()) * sup_wt_bd;

  if (constants) {
    (*constants)["B"] = bconst;
    (*constants)["diameter"] = dom.diameter();
    (*constants)["mu0"] = mu0;
    (*constants)["sup_boundary_phi"] = sup_phi;
    (*constants)["sup_dpsi"] = sup_dpsi;
    (*constants)["inf_psi"] = inf_psi;
    (*constants)["theta0"] = 1.0 - max_du;
  }

  std::vector<CheckEntry> out;
  auto e = make_check("gradient_bound", sup_wt, rhs, 1e-12);
  e.params["coverage"] = static_cast<double>(covered) / bps.size();
  e.params["sup_wtilde_boundary"] = sup_wt_bd;
  out.push_back(e);
  auto e2 = make_check("spacelike_margin", max_du, 1.0);
  e2.params["theta0"] = 1.0 - max_du;
  out.push_back(e2);
  return out;
}

std::vector<CheckEntry> pogorelov_report(const grid::GridField& u,
                                         const expr::Expression& phi_tilde,
                                         const std::vector<double>& alphas,
                                         int boundary_samples) {
  const auto& sk = u.skeleton();
  const double h = sk.spacing();
  const double scale = 1.0 + u.max_abs();

  // hypotheses: phi_tilde spacelike convex, > u inside, = u on the boundary
  for (int i = 0; i < sk.num_nodes(); ++i) {
    const Vec x = sk.node_coord(i);
    if (phi_tilde.eval(x) - u.values()(i) < -h * h * scale) {
      throw ConfigError("pogorelov_report: phi_tilde is not above u in the interior");
    }
    if (phi_tilde.gradient(x).norm() >= 1.0) {
      throw ConfigError("pogorelov_report: phi_tilde is not spacelike");
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(phi_tilde.hessian(x));
    if (es.eigenvalues().minCoeff() < -1e-10) {
      throw ConfigError("pogorelov_report: phi_tilde is not convex");
    }
  }
  for (int c = 0; c < sk.num_crossings(); ++c) {
    const Vec x = sk.crossing_point(c);
    if (std::abs(phi_tilde.eval(x) - u.boundary_values()(c)) > h * h * scale) {
      throw ConfigError("pogorelov_report: phi_tilde does not match u on the boundary");
    }
  }

  std::vector<CheckEntry> out;
  double sup_d2 = 0.0;
  std::vector<double> sup_zeta(alphas.size(), 0.0);
  for (int i = 0; i < sk.num_nodes(); ++i) {
    const double d2 = u.hessian_at(i).cwiseAbs().maxCoeff();
    sup_d2 = std::max(sup_d2, d2);
    const double zeta = std::max(0.0, phi_tilde.eval(sk.node_coord(i)) - u.values()(i));
    for (size_t a = 0; a < alphas.size(); ++a) {
      sup_zeta[a] = std::max(sup_zeta[a], std::pow(zeta, alphas[a]) * d2);
    }
  }
  for (size_t a = 0; a < alphas.size(); ++a) {
    auto e = report_value("pogorelov_weighted_hessian", sup_zeta[a]);
    e.params["alpha"] = alphas[a];
    out.push_back(e);
  }

  double sup_d2_bd = 0.0;
  int covered = 0;
  for (const auto& bp : grid::boundary_geometry(sk.domain(), boundary_samples)) {
    const auto j = fit_jet_at(u, bp.x);
    if (!j.ok) continue;
    ++covered;
    sup_d2_bd = std::max(sup_d2_bd, j.hess.cwiseAbs().maxCoeff());
  }
  auto e = report_value("global_reduction_ratio", sup_d2 / (1.0 + sup_d2_bd));
  e.params["sup_interior_hessian"] = sup_d2;
  e.params["sup_boundary_hessian"] = sup_d2_bd;
  e.params["coverage"] = static_cast<double>(covered) / boundary_samples;
  out.push_back(e);
  return out;
}

// ---------------------------------------------------------------------------
// barriers

double BarrierBundle::rho(const Vec& xprime) const {
  const int n = domain.n;
  Vec base = x0;
  for (int a = 0; a < n - 1; ++a) base += xprime(a) * frame.col(a);
  const Vec nin = frame.col(n - 1);
  // march inward to bracket the first crossing, then bisect
  const double reach = domain.inradius();
  double lo = 0.0, hi = -1.0;
  double probe = reach / 512.0;
  while (probe <= reach + 1e-15) {
    if (domain.level(base + probe * nin) < 0.0) {
      hi = probe;
      break;
    }
    lo = probe;
    probe *= 2.0;
  }
  if (hi < 0.0) throw ConfigError("barrier strip leaves the domain: |x'| too large");
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (domain.level(base + mid * nin) < 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

Vec BarrierBundle::rho_grad(const Vec& xprime) const {
  const int n = domain.n;
  const double r = rho(xprime);
  Vec y = x0 + r * frame.col(n - 1);
  for (int a = 0; a < n - 1; ++a) y += xprime(a) * frame.col(a);
  const Vec g = domain.level_grad(y);
  const double fn = g.dot(frame.col(n - 1));
  Vec out(n - 1);
  for (int a = 0; a < n - 1; ++a) out(a) = -g.dot(frame.col(a)) / fn;
  return out;
}

Mat BarrierBundle::rho_hess(const Vec& xprime) const {
  const int n = domain.n;
  const double r = rho(xprime);
  Vec y = x0 + r * frame.col(n - 1);
  for (int a = 0; a < n - 1; ++a) y += xprime(a) * frame.col(a);
  const Vec g = domain.level_grad(y);
  const Mat hh = domain.level_hess(y);
  const Vec en = frame.col(n - 1);
  const double fn = g.dot(en);
  const Vec rg = rho_grad(xprime);
  Mat out(n - 1, n - 1);
  for (int a = 0; a < n - 1; ++a) {
    for (int b = a; b < n - 1; ++b) {
      const Vec ea = frame.col(a), eb = frame.col(b);
      const double fab = ea.dot(hh * eb);
      const double fan = ea.dot(hh * en);
      const double fbn = eb.dot(hh * en);
      const double fnn = en.dot(hh * en);
      out(a, b) = out(b, a) = -(fab + fan * rg(b) + fbn * rg(a) + fnn * rg(a) * rg(b)) / fn;
    }
  }
  return out;
}

Vec BarrierBundle::to_global(const Vec& xloc) const {
  Vec y = x0;
  for (int a = 0; a < domain.n; ++a) y += xloc(a) * frame.col(a);
  return y;
}

namespace {

BarrierBundle::Sample make_sample(const BarrierBundle& bb, const Vec& xloc) {
  BarrierBundle::Sample s;
  const int n = bb.domain.n;
  s.xloc = xloc;
  s.xglob = bb.to_global(xloc);
  const Vec xp = xloc.head(n - 1);
  const double xn = xloc(n - 1);
  const double theta = bb.params.theta, K = bb.params.K;
  s.v = bb.rho(xp) - xn - theta * xp.squaredNorm() + K * xn * xn;
  s.dist = std::max(0.0, bb.domain.boundary_distance(s.xglob));
  s.psi = s.v - bb.params.t * s.dist + 0.5 * bb.params.N * s.dist * s.dist;
  // frame Hessian of v: block diag(rho'' - 2 theta I', 2K)
  const Mat rh = bb.rho_hess(xp);
  Mat d2v = Mat::Zero(n, n);
  d2v.topLeftCorner(n - 1, n - 1) = rh - 2.0 * theta * Mat::Identity(n - 1, n - 1);
  d2v(n - 1, n - 1) = 2.0 * K;
  Eigen::SelfAdjointEigenSolver<Mat> es(d2v);
  s.kappa_d2v = es.eigenvalues();
  return s;
}

}  // namespace

BarrierBundle build_barriers(const grid::DomainSpec& domain, const Vec& x0,
                             const BarrierParams& params_in) {
  BarrierBundle bb;
  bb.domain = domain;
  bb.x0 = x0;
  bb.frame = boundary_frame(domain, x0);
  bb.params = params_in;
  if (bb.params.t <= 0.0) bb.params.t = 1.1 * bb.params.N * bb.params.delta / 2.0;
  const int n = domain.n;

  // cone condition (kappa^b - 3 theta, 2K) in Gamma at x0
  {
    const auto bps = grid::boundary_geometry(domain, 8);
    (void)bps;
    // curvatures at x0 from the level function, in the frame at x0
    const Vec g = domain.level_grad(x0);
    const Mat hh = domain.level_hess(x0);
    Mat tang = bb.frame.leftCols(n - 1);
    const Mat shape = tang.transpose() * hh * tang / g.norm();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (shape + shape.transpose()));
    Vec kk(n);
    kk.head(n - 1) = es.eigenvalues().array() - 3.0 * bb.params.theta;
    kk(n - 1) = 2.0 * bb.params.K;
    if (symfun::gamma_margin(kk) <= 0.0) {
      throw ConfigError(
          "barrier parameters violate the cone condition: (kappa_b - 3 theta, 2K) "
          "is not in Gamma at the chosen boundary point");
    }
  }

  const double delta = bb.params.delta;
  const int nprime = 41, nlayer = 11, nedge = 21;

  if (n == 2) {
    for (int k = 0; k < nprime; ++k) {
      const double xp = -delta + 2.0 * delta * k / (nprime - 1);
      const Vec xpv = (Vec(1) << xp).finished();
      const double r = bb.rho(xpv);
      bb.part1.push_back(make_sample(bb, (Vec(2) << xp, r).finished()));
      bb.part2.push_back(make_sample(bb, (Vec(2) << xp, r + delta * delta).finished()));
      for (int l = 1; l + 1 < nlayer; ++l) {
        const double xn = r + delta * delta * l / (nlayer - 1);
        bb.interior.push_back(make_sample(bb, (Vec(2) << xp, xn).finished()));
      }
    }
    for (double sgn : {-1.0, 1.0}) {
      const Vec xpv = (Vec(1) << sgn * delta).finished();
      const double r = bb.rho(xpv);
      for (int l = 0; l < nedge; ++l) {
        const double xn = r + delta * delta * l / (nedge - 1);
        bb.part3.push_back(make_sample(bb, (Vec(2) << sgn * delta, xn).finished()));
      }
    }
  } else {
    const int ng = 9;
    for (int i = 0; i < ng; ++i) {
      for (int j = 0; j < ng; ++j) {
        const double a = -delta + 2.0 * delta * i / (ng - 1);
        const double b = -delta + 2.0 * delta * j / (ng - 1);
        if (a * a + b * b > delta * delta + 1e-15) continue;
        const Vec xpv = (Vec(2) << a, b).finished();
        const double r = bb.rho(xpv);
        bb.part1.push_back(make_sample(bb, (Vec(3) << a, b, r).finished()));
        bb.part2.push_back(make_sample(bb, (Vec(3) << a, b, r + delta * delta).finished()));
        for (int l = 1; l + 1 < 5; ++l) {
          bb.interior.push_back(
              make_sample(bb, (Vec(3) << a, b, r + delta * delta * l / 4.0).finished()));
        }
      }
    }
    const int nring = 16;
    for (int k = 0; k < nring; ++k) {
      const double ang = 2.0 * M_PI * k / nring;
      const Vec xpv = (Vec(2) << delta * std::cos(ang), delta * std::sin(ang)).finished();
      const double r = bb.rho(xpv);
      for (int l = 0; l < 7; ++l) {
        bb.part3.push_back(make_sample(
            bb, (Vec(3) << xpv(0), xpv(1), r + delta * delta * l / 6.0).finished()));
      }
    }
  }
  return bb;
}

std::vector<CheckEntry> check_barrier_inequalities(const BarrierBundle& bb) {
  std::vector<CheckEntry> out;
  const double theta = bb.params.theta, delta = bb.params.delta;

  auto worst = [](const std::vector<BarrierBundle::Sample>& ss, auto&& f) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& s : ss) m = std::max(m, f(s));
    return m;
  };

  out.push_back(make_check(
      "barrier_v_on_bottom",
      worst(bb.part1, [&](const auto& s) {
        return s.v + 0.5 * theta * s.xloc.head(bb.domain.n - 1).squaredNorm();
      }),
      0.0));
  out.push_back(make_check(
      "barrier_v_on_top",
      worst(bb.part2, [&](const auto& s) { return s.v + 0.5 * delta * delta; }), 0.0));
  out.push_back(make_check(
      "barrier_v_on_side",
      worst(bb.part3, [&](const auto& s) { return s.v + 0.5 * theta * delta * delta; }),
      0.0));

  // largest eta0 in (0, 1] with lambda(D^2 v - 2 eta0 I) in Gamma on the strip
  auto margin_at = [&](double eta0) {
    double m = std::numeric_limits<double>::infinity();
    auto visit = [&](const std::vector<BarrierBundle::Sample>& ss) {
      for (const auto& s : ss) {
        m = std::min(m, symfun::gamma_margin(
                            (s.kappa_d2v.array() - 2.0 * eta0).matrix()));
      }
    };
    visit(bb.interior);
    visit(bb.part1);
    visit(bb.part2);
    visit(bb.part3);
    return m;
  };
  double eta0 = 0.0;
  if (margin_at(0.0) > 0.0) {
    double lo = 0.0, hi = 1.0;
    if (margin_at(1.0) > 0.0) {
      eta0 = 1.0;
    } else {
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (margin_at(mid) > 0.0 ? lo : hi) = mid;
      }
      eta0 = lo;
    }
  }
  {
    auto e = make_check("barrier_cone_eta0", 0.0, eta0);
    e.satisfied = eta0 > 0.0;
    e.params["eta0"] = eta0;
    e.params["base_margin"] = margin_at(0.0);
    out.push_back(e);
  }

  // Psi <= 0 and -t d + (N/2) d^2 <= 0 everywhere on the closed strip
  auto all_samples = [&](auto&& f) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto* part : {&bb.interior, &bb.part1, &bb.part2, &bb.part3}) {
      for (const auto& s : *part) m = std::max(m, f(s));
    }
    return m;
  };
  {
    auto e = make_check("barrier_distance_term_nonpositive",
                        all_samples([&](const auto& s) {
                          return -bb.params.t * s.dist + 0.5 * bb.params.N * s.dist * s.dist;
                        }),
                        0.0, 1e-14);
    e.params["two_t_over_N"] = 2.0 * bb.params.t / bb.params.N;
    e.params["delta"] = delta;
    out.push_back(e);
    out.push_back(make_check("barrier_psi_nonpositive",
                             all_samples([](const auto& s) { return s.psi; }), 0.0, 1e-14));
  }
  {
    auto e = make_check("wtilde_bounded",
                        all_samples([&](const auto& s) {
                          return wtilde(bb.params.b, -s.v);
                        }),
                        1.0);
    out.push_back(e);
  }
  return out;
}

std::vector<CheckEntry> boundary_normal_quantities(const grid::GridField& u,
                                                   const grid::DomainSpec& domain,
                                                   int samples) {
  const int n = domain.n;
  double m_min = std::numeric_limits<double>::infinity();
  double s1n_min = std::numeric_limits<double>::infinity();
  double max_disagree = 0.0;
  int covered = 0;
  const auto bps = grid::boundary_geometry(domain, samples);
  for (const auto& bp : bps) {
    const auto j = fit_jet_at(u, bp.x);
    if (!j.ok) continue;
    ++covered;
    const Mat frame = boundary_frame(domain, bp.x);
    // frame components (tangents first, inner normal last)
    const Vec pf = frame.transpose() * j.grad;
    const Mat hf = frame.transpose() * j.hess * frame;
    // direct tangential-trace formula for the integrand of m
    const Vec pp = pf.head(n - 1);
    const double denom = 1.0 - pp.squaredNorm();
    double mval = 0.0;
    for (int a = 0; a < n - 1; ++a) {
      for (int b = 0; b < n - 1; ++b) {
        mval += ((a == b ? 1.0 : 0.0) + pp(a) * pp(b) / denom) * hf(a, b);
      }
    }
    // the same quantity through the restricted S_k machinery
    const double s1n = symfun::sk_restricted(hf, pf, 1, n - 1);
    m_min = std::min(m_min, mval);
    s1n_min = std::min(s1n_min, s1n);
    max_disagree = std::max(max_disagree, std::abs(mval - s1n));
  }

  std::vector<CheckEntry> out;
  {
    auto e = make_check("boundary_m_positive", 0.0, m_min);
    e.satisfied = m_min > 0.0;
    e.params["coverage"] = static_cast<double>(covered) / bps.size();
    out.push_back(e);
    auto e2 = make_check("boundary_S1n_positive", 0.0, s1n_min);
    e2.satisfied = s1n_min > 0.0;
    out.push_back(e2);
    out.push_back(make_check("boundary_m_S1n_agreement", max_disagree,
                             1e-10 * (1.0 + std::abs(m_min)), 0.0));
  }
  return out;
}

double wtilde(double b, double w) { return 1.0 - std::exp(-b * w); }

}  // namespace etacurv::estimates
