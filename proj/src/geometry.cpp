#include "etacurv/geometry.hpp"

#include <cmath>
#include <limits>

#include "etacurv/symfun.hpp"

namespace etacurv::geom {

GraphJet make_jet(const Vec& du, const Mat& d2u) {
  const double s = du.norm();
  if (s >= 1.0 - 1e-10) throw NotSpacelikeError(s);
  const int n = static_cast<int>(du.size());

  GraphJet jet;
  jet.du = du;
  jet.d2u = 0.5 * (d2u + d2u.transpose().eval());
  jet.w = std::sqrt(1.0 - s * s);
  jet.gamma_up = Mat::Identity(n, n) + du * du.transpose() / (jet.w * (1.0 + jet.w));
  jet.gamma_down = Mat::Identity(n, n) - du * du.transpose() / (1.0 + jet.w);
  Mat a = (jet.gamma_up * jet.d2u * jet.gamma_up) / jet.w;
  jet.a = 0.5 * (a + a.transpose().eval());

  Eigen::SelfAdjointEigenSolver<Mat> es(jet.a);
  jet.kappa = es.eigenvalues();
  jet.frame = es.eigenvectors();
  // deterministic eigenvector signs: first entry of largest magnitude positive
  for (int c = 0; c < n; ++c) {
    int imax = 0;
    jet.frame.col(c).cwiseAbs().maxCoeff(&imax);
    if (jet.frame(imax, c) < 0.0) jet.frame.col(c) *= -1.0;
  }
  return jet;
}

Vec unit_normal(const GraphJet& jet) {
  Vec nu(jet.dim() + 1);
  nu.head(jet.dim()) = jet.du / jet.w;
  nu(jet.dim()) = 1.0 / jet.w;
  return nu;
}

double minkowski_dot(const Vec& a, const Vec& b) {
  const int m = static_cast<int>(a.size());
  return a.head(m - 1).dot(b.head(m - 1)) - a(m - 1) * b(m - 1);
}

double k_eta(const GraphJet& jet) { return symfun::f_eta(jet.kappa); }

double mean_curvature(const GraphJet& jet) { return jet.kappa.sum(); }

double gauss_curvature(const GraphJet& jet) { return jet.kappa.prod(); }

double curvature_value(Curvature eq, const Vec& kappa) {
  switch (eq) {
    case Curvature::KEta: return symfun::f_eta(kappa);
    case Curvature::Mean: return kappa.sum();
    case Curvature::LorentzGauss: return kappa.prod();
  }
  return 0.0;
}

namespace {

Vec products_excluding_one(const Vec& v) {
  const int n = static_cast<int>(v.size());
  Vec pre = Vec::Ones(n + 1), suf = Vec::Ones(n + 1);
  for (int i = 0; i < n; ++i) pre(i + 1) = pre(i) * v(i);
  for (int i = n - 1; i >= 0; --i) suf(i) = suf(i + 1) * v(i);
  Vec p(n);
  for (int m = 0; m < n; ++m) p(m) = pre(m) * suf(m + 1);
  return p;
}

}  // namespace

Vec curvature_grad(Curvature eq, const Vec& kappa) {
  switch (eq) {
    case Curvature::KEta: return symfun::grad_f_eta(kappa);
    case Curvature::Mean: return Vec::Ones(kappa.size());
    case Curvature::LorentzGauss: return products_excluding_one(kappa);
  }
  return Vec();
}

double admissibility_margin(Curvature eq, const Vec& kappa) {
  switch (eq) {
    case Curvature::KEta: return symfun::gamma_margin(kappa);
    case Curvature::Mean: return kappa.sum();
    case Curvature::LorentzGauss: return kappa.minCoeff();
  }
  return 0.0;
}

bool needs_cone_guard(Curvature eq) { return eq != Curvature::Mean; }

LinearizedCoeffs linearize(const GraphJet& jet, Curvature eq) {
  if (needs_cone_guard(eq)) {
    const double margin = admissibility_margin(eq, jet.kappa);
    if (margin <= 0.0) throw NotAdmissibleError(margin);
  }
  const double w = jet.w;
  const Vec fg = curvature_grad(eq, jet.kappa);

  LinearizedCoeffs lc;
  // spectral gradient of the symmetric function f at A
  lc.Fij = jet.frame * fg.asDiagonal() * jet.frame.transpose();
  lc.Fij = (0.5 * (lc.Fij + lc.Fij.transpose().eval())).eval();
  lc.Gij = (jet.gamma_up * lc.Fij * jet.gamma_up) / w;
  lc.Gij = (0.5 * (lc.Gij + lc.Gij.transpose().eval())).eval();

  const double tr_fk = fg.dot(jet.kappa);
  const Vec fap = lc.Fij * (jet.a * jet.du);
  const Vec afp = jet.a * (lc.Fij * jet.du);
  lc.Gs = (tr_fk / (w * w)) * jet.du +
          (2.0 / (w * (1.0 + w))) * (jet.gamma_up * (w * fap + afp));
  return lc;
}

}  // namespace etacurv::geom
