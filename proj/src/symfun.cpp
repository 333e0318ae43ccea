#include "etacurv/symfun.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace etacurv::symfun {

Vec elementary_symmetric_all(const Vec& kappa) {
  const int n = static_cast<int>(kappa.size());
  Vec e = Vec::Zero(n + 1);
  e(0) = 1.0;
  for (int i = 0; i < n; ++i) {
    // descend so e(j-1) still refers to the previous variable set
    for (int j = std::min(i + 1, n); j >= 1; --j) {
      e(j) += kappa(i) * e(j - 1);
    }
  }
  return e;
}

double elementary_symmetric(const Vec& kappa, int k) {
  const int n = static_cast<int>(kappa.size());
  if (k < 0 || k > n) {
    throw std::domain_error("sigma_k: k = " + std::to_string(k) + " out of [0, " +
                            std::to_string(n) + "]");
  }
  if (k == 0) return 1.0;
  return elementary_symmetric_all(kappa)(k);
}

double sigma_restricted(const Vec& kappa, int k, const std::vector<int>& excluded) {
  const int n = static_cast<int>(kappa.size());
  std::set<int> seen;
  for (int i : excluded) {
    if (i < 0 || i >= n) throw std::domain_error("sigma_restricted: index out of range");
    if (!seen.insert(i).second) throw std::domain_error("sigma_restricted: duplicate index");
  }
  Vec masked = kappa;
  for (int i : excluded) masked(i) = 0.0;
  if (k < 0 || k > n) throw std::domain_error("sigma_restricted: k out of range");
  if (k == 0) return 1.0;
  return elementary_symmetric_all(masked)(k);
}

Vec lambda_transform(const Vec& kappa) {
  return Vec::Constant(kappa.size(), kappa.sum()) - kappa;
}

double gamma_margin(const Vec& kappa) { return lambda_transform(kappa).minCoeff(); }

bool in_gamma(const Vec& kappa) { return gamma_margin(kappa) > 0.0; }

double f_eta(const Vec& kappa) { return lambda_transform(kappa).prod(); }

namespace {

// P(m) = prod_{l != m} v_l via prefix/suffix products; stable with zeros.
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

Vec grad_f_eta(const Vec& kappa) {
  const Vec lam = lambda_transform(kappa);
  const Vec p = products_excluding_one(lam);  // dfeta/dlambda_m
  // dlambda_m/dkappa_i = 1 for m != i, 0 for m = i
  return Vec::Constant(kappa.size(), p.sum()) - p;
}

double k_eta_expansion(const Vec& kappa) {
  const int n = static_cast<int>(kappa.size());
  const Vec e = elementary_symmetric_all(kappa);
  const double s1 = e(1);
  double acc = 0.0;
  for (int i = 2; i <= n; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    acc += sign * std::pow(s1, n - i) * e(i);
  }
  return acc;
}

Mat conformal_sqrt(const Vec& p) {
  const double s2 = p.squaredNorm();
  if (s2 >= 1.0) throw std::domain_error("conformal_sqrt: |p| >= 1");
  const double w = std::sqrt(1.0 - s2);
  const int n = static_cast<int>(p.size());
  return Mat::Identity(n, n) + p * p.transpose() / (w * (1.0 + w));
}

double sk_of_matrix(const Mat& r, const Vec& p, int k) {
  const Mat g = conformal_sqrt(p);
  Mat m = g * r * g;
  m = 0.5 * (m + m.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  return elementary_symmetric(es.eigenvalues(), k);
}

double sk_restricted(const Mat& r, const Vec& p, int k, int i) {
  const int n = static_cast<int>(p.size());
  if (i < 0 || i >= n) throw std::domain_error("sk_restricted: index out of range");
  Mat ri = r;
  ri.row(i).setZero();
  ri.col(i).setZero();
  Vec pi = p;
  pi(i) = 0.0;
  return sk_of_matrix(ri, pi, k);
}

double growth_witness(const Vec& kappa, double A) {
  if (!in_gamma(kappa)) throw NotAdmissibleError(gamma_margin(kappa));
  if (A <= 0.0) throw std::domain_error("growth_witness: A must be positive");
  const int n = static_cast<int>(kappa.size());
  auto f_shift = [&](double R) {
    Vec k2 = kappa;
    k2(n - 1) += R;
    return f_eta(k2);
  };
  if (f_shift(0.0) >= A) return 0.0;
  // f(R) = lambda_n prod_{i<n}(lambda_i + R) is strictly increasing on Gamma
  double hi = 1.0;
  while (f_shift(hi) < A) hi *= 2.0;
  double lo = 0.0;
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    (f_shift(mid) >= A ? hi : lo) = mid;
  }
  return hi;
}

Vec random_gamma_point(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.1, 10.0);
  Vec lam(n);
  for (int i = 0; i < n; ++i) lam(i) = dist(rng);
  return Vec::Constant(n, lam.sum() / (n - 1)) - lam;
}

}  // namespace etacurv::symfun
