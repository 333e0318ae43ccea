#pragma once

#include <random>
#include <vector>

#include "etacurv/types.hpp"

// Symmetric-function algebra for principal-curvature vectors: elementary
// symmetric functions, the lambda transform lambda_i = sum_{j != i} kappa_j,
// the cone Gamma = {min_i lambda_i > 0}, the curvature function
// f(kappa) = prod_i lambda_i, and S_k(r, p) for matrix/gradient pairs.
namespace etacurv::symfun {

/// All elementary symmetric functions e_0..e_n of the entries of `kappa`,
/// computed by the O(n^2) one-variable-at-a-time recurrence.
Vec elementary_symmetric_all(const Vec& kappa);

/// sigma_k(kappa). k = 0 returns 1. Throws std::domain_error for k outside [0, n].
double elementary_symmetric(const Vec& kappa, int k);

/// sigma_k of kappa with the given entries set to zero. Indices are 0-based,
/// must be distinct and in range.
double sigma_restricted(const Vec& kappa, int k, const std::vector<int>& excluded);

/// lambda_i = sigma_1(kappa) - kappa_i.
Vec lambda_transform(const Vec& kappa);

/// min_i lambda_i; positive exactly on the open cone Gamma.
double gamma_margin(const Vec& kappa);
bool in_gamma(const Vec& kappa);

/// f(kappa) = prod_i lambda_i.
double f_eta(const Vec& kappa);

/// df/dkappa_i = sum_{m != i} prod_{l != m} lambda_l. Euler identity:
/// sum_i f_i kappa_i = n f.
Vec grad_f_eta(const Vec& kappa);

/// Sign-corrected sigma_1-expansion sum_{i=2}^n (-1)^i sigma_1^{n-i} sigma_i,
/// equal to f_eta via prod_i (sigma_1 - kappa_i) = charpoly(kappa)(sigma_1).
double k_eta_expansion(const Vec& kappa);

/// The conformal square root gamma(p) = I + p p^T / (w (1 + w)) with
/// w = sqrt(1 - |p|^2); gamma(p)^2 = (I - p p^T)^{-1}.
/// Throws std::domain_error when |p| >= 1.
Mat conformal_sqrt(const Vec& p);

/// S_k(r, p) = sigma_k of the eigenvalues of (I + p (x) p / (1 - |p|^2)) r,
/// evaluated through the similar symmetric matrix gamma(p) r gamma(p).
double sk_of_matrix(const Mat& r, const Vec& p, int k);

/// S_{k;i}(r, p): row/column i of r and entry i of p zeroed first (0-based i).
double sk_restricted(const Mat& r, const Vec& p, int k, int i);

/// Smallest R >= 0 with f(kappa + R e_n) >= A, by bisection to 1e-8.
/// Requires kappa in Gamma (f is then strictly increasing in R) and A > 0.
double growth_witness(const Vec& kappa, double A);

/// Random point of Gamma: lambda ~ U(0.1, 10)^n, inverted through the (linear,
/// invertible for n >= 2) lambda transform.
Vec random_gamma_point(int n, std::mt19937_64& rng);

}  // namespace etacurv::symfun
