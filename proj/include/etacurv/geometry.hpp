#pragma once

#include "etacurv/types.hpp"

// Pointwise geometry of spacelike graphs in Minkowski space R^{n,1}: the
// induced metric g = I - Du (x) Du, the curvature matrix
// A[u] = (1/w) gamma D^2u gamma with w = sqrt(1 - |Du|^2), principal
// curvatures, the curvature functions (K_eta, mean, Lorentz-Gauss), and the
// coefficients of the linearized operator.
namespace etacurv::geom {

/// Second-order jet of a spacelike graph at a point, with everything derived
/// from (Du, D^2u) cached: w, the conformal matrices, the symmetric curvature
/// matrix A and its spectral decomposition (kappa ascending).
struct GraphJet {
  Vec du;
  Mat d2u;
  double w = 1.0;
  Mat gamma_up;    // gamma^{ik} = delta + u_i u_k / (w (1+w))
  Mat gamma_down;  // inverse; gamma_down^2 = g
  Mat a;           // curvature matrix
  Vec kappa;       // eigenvalues of a, ascending
  Mat frame;       // orthonormal eigenvectors, columns matching kappa

  int dim() const { return static_cast<int>(du.size()); }
};

/// Builds the jet. Throws NotSpacelikeError when |Du| >= 1 - 1e-10.
GraphJet make_jet(const Vec& du, const Mat& d2u);

/// Upward timelike unit normal nu = (Du, 1)/w, length n+1.
Vec unit_normal(const GraphJet& jet);

/// Minkowski inner product on R^{n,1} (last coordinate timelike).
double minkowski_dot(const Vec& a, const Vec& b);

double k_eta(const GraphJet& jet);           // prod_i lambda_i(kappa)
double mean_curvature(const GraphJet& jet);  // sigma_1(kappa)
double gauss_curvature(const GraphJet& jet); // sigma_n(kappa) = det D^2u / w^{n+2}

/// The three curvature equations share one spectral framework.
enum class Curvature { KEta, Mean, LorentzGauss };

double curvature_value(Curvature eq, const Vec& kappa);
Vec curvature_grad(Curvature eq, const Vec& kappa);

/// Margin to the admissible cone of the equation: gamma_margin for KEta,
/// min_i kappa_i for LorentzGauss, sigma_1 for Mean (which is elliptic on all
/// spacelike jets; the margin is only diagnostic there).
double admissibility_margin(Curvature eq, const Vec& kappa);

/// Whether the Newton line search must reject iterates leaving the cone.
bool needs_cone_guard(Curvature eq);

/// Coefficients of the linearized operator at a jet:
///   F^{ij} = d f(lambda(A))/d a_ij                 (spectral gradient)
///   G^{ij} = (1/w) sum_{s,t} F^{st} gamma^{is} gamma^{tj}
///   G^s    = (u_s/w^2) sum_i f_i kappa_i
///            + 2/(w(1+w)) sum_{t,j} F^{ij} a_it (w u_t gamma^{sj} + u_j gamma^{ts})
struct LinearizedCoeffs {
  Mat Fij;
  Mat Gij;
  Vec Gs;
};

/// Throws NotAdmissibleError when the jet is outside the equation's cone.
LinearizedCoeffs linearize(const GraphJet& jet, Curvature eq);

}  // namespace etacurv::geom
