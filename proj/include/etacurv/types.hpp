#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace etacurv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Graph gradient violates |Du| < 1, so the induced metric is not Riemannian.
class NotSpacelikeError : public std::runtime_error {
 public:
  explicit NotSpacelikeError(double grad_norm)
      : std::runtime_error("graph is not spacelike: |Du| = " + std::to_string(grad_norm)),
        grad_norm_(grad_norm) {}
  double grad_norm() const { return grad_norm_; }

 private:
  double grad_norm_;
};

/// Principal curvatures left the cone on which the operator is elliptic.
class NotAdmissibleError : public std::runtime_error {
 public:
  explicit NotAdmissibleError(double margin)
      : std::runtime_error("point is not admissible: cone margin = " + std::to_string(margin)),
        margin_(margin) {}
  double margin() const { return margin_; }

 private:
  double margin_;
};

/// Bad run configuration or a violated problem hypothesis.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace etacurv
