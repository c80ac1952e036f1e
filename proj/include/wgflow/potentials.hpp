#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <variant>

#include "wgflow/geometry.hpp"

namespace wgflow {

enum class SingularityClass { Strong, Weak, Smooth };

// Pair kernels w(s), s > 0, extended evenly to s < 0.
struct PowerLaw {
  double alpha = 2.0;  // w = c s^alpha for alpha != 0
  double coefficient = 1.0;
};
struct LogKernel {
  double coefficient = 1.0;  // w = -c log s
};
struct Morse {
  double c_r = 1.0, c_a = 1.0, l_r = 1.0, l_a = 2.0;  // w = C_R e^{-s/l_R} - C_A e^{-s/l_A}
};
struct QuadraticKernel {
  double coefficient = 1.0;  // w = c s^2
};
struct AbsKernel {
  int sign = 1;  // w = sign |s|
};
using PairKernel = std::variant<PowerLaw, LogKernel, Morse, QuadraticKernel, AbsKernel>;

// Confining potentials V on R^n.
struct ZeroPotential {};
struct QuadraticPotential {
  double curvature = 1.0;  // V = curvature |x - center|^2 / 2
  double center = 0.0;
};
struct SupportPotential {
  std::shared_ptr<const Polytope> body;  // V = phi_P
};
struct SmoothSupportPotential {
  std::shared_ptr<const Polytope> body;  // V = (1/s) log sum_v e^{s v·x}, within log(#v)/s of phi_P
  double sharpness = 1.0;
};
using PotentialKind = std::variant<ZeroPotential, QuadraticPotential, SupportPotential, SmoothSupportPotential>;

class ConfiningPotential {
 public:
  ConfiningPotential() = default;
  ConfiningPotential(PotentialKind kind);  // NOLINT: implicit on purpose

  const PotentialKind& kind() const { return kind_; }
  bool is_zero() const { return std::holds_alternative<ZeroPotential>(kind_); }

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;  // 0 at kinks of the nonsmooth support function
  double convexity() const;   // lower bound on the Hessian
  // Lipschitz bound, infinity if none
  double lipschitz() const;

 private:
  PotentialKind kind_ = ZeroPotential{};
};

class PairPotential {
 public:
  PairPotential(PairKernel w, ConfiningPotential v = {});

  const PairKernel& kernel() const { return w_; }
  const ConfiningPotential& confinement() const { return v_; }
  SingularityClass singularity() const { return singularity_; }
  // lower bound on w'' over (0, inf)
  double lambda() const { return lambda_; }

  // even extension; w(0) is the limit from the right (+inf for strong kernels)
  double w(double s) const;
  // derivatives of the even extension; at s = 0 they return the right limits
  double dw(double s) const;
  double d2w(double s) const;
  // right-sided derivative of w on [0, inf)
  double dw_plus(double s) const;

  std::string describe() const;

 private:
  PairKernel w_;
  ConfiningPotential v_;
  SingularityClass singularity_ = SingularityClass::Smooth;
  double lambda_ = 0.0;
};

}  // namespace wgflow
