#include "wgflow/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wgflow/errors.hpp"

namespace wgflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// softmax weights of s v·x over the vertices, and the log-sum-exp value
double soft_support(const Polytope& body, double sharp, const Eigen::VectorXd& x, Eigen::VectorXd* weights) {
  Eigen::VectorXd z = sharp * (body.vertices() * x);
  double mx = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - mx).exp();
  double sum = e.sum();
  if (weights) *weights = e / sum;
  return (mx + std::log(sum)) / sharp;
}

void require_body(const std::shared_ptr<const Polytope>& body) {
  if (!body) throw InvalidArgument("support potential needs a polytope");
}

}  // namespace

ConfiningPotential::ConfiningPotential(PotentialKind kind) : kind_(std::move(kind)) {
  std::visit(overloaded{
                 [](const ZeroPotential&) {},
                 [](const QuadraticPotential& q) {
                   if (!std::isfinite(q.curvature) || !std::isfinite(q.center))
                     throw InvalidArgument("quadratic potential parameters must be finite");
                 },
                 [](const SupportPotential& s) { require_body(s.body); },
                 [](const SmoothSupportPotential& s) {
                   require_body(s.body);
                   if (!(s.sharpness > 0.0)) throw InvalidArgument("smoothing sharpness must be positive");
                 },
             },
             kind_);
}

double ConfiningPotential::value(const Eigen::VectorXd& x) const {
  return std::visit(overloaded{
                        [](const ZeroPotential&) { return 0.0; },
                        [&](const QuadraticPotential& q) {
                          return 0.5 * q.curvature * (x.array() - q.center).square().sum();
                        },
                        [&](const SupportPotential& s) { return support_value(*s.body, x); },
                        [&](const SmoothSupportPotential& s) { return soft_support(*s.body, s.sharpness, x, nullptr); },
                    },
                    kind_);
}

Eigen::VectorXd ConfiningPotential::gradient(const Eigen::VectorXd& x) const {
  return std::visit(overloaded{
                        [&](const ZeroPotential&) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(x.size()); },
                        [&](const QuadraticPotential& q) -> Eigen::VectorXd {
                          return q.curvature * (x.array() - q.center).matrix();
                        },
                        [&](const SupportPotential& s) -> Eigen::VectorXd {
                          Eigen::Index arg;
                          (s.body->vertices() * x).maxCoeff(&arg);
                          return s.body->vertices().row(arg).transpose();
                        },
                        [&](const SmoothSupportPotential& s) -> Eigen::VectorXd {
                          Eigen::VectorXd w;
                          soft_support(*s.body, s.sharpness, x, &w);
                          return s.body->vertices().transpose() * w;
                        },
                    },
                    kind_);
}

double ConfiningPotential::value(double x) const { return value(Eigen::VectorXd::Constant(1, x)); }

double ConfiningPotential::d1(double x) const { return gradient(Eigen::VectorXd::Constant(1, x))(0); }

double ConfiningPotential::d2(double x) const {
  return std::visit(overloaded{
                        [](const ZeroPotential&) { return 0.0; },
                        [](const QuadraticPotential& q) { return q.curvature; },
                        [](const SupportPotential&) { return 0.0; },
                        [&](const SmoothSupportPotential& s) {
                          Eigen::VectorXd w;
                          soft_support(*s.body, s.sharpness, Eigen::VectorXd::Constant(1, x), &w);
                          Eigen::VectorXd v = s.body->vertices().col(0);
                          double m1 = w.dot(v), m2 = w.dot(v.cwiseProduct(v));
                          return s.sharpness * std::max(0.0, m2 - m1 * m1);
                        },
                    },
                    kind_);
}

double ConfiningPotential::convexity() const {
  if (auto* q = std::get_if<QuadraticPotential>(&kind_)) return q->curvature;
  return 0.0;
}

double ConfiningPotential::lipschitz() const {
  return std::visit(overloaded{
                        [](const ZeroPotential&) { return 0.0; },
                        [](const QuadraticPotential& q) { return q.curvature == 0.0 ? 0.0 : kInf; },
                        [](const SupportPotential& s) { return s.body->max_norm(); },
                        [](const SmoothSupportPotential& s) { return s.body->max_norm(); },
                    },
                    kind_);
}

PairPotential::PairPotential(PairKernel w, ConfiningPotential v) : w_(std::move(w)), v_(std::move(v)) {
  // admissibility: lsc, lambda-convex on (0, inf), w bounded below near 0 and
  // w(s)/s^2 bounded below at infinity
  std::visit(overloaded{
                 [&](const PowerLaw& p) {
                   const double a = p.alpha, c = p.coefficient;
                   if (!std::isfinite(a) || !std::isfinite(c) || a == 0.0 || c == 0.0)
                     throw InvalidArgument("power-law kernel needs finite nonzero alpha and coefficient");
                   if (a < 0.0 && c < 0.0) throw InvalidArgument("power-law kernel unbounded below at 0");
                   if (a > 2.0 && c < 0.0) throw InvalidArgument("power-law kernel decays faster than -s^2");
                   const double curv = c * a * (a - 1.0);
                   if (a != 2.0 && a != 1.0 && curv < 0.0)
                     throw InvalidArgument("power-law kernel is not lambda-convex on (0, inf)");
                   singularity_ = a < 0.0 ? SingularityClass::Strong
                                          : (a < 2.0 ? SingularityClass::Weak : SingularityClass::Smooth);
                   lambda_ = a == 2.0 ? 2.0 * c : 0.0;
                 },
                 [&](const LogKernel& l) {
                   if (!(l.coefficient > 0.0)) throw InvalidArgument("log kernel needs a positive coefficient");
                   singularity_ = SingularityClass::Strong;
                   lambda_ = 0.0;
                 },
                 [&](const Morse& m) {
                   if (!(m.c_r > 0.0 && m.c_a > 0.0 && m.l_r > 0.0 && m.l_a > 0.0))
                     throw InvalidArgument("Morse kernel parameters must be positive");
                   const double a = m.c_r / (m.l_r * m.l_r), b = m.c_a / (m.l_a * m.l_a);
                   auto curv = [&](double s) { return a * std::exp(-s / m.l_r) - b * std::exp(-s / m.l_a); };
                   lambda_ = std::min(0.0, curv(0.0));
                   if (m.l_r != m.l_a) {
                     double s = std::log((a * m.l_a) / (b * m.l_r)) / (1.0 / m.l_r - 1.0 / m.l_a);
                     if (std::isfinite(s) && s > 0.0) lambda_ = std::min(lambda_, curv(s));
                   }
                   singularity_ = SingularityClass::Weak;
                 },
                 [&](const QuadraticKernel& q) {
                   if (!std::isfinite(q.coefficient)) throw InvalidArgument("quadratic kernel needs a finite coefficient");
                   singularity_ = SingularityClass::Smooth;
                   lambda_ = 2.0 * q.coefficient;
                 },
                 [&](const AbsKernel& k) {
                   if (k.sign != 1 && k.sign != -1) throw InvalidArgument("abs kernel sign must be +1 or -1");
                   singularity_ = SingularityClass::Weak;
                   lambda_ = 0.0;
                 },
             },
             w_);
}

double PairPotential::w(double s) const {
  const double r = std::abs(s);
  return std::visit(overloaded{
                        [&](const PowerLaw& p) {
                          if (r == 0.0) return p.alpha < 0.0 ? kInf : 0.0;
                          return p.coefficient * std::pow(r, p.alpha);
                        },
                        [&](const LogKernel& l) { return r == 0.0 ? kInf : -l.coefficient * std::log(r); },
                        [&](const Morse& m) { return m.c_r * std::exp(-r / m.l_r) - m.c_a * std::exp(-r / m.l_a); },
                        [&](const QuadraticKernel& q) { return q.coefficient * r * r; },
                        [&](const AbsKernel& k) { return k.sign * r; },
                    },
                    w_);
}

double PairPotential::dw_plus(double r) const {
  return std::visit(overloaded{
                        [&](const PowerLaw& p) {
                          if (r == 0.0)
                            return p.alpha < 1.0 ? std::copysign(kInf, p.coefficient * p.alpha)
                                                 : (p.alpha == 1.0 ? p.coefficient : 0.0);
                          return p.coefficient * p.alpha * std::pow(r, p.alpha - 1.0);
                        },
                        [&](const LogKernel& l) { return r == 0.0 ? -kInf : -l.coefficient / r; },
                        [&](const Morse& m) {
                          return -m.c_r / m.l_r * std::exp(-r / m.l_r) + m.c_a / m.l_a * std::exp(-r / m.l_a);
                        },
                        [&](const QuadraticKernel& q) { return 2.0 * q.coefficient * r; },
                        [&](const AbsKernel& k) { return static_cast<double>(k.sign); },
                    },
                    w_);
}

double PairPotential::dw(double s) const {
  const double d = dw_plus(std::abs(s));
  return s < 0.0 ? -d : d;
}

double PairPotential::d2w(double s) const {
  const double r = std::abs(s);
  return std::visit(overloaded{
                        [&](const PowerLaw& p) {
                          if (r == 0.0) return p.alpha == 2.0 ? 2.0 * p.coefficient : (p.alpha == 1.0 ? 0.0 : kInf);
                          return p.coefficient * p.alpha * (p.alpha - 1.0) * std::pow(r, p.alpha - 2.0);
                        },
                        [&](const LogKernel& l) { return r == 0.0 ? kInf : l.coefficient / (r * r); },
                        [&](const Morse& m) {
                          return m.c_r / (m.l_r * m.l_r) * std::exp(-r / m.l_r) -
                                 m.c_a / (m.l_a * m.l_a) * std::exp(-r / m.l_a);
                        },
                        [&](const QuadraticKernel& q) { return 2.0 * q.coefficient; },
                        [&](const AbsKernel&) { return 0.0; },
                    },
                    w_);
}

std::string PairPotential::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const PowerLaw& p) { os << "power(alpha=" << p.alpha << ", c=" << p.coefficient << ")"; },
                 [&](const LogKernel& l) { os << "log(c=" << l.coefficient << ")"; },
                 [&](const Morse& m) {
                   os << "morse(C_R=" << m.c_r << ", C_A=" << m.c_a << ", l_R=" << m.l_r << ", l_A=" << m.l_a << ")";
                 },
                 [&](const QuadraticKernel& q) { os << "quadratic(c=" << q.coefficient << ")"; },
                 [&](const AbsKernel& k) { os << (k.sign > 0 ? "+|s|" : "-|s|"); },
             },
             w_);
  return os.str();
}

}  // namespace wgflow
