#include "wgflow/permanent.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "wgflow/errors.hpp"

namespace wgflow {
namespace {

double log_sum_exp(const double* v, int n, int stride = 1) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) mx = std::max(mx, v[i * stride]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i * stride] - mx);
  return mx + std::log(s);
}

void check_square(const Eigen::MatrixXd& a, int cap) {
  if (a.rows() != a.cols() || a.rows() == 0) throw InvalidArgument("permanent needs a nonempty square matrix");
  if (a.rows() > cap) throw CapExceeded("matrix exceeds the exact permanent cap");
}

// Ryser with Gray code. The caller keeps entries O(1) (doubly stochastic).
long double ryser(const std::vector<long double>& s, int n) {
  std::vector<long double> rowsum(n, 0.0L);
  long double total = 0.0L;
  const std::uint64_t count = std::uint64_t{1} << n;
  std::uint64_t gray = 0;
  for (std::uint64_t k = 1; k < count; ++k) {
    int j = std::countr_zero(k);
    gray ^= std::uint64_t{1} << j;
    const bool added = (gray >> j) & 1u;
    long double prod = 1.0L;
    for (int r = 0; r < n; ++r) {
      rowsum[r] += added ? s[r * n + j] : -s[r * n + j];
      prod *= rowsum[r];
    }
    total += (std::popcount(gray) & 1) ? -prod : prod;
  }
  return (n & 1) ? -total : total;
}

// small matrices: direct log-sum-exp over permutations
double log_permanent_small(const Eigen::MatrixXd& log_a) {
  const int n = static_cast<int>(log_a.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> terms;
  do {
    double t = 0.0;
    for (int i = 0; i < n; ++i) t += log_a(i, perm[i]);
    terms.push_back(t);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return log_sum_exp(terms.data(), static_cast<int>(terms.size()));
}

// marginals by enumeration in the log domain; exact and stable for any entry
// range, used for small N and when the prescaled Ryser sum cancels
constexpr int kEnumerationCap = 8;

PermanentMarginals marginals_by_enumeration(const Eigen::MatrixXd& log_a) {
  const int n = static_cast<int>(log_a.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> terms;
  std::vector<std::vector<int>> perms;
  do {
    double t = 0.0;
    for (int i = 0; i < n; ++i) t += log_a(i, perm[i]);
    terms.push_back(t);
    perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  PermanentMarginals out;
  out.log_permanent = log_sum_exp(terms.data(), static_cast<int>(terms.size()));
  out.pi = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double w = std::exp(terms[k] - out.log_permanent);
    for (int i = 0; i < n; ++i) out.pi(i, perms[k][i]) += w;
  }
  return out;
}

struct Prescaled {
  std::vector<long double> s;  // row-major
  double log_scale = 0.0;
};

Prescaled prescale(const Eigen::MatrixXd& log_a) {
  SinkhornOptions opts;
  opts.max_iters = 500;
  opts.tol = 1e-6;
  SinkhornResult sk = sinkhorn_scale(log_a, opts);
  const int n = static_cast<int>(log_a.rows());
  Prescaled out;
  out.s.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.s[i * n + j] = std::exp(static_cast<long double>(log_a(i, j)) - sk.u(i) - sk.v(j));
  out.log_scale = sk.u.sum() + sk.v.sum();
  return out;
}

void check_finite(const Eigen::MatrixXd& log_a) {
  for (Eigen::Index i = 0; i < log_a.size(); ++i)
    if (!std::isfinite(log_a.data()[i])) throw InvalidArgument("permanent entries must be positive and finite");
}

}  // namespace

double log_permanent_exact(const Eigen::MatrixXd& log_a, int cap) {
  check_square(log_a, cap);
  check_finite(log_a);
  const int n = static_cast<int>(log_a.rows());
  if (n <= 3) return log_permanent_small(log_a);
  Prescaled p = prescale(log_a);
  long double per = ryser(p.s, n);
  if (!(per > 0.0L) && n <= kEnumerationCap) return log_permanent_small(log_a);
  if (!(per > 0.0L)) throw ConvergenceFailure("permanent lost all precision");
  return p.log_scale + static_cast<double>(std::log(per));
}

double log_permanent_of(const Eigen::MatrixXd& a, int cap) {
  check_square(a, cap);
  if ((a.array() <= 0.0).any()) throw InvalidArgument("permanent entries must be positive");
  return log_permanent_exact(a.array().log().matrix(), cap);
}

PermanentMarginals permanent_marginals_exact(const Eigen::MatrixXd& log_a, int cap) {
  check_square(log_a, cap);
  check_finite(log_a);
  const int n = static_cast<int>(log_a.rows());
  PermanentMarginals out;
  out.pi = Eigen::MatrixXd::Ones(n, n);
  if (n == 1) {
    out.log_permanent = log_a(0, 0);
    return out;
  }
  if (n <= 3) return marginals_by_enumeration(log_a);
  Prescaled p = prescale(log_a);
  const long double per = ryser(p.s, n);
  if (!(per > 0.0L) && n <= kEnumerationCap) return marginals_by_enumeration(log_a);
  if (!(per > 0.0L)) throw ConvergenceFailure("permanent lost all precision");
  out.log_permanent = p.log_scale + static_cast<double>(std::log(per));
  // Ryser on the matrix with row i replaced by e_j gives Per(a without row i,
  // column j); one Gray-code sweep collects all of them at once
  std::vector<long double> rowsum(n, 0.0L), prefix(n + 1), suffix(n + 1), coef(static_cast<std::size_t>(n) * n, 0.0L);
  std::uint64_t gray = 0;
  for (std::uint64_t k = 1; k < (std::uint64_t{1} << n); ++k) {
    int c = std::countr_zero(k);
    gray ^= std::uint64_t{1} << c;
    const bool added = (gray >> c) & 1u;
    for (int r = 0; r < n; ++r) rowsum[r] += added ? p.s[r * n + c] : -p.s[r * n + c];
    prefix[0] = 1.0L;
    for (int r = 0; r < n; ++r) prefix[r + 1] = prefix[r] * rowsum[r];
    suffix[n] = 1.0L;
    for (int r = n - 1; r >= 0; --r) suffix[r] = suffix[r + 1] * rowsum[r];
    const long double sgn = (std::popcount(gray) & 1) ? -1.0L : 1.0L;
    for (int i = 0; i < n; ++i) {
      const long double e = sgn * prefix[i] * suffix[i + 1];
      for (std::uint64_t bits = gray; bits; bits &= bits - 1) coef[i * n + std::countr_zero(bits)] += e;
    }
  }
  const long double parity = (n & 1) ? -1.0L : 1.0L;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.pi(i, j) = static_cast<double>(p.s[i * n + j] * parity * coef[i * n + j] / per);
  return out;
}

SinkhornResult sinkhorn_scale(const Eigen::MatrixXd& log_a, const SinkhornOptions& opts,
                              const Eigen::VectorXd* warm_v) {
  if (log_a.rows() != log_a.cols() || log_a.rows() == 0) throw InvalidArgument("Sinkhorn needs a square matrix");
  check_finite(log_a);
  const int n = static_cast<int>(log_a.rows());
  SinkhornResult r;
  r.u = Eigen::VectorXd::Zero(n);
  r.v = (warm_v && warm_v->size() == n) ? *warm_v : Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd work(n, n);
  Eigen::VectorXd colsum(n);
  for (int it = 1; it <= opts.max_iters; ++it) {
    r.iterations = it;
    for (int i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) mx = std::max(mx, log_a(i, j) - r.v(j));
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += std::exp(log_a(i, j) - r.v(j) - mx);
      r.u(i) = mx + std::log(s);
    }
    // column marginals of the row-normalized plan
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) work(i, j) = log_a(i, j) - r.u(i) - r.v(j);
      colsum(j) = std::exp(log_sum_exp(&work(0, j), n));
    }
    r.marginal_error = (colsum.array() - 1.0).abs().sum();
    if (r.marginal_error <= opts.tol) {
      r.converged = true;
      break;
    }
    r.v.array() += colsum.array().log();
  }
  r.plan = (work.array().exp()).matrix();
  double lower = 0.0;
  for (Eigen::Index k = 0; k < r.plan.size(); ++k) {
    double s = std::min(1.0, r.plan.data()[k]);
    if (s < 1.0) lower += (1.0 - s) * std::log1p(-s);
  }
  r.log_permanent_upper = r.u.sum() + r.v.sum();
  r.log_permanent_lower = r.log_permanent_upper + lower;
  return r;
}

}  // namespace wgflow
