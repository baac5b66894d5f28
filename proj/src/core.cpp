#include "sca/core.hpp"

#include <cmath>
#include <numeric>

namespace sca {

BlockPartition::BlockPartition(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw std::invalid_argument("partition needs at least one block");
  offsets_.reserve(sizes_.size());
  for (int s : sizes_) {
    if (s < 1) throw std::invalid_argument("block sizes must be positive");
    offsets_.push_back(total_);
    total_ += s;
  }
}

BlockPartition BlockPartition::scalars(int n) {
  if (n < 1) throw std::invalid_argument("need at least one variable");
  return BlockPartition(std::vector<int>(n, 1));
}

BlockPartition BlockPartition::single(int n) {
  return BlockPartition(std::vector<int>{n});
}

Vec CompositeProblem::block_grad(int i, const Vec& x) const {
  if (block_grad_F) return block_grad_F(i, x);
  Vec g = grad_F(x);
  return g.segment(partition.offset(i), partition.size(i));
}

Vec CompositeProblem::project_block(int i, const Vec& v) const {
  if (project) return project(i, v);
  return v;
}

Schedule Schedule::constant(double gamma) {
  if (!(gamma > 0.0) || gamma > 1.0)
    throw std::invalid_argument("constant step must lie in (0, 1]");
  Schedule s;
  s.kind_ = Kind::constant;
  s.gamma_ = gamma;
  return s;
}

Schedule Schedule::recursive(double gamma0, double eps) {
  if (!(gamma0 > 0.0) || gamma0 > 1.0)
    throw std::invalid_argument("recursive step needs gamma0 in (0, 1]");
  if (!(eps > 0.0) || !(eps < 1.0))
    throw std::invalid_argument("recursive step needs eps in (0, 1)");
  Schedule s;
  s.kind_ = Kind::recursive;
  s.gamma_ = gamma0;
  s.eps_ = eps;
  return s;
}

Schedule Schedule::ratio(std::function<double(int)> alpha, std::function<double(int)> beta) {
  if (!alpha || !beta) throw std::invalid_argument("ratio step needs both sequences");
  // the averaging form needs 0 <= alpha(k) <= beta(k) with alpha/beta -> 0;
  // only a sampled prefix is checkable here, the tail is the caller's contract
  double first_ratio = -1.0, last_ratio = -1.0;
  for (int k = 1; k <= 1000; ++k) {
    double a = alpha(k), b = beta(k);
    if (!(a >= 0.0) || !(b >= a))
      throw std::invalid_argument("ratio step needs 0 <= alpha(k) <= beta(k)");
    if (b > 0.0) {
      double r = a / b;
      if (first_ratio < 0.0) first_ratio = r;
      last_ratio = r;
    }
  }
  if (first_ratio > 0.0 && last_ratio > first_ratio + 1e-12)
    throw std::invalid_argument("alpha(k)/beta(k) must decay");
  Schedule s;
  s.kind_ = Kind::ratio;
  s.gamma_ = 1.0;
  s.alpha_fn_ = std::move(alpha);
  s.beta_fn_ = std::move(beta);
  return s;
}

Schedule Schedule::armijo(double alpha, double delta, double gamma0) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("armijo alpha in (0, 1)");
  if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("armijo delta in (0, 1)");
  if (!(gamma0 > 0.0) || gamma0 > 1.0) throw std::invalid_argument("armijo gamma0 in (0, 1]");
  Schedule s;
  s.kind_ = Kind::armijo;
  s.gamma_ = gamma0;
  s.alpha_ = alpha;
  s.delta_ = delta;
  s.gamma0_ = gamma0;
  return s;
}

double next_stepsize(Schedule& s) {
  switch (s.kind_) {
    case Schedule::Kind::constant:
      return s.gamma_;
    case Schedule::Kind::recursive:
      s.gamma_ = s.gamma_ * (1.0 - s.eps_ * s.gamma_);
      return s.gamma_;
    case Schedule::Kind::ratio: {
      ++s.k_;
      s.gamma_ = (s.gamma_ + s.alpha_fn_(s.k_)) / (1.0 + s.beta_fn_(s.k_));
      return s.gamma_;
    }
    case Schedule::Kind::armijo:
      throw std::logic_error("armijo schedule advances through its line search");
  }
  throw std::logic_error("unreachable");
}

double soft_threshold(double x, double alpha) {
  if (alpha < 0.0) throw std::domain_error("soft threshold needs a nonnegative level");
  double m = std::abs(x) - alpha;
  return m > 0.0 ? (x > 0.0 ? m : -m) : 0.0;
}

Vec soft_threshold(const Vec& x, double alpha) {
  if (alpha < 0.0) throw std::domain_error("soft threshold needs a nonnegative level");
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = soft_threshold(x[i], alpha);
  return out;
}

double armijo_linesearch(const CompositeProblem& problem, const Vec& x, const Vec& direction,
                         double g_decrease, double alpha, double delta, double gamma0,
                         int max_backtracks) {
  if (g_decrease > 0.0)
    throw contract_violation("line search needs a nonpositive model decrease");
  double v0 = problem.value(x);
  double t = gamma0;
  for (int j = 0; j <= max_backtracks; ++j) {
    double v = problem.value(x + t * direction);
    if (v <= v0 + alpha * t * g_decrease) return t;
    t *= delta;
  }
  throw std::runtime_error("line search exhausted its backtracking budget");
}

Vec project_box(const Vec& x, const Vec& lo, const Vec& hi) {
  if (lo.size() != x.size() || hi.size() != x.size())
    throw std::invalid_argument("box bounds must match the vector size");
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (lo[i] > hi[i]) throw std::invalid_argument("empty box");
    out[i] = std::min(std::max(x[i], lo[i]), hi[i]);
  }
  return out;
}

Vec project_nonneg(const Vec& x) { return x.cwiseMax(0.0); }

Vec project_ball2(const Vec& x, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
  double n = x.norm();
  if (n <= radius) return x;
  return (radius / n) * x;
}

double lambda_max_sym(const Mat& S, int iters) {
  if (S.rows() != S.cols()) throw std::invalid_argument("matrix must be square");
  if (S.rows() == 0) return 0.0;
  // deterministic start with a mild index tilt so it is never orthogonal to
  // the leading eigenvector of structured matrices
  Vec v = Vec::Ones(S.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += 1e-3 * static_cast<double>(i % 7);
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vec w = S * v;
    double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    lam = v.dot(S * v);
  }
  return lam;
}

double lambda_max_gram(const Mat& A, int iters) {
  if (A.size() == 0) return 0.0;
  Vec v = Vec::Ones(A.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += 1e-3 * static_cast<double>(i % 7);
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vec w = A.transpose() * (A * v);
    double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    lam = v.dot(A.transpose() * (A * v));
  }
  return lam;
}

double kahan_sum(const std::vector<double>& xs) {
  double sum = 0.0, c = 0.0;
  for (double x : xs) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  return sum;
}

}  // namespace sca
