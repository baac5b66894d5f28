#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sca {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// thrown when a solver detects that a supplied surrogate or direction breaks
// its contract (objective increased, non-descent direction, ...)
struct contract_violation : std::runtime_error {
  explicit contract_violation(const std::string& what) : std::runtime_error(what) {}
};

// contiguous block layout over a flat vector; block i is x.segment(offset(i), size(i))
class BlockPartition {
 public:
  BlockPartition() = default;
  explicit BlockPartition(std::vector<int> sizes);

  // n blocks of size 1
  static BlockPartition scalars(int n);
  // a single block covering n entries
  static BlockPartition single(int n);

  int blocks() const { return static_cast<int>(sizes_.size()); }
  int size(int i) const { return sizes_.at(i); }
  int offset(int i) const { return offsets_.at(i); }
  int total() const { return total_; }

  Eigen::VectorBlock<Vec> block(Vec& x, int i) const {
    return x.segment(offset(i), size(i));
  }
  Eigen::VectorBlock<const Vec> block(const Vec& x, int i) const {
    return x.segment(offset(i), size(i));
  }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int total_ = 0;
};

// merit values recorded once per outer iteration
struct MeritReport {
  double objective = 0.0;
  double fixed_point_residual = 0.0;
  double relative_descent = 0.0;
  double iterate_delta = 0.0;
};

// minimize F(x) + G(x) over X, with block structure given by partition.
// block callables receive the block index and the full iterate.
struct CompositeProblem {
  int dim = 0;
  BlockPartition partition;
  std::function<double(const Vec&)> eval_F;
  std::function<Vec(const Vec&)> grad_F;
  // gradient of F restricted to block i; optional, default slices grad_F
  std::function<Vec(int, const Vec&)> block_grad_F;
  // optional, default 0
  std::function<double(const Vec&)> eval_G;
  // block prox: argmin_u G_i(u) + (1/(2w)) ||u - v||^2 over X_i; optional
  std::function<Vec(int, const Vec&, double)> prox_or_solve_G;
  // block projection onto X_i; optional, default identity
  std::function<Vec(int, const Vec&)> project;
  std::optional<double> lipschitz_hint;
  bool separable_G = true;

  double G_value(const Vec& x) const { return eval_G ? eval_G(x) : 0.0; }
  double value(const Vec& x) const { return eval_F(x) + G_value(x); }
  Vec block_grad(int i, const Vec& x) const;
  Vec project_block(int i, const Vec& v) const;
};

// step-size sequences; armijo kind carries line-search parameters and is
// advanced by the driver's search, not by next_stepsize
class Schedule {
 public:
  enum class Kind { constant, recursive, ratio, armijo };

  static Schedule constant(double gamma);
  static Schedule recursive(double gamma0, double eps);
  static Schedule ratio(std::function<double(int)> alpha, std::function<double(int)> beta);
  static Schedule armijo(double alpha, double delta, double gamma0);

  Kind kind() const { return kind_; }
  double current() const { return gamma_; }
  double armijo_alpha() const { return alpha_; }
  double armijo_delta() const { return delta_; }
  double armijo_gamma0() const { return gamma0_; }

  friend double next_stepsize(Schedule& s);

 private:
  Schedule() = default;
  Kind kind_ = Kind::constant;
  double gamma_ = 1.0;
  double eps_ = 0.0;
  std::function<double(int)> alpha_fn_, beta_fn_;
  int k_ = 0;
  double alpha_ = 0.0, delta_ = 0.0, gamma0_ = 1.0;
};

// advances the schedule one step and returns the new value
double next_stepsize(Schedule& s);

double soft_threshold(double x, double alpha);
Vec soft_threshold(const Vec& x, double alpha);

// backtracking on V(x + t*direction) <= V(x) + alpha*t*g_decrease with
// t = gamma0 * delta^j; g_decrease must be <= 0; at most max_backtracks halvings
double armijo_linesearch(const CompositeProblem& problem, const Vec& x, const Vec& direction,
                         double g_decrease, double alpha, double delta, double gamma0,
                         int max_backtracks = 64);

Vec project_box(const Vec& x, const Vec& lo, const Vec& hi);
Vec project_nonneg(const Vec& x);
Vec project_ball2(const Vec& x, double radius);

// largest eigenvalue of the gram matrix A^T A by power iteration
double lambda_max_gram(const Mat& A, int iters = 50);
// largest eigenvalue of a symmetric matrix by power iteration
double lambda_max_sym(const Mat& S, int iters = 50);

// compensated summation; used where invariant drift is measured at 1e-12
double kahan_sum(const std::vector<double>& xs);

}  // namespace sca
