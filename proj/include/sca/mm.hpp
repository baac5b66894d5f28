#pragma once

#include "sca/core.hpp"
#include "sca/penalties.hpp"

#include <random>

namespace sca {

struct MMConfig {
  int max_iters = 500;
  double tol_relative_descent = 1e-6;
  double tol_iterate_delta = 1e-6;
  int inner_max_iters = 200;
  double inner_tol = 1e-8;
  // every accepted step must satisfy value_next <= surrogate_at_next <= value_current,
  // up to chain_slack; violations raise contract_violation
  bool check_chain = true;
  double chain_slack = 1e-10;
};

// one majorize-minimize step's audit record
struct ChainSample {
  double value_current = 0.0;
  double surrogate_at_next = 0.0;
  double value_next = 0.0;
};

struct MMTrajectory {
  std::vector<Vec> iterates;  // x^0, x^1, ...
  std::vector<MeritReport> merits;
  std::vector<ChainSample> chain;
  int iterations = 0;

  const Vec& solution() const { return iterates.back(); }
  double objective() const { return merits.empty() ? 0.0 : merits.back().objective; }
};

// argmin of the surrogate built at the given base point
using SurrogateSolver = std::function<Vec(const Vec&)>;
// surrogate value (x, base) -> stilde(x | base); must touch the objective at base
using SurrogateValue = std::function<double(const Vec&, const Vec&)>;
using Objective = std::function<double(const Vec&)>;

MMTrajectory mm_minimize(const SurrogateSolver& solve, const SurrogateValue& surrogate,
                         const Objective& objective, const Vec& x0, const MMConfig& cfg);

// block selection for one-block-per-iteration sweeps
class BlockRule {
 public:
  enum class Kind { cyclic, max_improvement, random };

  // visits blocks round-robin; period must be >= the block count
  static BlockRule cyclic(int period);
  // picks the block whose surrogate minimum is lowest; ties take the lowest index
  static BlockRule max_improvement();
  // uniform draw; p_min in (0, 1/blocks] documents the selection-probability floor
  static BlockRule random(double p_min, unsigned seed);

  Kind kind() const { return kind_; }
  int period() const { return period_; }
  double p_min() const { return p_min_; }
  unsigned seed() const { return seed_; }

 private:
  BlockRule() = default;
  Kind kind_ = Kind::cyclic;
  int period_ = 0;
  double p_min_ = 0.0;
  unsigned seed_ = 0;
};

struct BlockSurrogate {
  // new values for block i from a surrogate built at base
  std::function<Vec(int i, const Vec& base)> solve;
  // surrogate value for block i at block iterate x_i, built at base; optional,
  // required by chain checks and the max_improvement rule
  std::function<double(int i, const Vec& x_i, const Vec& base)> value;
};

struct BlockMMTrajectory {
  std::vector<Vec> iterates;
  std::vector<MeritReport> merits;
  std::vector<ChainSample> chain;
  std::vector<int> visited;  // block updated at each iteration
  int iterations = 0;
  const Vec& solution() const { return iterates.back(); }
};

BlockMMTrajectory block_mm_minimize(const BlockSurrogate& surrogate, const Objective& objective,
                                    const BlockPartition& partition, const Vec& x0,
                                    const BlockRule& rule, const MMConfig& cfg);

// ---- sparse least squares with a difference-of-convex penalty ----

enum class SparseLsVariant {
  double_loop,  // rebuild weights outside, run thresholded gradient steps inside
  one_step      // single thresholded gradient step per reweighting
};

MMTrajectory sparse_ls_mm(const Mat& A, const Vec& z, double lambda, const DCPenalty& penalty,
                          SparseLsVariant variant, const Vec& x0, const MMConfig& cfg);

double sparse_ls_objective(const Mat& A, const Vec& z, double lambda, const DCPenalty& penalty,
                           const Vec& x);

// ---- nonnegative least squares ----

enum class NnlsVariant { grad_proj, multiplicative };

MMTrajectory nnls_mm(const Mat& A, const Vec& z, NnlsVariant variant, const Vec& x0,
                     const MMConfig& cfg);

// ---- matrix completion with sparse outliers and a low-rank term ----

// spectral soft threshold with per-value upward weights:
// sigma_i -> max(sigma_i + w_i*lambda_r/2 - eta*lambda_r/2, 0); needs rows <= cols
Mat singular_value_threshold(const Mat& X, double lambda_r, double eta, const Vec& w);

struct MatCompProblem {
  Mat Y;                                 // data; entries outside the mask are ignored
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed;
  double lambda_s = 1.0;
  double lambda_r = 1.0;
  DCPenalty entry_penalty = DCPenalty::log_kind(10.0);     // on outlier entries
  DCPenalty spectral_penalty = DCPenalty::log_kind(10.0);  // on singular values
};

struct MatCompState {
  Mat L;  // low-rank part
  Mat S;  // sparse part
};

struct MatCompTrajectory {
  std::vector<double> objectives;  // V(L^0,S^0), V after each full sweep
  std::vector<ChainSample> chain;  // two samples per sweep: outlier block, low-rank block
  MatCompState state;
  int iterations = 0;
};

double matcomp_objective(const MatCompProblem& problem, const MatCompState& state);

MatCompTrajectory matcomp_block_mm(const MatCompProblem& problem, const MatCompState& init,
                                   const MMConfig& cfg);

// ---- dictionary learning ----

class DictConstraint {
 public:
  enum class Kind { frobenius_ball, per_column_ball, nonneg };

  static DictConstraint frobenius_ball(double alpha);
  static DictConstraint per_column_ball(const Vec& alphas);
  static DictConstraint nonneg();

  Kind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  const Vec& alphas() const { return alphas_; }

  Mat project(const Mat& D) const;

 private:
  DictConstraint() = default;
  Kind kind_ = Kind::frobenius_ball;
  double alpha_ = 1.0;
  Vec alphas_;
};

struct DictLearnResult {
  Mat D;
  Mat X;
  std::vector<double> objectives;
  std::vector<ChainSample> chain;  // two samples per sweep: dictionary block, code block
  int iterations = 0;
};

double dict_learn_objective(const Mat& Y, const Mat& D, const Mat& X, double lambda_s,
                            const DCPenalty& penalty);

DictLearnResult dictionary_learning_mm(const Mat& Y, double lambda_s, const DCPenalty& penalty,
                                       const DictConstraint& constraint, const Mat& D0,
                                       const Mat& X0, const MMConfig& cfg);

}  // namespace sca
