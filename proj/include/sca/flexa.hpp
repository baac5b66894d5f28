#pragma once

#include "sca/core.hpp"

#include <memory>
#include <random>

namespace sca {

// per-block best responses built from a strongly convex model of F; prepare is
// called once per iteration with the snapshot, commit after a sequential-sweep
// block update so incremental caches stay valid
struct SurrogateFamily {
  enum class Kind { prox_linear, block_convex, sum_utility, composition, custom };
  Kind kind = Kind::custom;
  Vec tau;  // strong-convexity modulus per block
  std::function<void(const Vec&)> prepare;
  // argmin over X_i of Ftilde_i(u | x) + G_i(u); eps is the allowed distance to
  // the exact minimizer (0 asks for an exact solve)
  std::function<Vec(int i, const Vec& x, double eps)> best_response;
  // Ftilde_i(u | x) up to an additive constant chosen so the value at u = x_i is 0
  std::function<double(int i, const Vec& u, const Vec& x)> value;
  std::function<void(int i, const Vec& old_block, const Vec& new_block)> commit;
};

// inexact best responses: epsilon bounds the distance to the exact minimizer per
// iteration; the descent check enforces that accepted points do not increase the
// block model (needs SurrogateFamily::value)
struct InexactPolicy {
  std::function<double(int k)> epsilon;
  bool descent_check = false;
};

// random block-candidate generators; all draws come from the driver's generator
class Sampling {
 public:
  enum class Kind { uniform, doubly_uniform, nonoverlapping_uniform, nice, sequential, fully_parallel };

  // independent inclusion with the given probability
  static Sampling uniform(double inclusion_prob);
  // size drawn from the given distribution over {0..n}, then a uniform subset of that size
  static Sampling doubly_uniform(std::vector<double> size_probs);
  // one of the given disjoint groups, uniformly
  static Sampling nonoverlapping_uniform(std::vector<std::vector<int>> groups);
  // all subsets of the given size equally likely
  static Sampling nice(int subset_size);
  // a single uniformly drawn block
  static Sampling sequential();
  // every block, every time
  static Sampling fully_parallel();

  Kind kind() const { return kind_; }
  std::vector<int> draw(int n, std::mt19937_64& gen) const;

 private:
  Sampling() = default;
  Kind kind_ = Kind::fully_parallel;
  double p_ = 1.0;
  int size_ = 1;
  std::vector<double> size_probs_;
  std::vector<std::vector<int>> groups_;
};

class SelectionRule {
 public:
  enum class Kind {
    all,
    essentially_cyclic,
    greedy,
    random,
    random_greedy,
    partitioned_cyclic,
    partitioned_greedy_cyclic
  };

  static SelectionRule all();
  // block i is active when i mod period == k mod period; period <= block count
  static SelectionRule essentially_cyclic(int period);
  // blocks whose error measure reaches rho times the best, rho in (0, 1]
  static SelectionRule greedy(double rho);
  static SelectionRule random(Sampling sampling);
  // greedy restricted to a sampled candidate pool
  static SelectionRule random_greedy(Sampling sampling, double rho);
  // worker p sweeps its own group sequentially from the shared snapshot
  static SelectionRule partitioned_cyclic(std::vector<std::vector<int>> groups);
  // like partitioned_cyclic, but each worker sweeps only its above-threshold blocks
  static SelectionRule partitioned_greedy_cyclic(std::vector<std::vector<int>> groups, double rho);

  Kind kind() const { return kind_; }
  int period() const { return period_; }
  double rho() const { return rho_; }
  const Sampling& sampling() const { return sampling_; }
  const std::vector<std::vector<int>>& groups() const { return groups_; }

 private:
  SelectionRule() = default;
  Kind kind_ = Kind::all;
  int period_ = 1;
  double rho_ = 1.0;
  Sampling sampling_ = Sampling::fully_parallel();
  std::vector<std::vector<int>> groups_;
};

// indices with E_i >= rho * max E (ties at the max always included); entries that
// are not finite are skipped, and a fully non-finite E is an error
std::vector<int> greedy_select(const Vec& E, double rho);

// displacement error measure ||xhat_i - x_i|| per block
Vec error_bound_default(const BlockPartition& partition, const Vec& x,
                        const std::vector<Vec>& best_responses);
// projected-gradient residual per block; valid as an error proxy when G = 0
Vec error_bound_gradient_residual(const CompositeProblem& problem, const Vec& x);

struct FlexaConfig {
  int max_iters = 1000;
  double stop_tol = 1e-6;
  // partial selection rules run a full best-response sweep at this cadence so the
  // stopping residual covers every block
  int check_every = 25;
  int workers = 1;
  unsigned seed = 0;
  bool record_iterates = false;

  // objective-driven curvature adaptation: double every tau and discard the
  // iteration when the objective fails to decrease; halve after enough
  // consecutive decreases or once the progress merit is small
  bool adaptive_tau = false;
  int tau_shrink_after = 10;
  double tau_shrink_threshold = 1e-2;
  int tau_max_updates = 100;

  // multiplicative step decay driven by the progress merit:
  // gamma <- gamma * (1 - min(1, merit_step_c / merit) * merit_step_theta * gamma)
  bool merit_step_rule = false;
  double merit_step_gamma0 = 0.9;
  double merit_step_c = 1e-4;
  double merit_step_theta = 1e-7;

  // external progress measure (relative objective error, residual norm, ...)
  std::function<double(const Vec&)> progress_merit;
  // stop once the progress merit falls to this level
  std::optional<double> stop_merit;
};

struct FlexaTrajectory {
  std::vector<MeritReport> merits;
  std::vector<double> stepsizes;
  std::vector<int> selected_counts;
  std::vector<double> progress;  // progress_merit per iteration when configured
  std::vector<Vec> iterates;     // populated when record_iterates
  Vec solution;
  int iterations = 0;
  int tau_updates = 0;
};

FlexaTrajectory flexa_run(const CompositeProblem& problem, const SurrogateFamily& family,
                          const SelectionRule& rule, Schedule schedule, const InexactPolicy& inexact,
                          const Vec& x0, const FlexaConfig& cfg);

// proximal-linear best response for one block:
// argmin_u grad_i F(x)' (u - x_i) + tau/2 ||u - x_i||^2 + G_i(u) over X_i
Vec best_response_prox_linear(const CompositeProblem& problem, int i, const Vec& x, double tau);

SurrogateFamily make_prox_linear_family(const CompositeProblem& problem, Vec tau);

// own-block dependence kept exact, proximal damping added
SurrogateFamily make_block_convex_family(const CompositeProblem& problem, Vec tau,
                                         int inner_iters = 100);

// F = sum_j f_j; components owned by block i stay exact, the rest are linearized
struct UtilityComponent {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
  int owner = 0;
};
SurrogateFamily make_sum_utility_family(const CompositeProblem& problem,
                                        std::vector<UtilityComponent> components, Vec tau,
                                        int inner_iters = 100);

// F = h(g(x)) with h convex and smooth; the inner map is linearized per block
struct CompositionParts {
  std::function<double(const Vec&)> h_value;
  std::function<Vec(const Vec&)> h_grad;
  std::function<Vec(const Vec&)> g_value;
  // jacobian of g restricted to block i, evaluated at x
  std::function<Mat(int, const Vec&)> g_block_jacobian;
};
SurrogateFamily make_composition_family(const CompositeProblem& problem, CompositionParts parts,
                                        Vec tau, int inner_iters = 100);

}  // namespace sca
