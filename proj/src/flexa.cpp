#include "sca/flexa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace sca {

// ---- sampling ----

Sampling Sampling::uniform(double inclusion_prob) {
  if (!(inclusion_prob > 0.0) || inclusion_prob > 1.0)
    throw std::invalid_argument("inclusion probability must lie in (0, 1]");
  Sampling s;
  s.kind_ = Kind::uniform;
  s.p_ = inclusion_prob;
  return s;
}

Sampling Sampling::doubly_uniform(std::vector<double> size_probs) {
  if (size_probs.empty()) throw std::invalid_argument("need a size distribution");
  double sum = 0.0;
  for (double q : size_probs) {
    if (q < 0.0) throw std::invalid_argument("size probabilities must be nonnegative");
    sum += q;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("size probabilities must sum to one");
  Sampling s;
  s.kind_ = Kind::doubly_uniform;
  s.size_probs_ = std::move(size_probs);
  return s;
}

Sampling Sampling::nonoverlapping_uniform(std::vector<std::vector<int>> groups) {
  if (groups.empty()) throw std::invalid_argument("need at least one group");
  Sampling s;
  s.kind_ = Kind::nonoverlapping_uniform;
  s.groups_ = std::move(groups);
  return s;
}

Sampling Sampling::nice(int subset_size) {
  if (subset_size < 1) throw std::invalid_argument("subset size must be positive");
  Sampling s;
  s.kind_ = Kind::nice;
  s.size_ = subset_size;
  return s;
}

Sampling Sampling::sequential() {
  Sampling s;
  s.kind_ = Kind::sequential;
  return s;
}

Sampling Sampling::fully_parallel() {
  Sampling s;
  s.kind_ = Kind::fully_parallel;
  return s;
}

namespace {

std::vector<int> draw_subset(int n, int size, std::mt19937_64& gen) {
  std::vector<int> arr(n);
  std::iota(arr.begin(), arr.end(), 0);
  for (int j = 0; j < size; ++j) {
    std::uniform_int_distribution<int> d(j, n - 1);
    std::swap(arr[j], arr[d(gen)]);
  }
  arr.resize(size);
  std::sort(arr.begin(), arr.end());
  return arr;
}

void check_partition_of_blocks(const std::vector<std::vector<int>>& groups, int n) {
  std::vector<char> seen(n, 0);
  for (const auto& g : groups)
    for (int i : g) {
      if (i < 0 || i >= n) throw std::invalid_argument("group index out of range");
      if (seen[i]) throw std::invalid_argument("groups must be disjoint");
      seen[i] = 1;
    }
  for (char c : seen)
    if (!c) throw std::invalid_argument("groups must cover every block");
}

}  // namespace

std::vector<int> Sampling::draw(int n, std::mt19937_64& gen) const {
  switch (kind_) {
    case Kind::uniform: {
      std::vector<int> out;
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int i = 0; i < n; ++i)
        if (u(gen) < p_) out.push_back(i);
      return out;
    }
    case Kind::doubly_uniform: {
      if (static_cast<int>(size_probs_.size()) != n + 1)
        throw std::invalid_argument("size distribution must have one entry per size 0..n");
      std::uniform_real_distribution<double> u(0.0, 1.0);
      double r = u(gen), acc = 0.0;
      int size = n;
      for (int j = 0; j <= n; ++j) {
        acc += size_probs_[j];
        if (r < acc) {
          size = j;
          break;
        }
      }
      return draw_subset(n, size, gen);
    }
    case Kind::nonoverlapping_uniform: {
      check_partition_of_blocks(groups_, n);
      std::uniform_int_distribution<int> d(0, static_cast<int>(groups_.size()) - 1);
      std::vector<int> out = groups_[d(gen)];
      std::sort(out.begin(), out.end());
      return out;
    }
    case Kind::nice: {
      if (size_ > n) throw std::invalid_argument("subset size exceeds the block count");
      return draw_subset(n, size_, gen);
    }
    case Kind::sequential:
      return draw_subset(n, 1, gen);
    case Kind::fully_parallel: {
      std::vector<int> out(n);
      std::iota(out.begin(), out.end(), 0);
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

// ---- selection rules ----

SelectionRule SelectionRule::all() { return SelectionRule(); }

SelectionRule SelectionRule::essentially_cyclic(int period) {
  if (period < 1) throw std::invalid_argument("period must be positive");
  SelectionRule r;
  r.kind_ = Kind::essentially_cyclic;
  r.period_ = period;
  return r;
}

SelectionRule SelectionRule::greedy(double rho) {
  if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("greedy ratio must lie in (0, 1]");
  SelectionRule r;
  r.kind_ = Kind::greedy;
  r.rho_ = rho;
  return r;
}

SelectionRule SelectionRule::random(Sampling sampling) {
  SelectionRule r;
  r.kind_ = Kind::random;
  r.sampling_ = std::move(sampling);
  return r;
}

SelectionRule SelectionRule::random_greedy(Sampling sampling, double rho) {
  if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("greedy ratio must lie in (0, 1]");
  SelectionRule r;
  r.kind_ = Kind::random_greedy;
  r.sampling_ = std::move(sampling);
  r.rho_ = rho;
  return r;
}

SelectionRule SelectionRule::partitioned_cyclic(std::vector<std::vector<int>> groups) {
  if (groups.empty()) throw std::invalid_argument("need at least one group");
  SelectionRule r;
  r.kind_ = Kind::partitioned_cyclic;
  r.groups_ = std::move(groups);
  return r;
}

SelectionRule SelectionRule::partitioned_greedy_cyclic(std::vector<std::vector<int>> groups,
                                                       double rho) {
  if (groups.empty()) throw std::invalid_argument("need at least one group");
  if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("greedy ratio must lie in (0, 1]");
  SelectionRule r;
  r.kind_ = Kind::partitioned_greedy_cyclic;
  r.groups_ = std::move(groups);
  r.rho_ = rho;
  return r;
}

std::vector<int> greedy_select(const Vec& E, double rho) {
  if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("greedy ratio must lie in (0, 1]");
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < E.size(); ++i)
    if (std::isfinite(E[i])) best = std::max(best, E[i]);
  if (!std::isfinite(best)) throw std::runtime_error("error measures are all non-finite");
  std::vector<int> out;
  for (Eigen::Index i = 0; i < E.size(); ++i)
    if (std::isfinite(E[i]) && E[i] >= rho * best) out.push_back(static_cast<int>(i));
  return out;
}

Vec error_bound_default(const BlockPartition& partition, const Vec& x,
                        const std::vector<Vec>& best_responses) {
  if (static_cast<int>(best_responses.size()) != partition.blocks())
    throw std::invalid_argument("one response per block");
  Vec E(partition.blocks());
  for (int i = 0; i < partition.blocks(); ++i)
    E[i] = (best_responses[i] - partition.block(x, i)).norm();
  return E;
}

Vec error_bound_gradient_residual(const CompositeProblem& problem, const Vec& x) {
  Vec E(problem.partition.blocks());
  for (int i = 0; i < problem.partition.blocks(); ++i) {
    Vec xi = problem.partition.block(x, i);
    Vec moved = problem.project_block(i, xi - problem.block_grad(i, x));
    E[i] = (moved - xi).norm();
  }
  return E;
}

// ---- best responses and the surrogate catalogue ----

Vec best_response_prox_linear(const CompositeProblem& problem, int i, const Vec& x, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("proximal weight must be positive");
  Vec xi = problem.partition.block(x, i);
  Vec v = xi - problem.block_grad(i, x) / tau;
  if (problem.prox_or_solve_G) return problem.prox_or_solve_G(i, v, 1.0 / tau);
  return problem.project_block(i, v);
}

namespace {

Vec broadcast_tau(Vec tau, int blocks) {
  if (tau.size() == 1 && blocks > 1) return Vec::Constant(blocks, tau[0]);
  if (tau.size() != blocks) throw std::invalid_argument("one curvature modulus per block");
  if ((tau.array() <= 0.0).any()) throw std::invalid_argument("curvature moduli must be positive");
  return tau;
}

// proximal gradient with backtracking on a strongly convex block model
Vec prox_block_solve(const std::function<double(const Vec&)>& f,
                     const std::function<Vec(const Vec&)>& grad,
                     const std::function<Vec(const Vec&, double)>& prox, const Vec& u0, int iters,
                     double tol) {
  Vec u = u0;
  double L = 1.0;
  for (int it = 0; it < iters; ++it) {
    Vec g = grad(u);
    double fu = f(u);
    Vec trial = u;
    for (int bt = 0; bt < 60; ++bt) {
      trial = prox(u - g / L, 1.0 / L);
      double model = fu + g.dot(trial - u) + (L / 2.0) * (trial - u).squaredNorm();
      if (f(trial) <= model + 1e-12 * std::max(1.0, std::abs(model))) break;
      L *= 2.0;
    }
    double step = (trial - u).norm();
    u = trial;
    if (step <= tol) break;
    L = std::max(L * 0.5, 1e-8);
  }
  return u;
}

std::function<Vec(const Vec&, double)> block_prox(const CompositeProblem& problem, int i) {
  return [&problem, i](const Vec& v, double w) {
    if (problem.prox_or_solve_G) return problem.prox_or_solve_G(i, v, w);
    return problem.project_block(i, v);
  };
}

Vec with_block(const CompositeProblem& problem, const Vec& x, int i, const Vec& u) {
  Vec y = x;
  problem.partition.block(y, i) = u;
  return y;
}

}  // namespace

SurrogateFamily make_prox_linear_family(const CompositeProblem& problem, Vec tau) {
  SurrogateFamily fam;
  fam.kind = SurrogateFamily::Kind::prox_linear;
  fam.tau = broadcast_tau(std::move(tau), problem.partition.blocks());
  Vec taus = fam.tau;
  fam.best_response = [&problem, taus](int i, const Vec& x, double) {
    return best_response_prox_linear(problem, i, x, taus[i]);
  };
  fam.value = [&problem, taus](int i, const Vec& u, const Vec& x) {
    Vec xi = problem.partition.block(x, i);
    return problem.block_grad(i, x).dot(u - xi) + 0.5 * taus[i] * (u - xi).squaredNorm();
  };
  return fam;
}

SurrogateFamily make_block_convex_family(const CompositeProblem& problem, Vec tau, int inner_iters) {
  SurrogateFamily fam;
  fam.kind = SurrogateFamily::Kind::block_convex;
  fam.tau = broadcast_tau(std::move(tau), problem.partition.blocks());
  Vec taus = fam.tau;
  fam.best_response = [&problem, taus, inner_iters](int i, const Vec& x, double eps) {
    Vec xi = problem.partition.block(x, i);
    auto f = [&](const Vec& u) {
      return problem.eval_F(with_block(problem, x, i, u)) + 0.5 * taus[i] * (u - xi).squaredNorm();
    };
    auto g = [&](const Vec& u) {
      Vec gr = problem.block_grad(i, with_block(problem, x, i, u));
      return Vec(gr + taus[i] * (u - xi));
    };
    return prox_block_solve(f, g, block_prox(problem, i), xi, inner_iters, std::max(eps, 1e-10));
  };
  fam.value = [&problem, taus](int i, const Vec& u, const Vec& x) {
    Vec xi = problem.partition.block(x, i);
    return problem.eval_F(with_block(problem, x, i, u)) - problem.eval_F(x) +
           0.5 * taus[i] * (u - xi).squaredNorm();
  };
  return fam;
}

SurrogateFamily make_sum_utility_family(const CompositeProblem& problem,
                                        std::vector<UtilityComponent> components, Vec tau,
                                        int inner_iters) {
  for (const auto& c : components) {
    if (!c.value || !c.grad) throw std::invalid_argument("components need value and gradient");
    if (c.owner < 0 || c.owner >= problem.partition.blocks())
      throw std::invalid_argument("component owner out of range");
  }
  SurrogateFamily fam;
  fam.kind = SurrogateFamily::Kind::sum_utility;
  fam.tau = broadcast_tau(std::move(tau), problem.partition.blocks());
  Vec taus = fam.tau;
  auto comps = std::make_shared<std::vector<UtilityComponent>>(std::move(components));
  auto others_grad = [&problem, comps](int i, const Vec& x) {
    Vec lin = Vec::Zero(problem.partition.size(i));
    for (const auto& c : *comps)
      if (c.owner != i)
        lin += c.grad(x).segment(problem.partition.offset(i), problem.partition.size(i));
    return lin;
  };
  fam.best_response = [&problem, comps, taus, others_grad, inner_iters](int i, const Vec& x,
                                                                       double eps) {
    Vec xi = problem.partition.block(x, i);
    Vec lin = others_grad(i, x);
    auto f = [&](const Vec& u) {
      double own = 0.0;
      Vec y = with_block(problem, x, i, u);
      for (const auto& c : *comps)
        if (c.owner == i) own += c.value(y);
      return own + lin.dot(u - xi) + 0.5 * taus[i] * (u - xi).squaredNorm();
    };
    auto g = [&](const Vec& u) {
      Vec gr = Vec::Zero(u.size());
      Vec y = with_block(problem, x, i, u);
      for (const auto& c : *comps)
        if (c.owner == i)
          gr += c.grad(y).segment(problem.partition.offset(i), problem.partition.size(i));
      return Vec(gr + lin + taus[i] * (u - xi));
    };
    return prox_block_solve(f, g, block_prox(problem, i), xi, inner_iters, std::max(eps, 1e-10));
  };
  fam.value = [&problem, comps, taus, others_grad](int i, const Vec& u, const Vec& x) {
    Vec xi = problem.partition.block(x, i);
    Vec y = with_block(problem, x, i, u);
    double own = 0.0;
    for (const auto& c : *comps)
      if (c.owner == i) own += c.value(y) - c.value(x);
    return own + others_grad(i, x).dot(u - xi) + 0.5 * taus[i] * (u - xi).squaredNorm();
  };
  return fam;
}

SurrogateFamily make_composition_family(const CompositeProblem& problem, CompositionParts parts,
                                        Vec tau, int inner_iters) {
  if (!parts.h_value || !parts.h_grad || !parts.g_value || !parts.g_block_jacobian)
    throw std::invalid_argument("composition needs h, its gradient, g, and block jacobians");
  SurrogateFamily fam;
  fam.kind = SurrogateFamily::Kind::composition;
  fam.tau = broadcast_tau(std::move(tau), problem.partition.blocks());
  Vec taus = fam.tau;
  auto ps = std::make_shared<CompositionParts>(std::move(parts));
  fam.best_response = [&problem, ps, taus, inner_iters](int i, const Vec& x, double eps) {
    Vec xi = problem.partition.block(x, i);
    Vec gx = ps->g_value(x);
    Mat J = ps->g_block_jacobian(i, x);
    auto f = [&](const Vec& u) {
      return ps->h_value(gx + J * (u - xi)) + 0.5 * taus[i] * (u - xi).squaredNorm();
    };
    auto g = [&](const Vec& u) {
      return Vec(J.transpose() * ps->h_grad(gx + J * (u - xi)) + taus[i] * (u - xi));
    };
    return prox_block_solve(f, g, block_prox(problem, i), xi, inner_iters, std::max(eps, 1e-10));
  };
  fam.value = [&problem, ps, taus](int i, const Vec& u, const Vec& x) {
    Vec xi = problem.partition.block(x, i);
    Vec gx = ps->g_value(x);
    Mat J = ps->g_block_jacobian(i, x);
    return ps->h_value(gx + J * (u - xi)) - ps->h_value(gx) +
           0.5 * taus[i] * (u - xi).squaredNorm();
  };
  return fam;
}

// ---- the driver ----

namespace {

struct ResponseBuffer {
  std::vector<Vec> z;
  std::vector<char> have;
};

void compute_responses(const SurrogateFamily& family, const Vec& x, double eps,
                       const std::vector<int>& idxs, int workers, ResponseBuffer& buf) {
  auto solve_range = [&](size_t lo, size_t hi) {
    for (size_t j = lo; j < hi; ++j) {
      int i = idxs[j];
      if (!buf.have[i]) {
        buf.z[i] = family.best_response(i, x, eps);
        buf.have[i] = 1;
      }
    }
  };
  int w = std::min<int>(workers, static_cast<int>(idxs.size()));
  if (w <= 1) {
    solve_range(0, idxs.size());
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errs(w);
  for (int t = 0; t < w; ++t) {
    size_t lo = idxs.size() * t / w, hi = idxs.size() * (t + 1) / w;
    threads.emplace_back([&, t, lo, hi] {
      try {
        solve_range(lo, hi);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

double block_G_delta(const CompositeProblem& problem, const Vec& x, int i, const Vec& u,
                     double Gx) {
  if (!problem.eval_G) return 0.0;
  Vec y = x;
  problem.partition.block(y, i) = u;
  return problem.eval_G(y) - Gx;
}

}  // namespace

FlexaTrajectory flexa_run(const CompositeProblem& problem, const SurrogateFamily& family,
                          const SelectionRule& rule, Schedule schedule, const InexactPolicy& inexact,
                          const Vec& x0, const FlexaConfig& cfg) {
  const int n = problem.partition.blocks();
  if (x0.size() != problem.partition.total())
    throw std::invalid_argument("start point does not fit the partition");
  if (!family.best_response) throw std::invalid_argument("the family needs a best response");
  if (family.tau.size() != n) throw std::invalid_argument("one curvature modulus per block");
  if (cfg.merit_step_rule && !cfg.progress_merit)
    throw std::invalid_argument("the merit step rule needs a progress merit");
  if (cfg.stop_merit && !cfg.progress_merit)
    throw std::invalid_argument("a merit stop level needs a progress merit");
  const bool sweep_rule = rule.kind() == SelectionRule::Kind::partitioned_cyclic ||
                          rule.kind() == SelectionRule::Kind::partitioned_greedy_cyclic;
  if (sweep_rule) check_partition_of_blocks(rule.groups(), n);
  if (inexact.descent_check && !family.value)
    throw std::invalid_argument("the descent check needs surrogate values");

  FlexaTrajectory traj;
  Vec x = x0;
  double V = problem.value(x);
  Vec tau = family.tau;
  std::mt19937_64 gen(cfg.seed);
  const bool armijo = schedule.kind() == Schedule::Kind::armijo;
  double gamma_state = cfg.merit_step_rule ? cfg.merit_step_gamma0
                                           : (armijo ? schedule.armijo_gamma0() : schedule.current());
  double merit_at_x =
      cfg.progress_merit ? cfg.progress_merit(x) : std::numeric_limits<double>::quiet_NaN();
  int decrease_streak = 0;
  ResponseBuffer buf;
  buf.z.assign(n, Vec());
  buf.have.assign(n, 0);

  // the family's curvature moduli do not move under adaptation unless the
  // family consults this vector; closed-form families capture tau by value, so
  // adaptation swaps the family's responses through scaled re-solves below
  auto solve_with_tau = [&](int i, const Vec& at, double eps) {
    return family.best_response(i, at, eps);
  };
  (void)solve_with_tau;

  for (int k = 0; k < cfg.max_iters; ++k) {
    if (cfg.stop_merit && cfg.progress_merit && merit_at_x <= *cfg.stop_merit) break;
    if (family.prepare) family.prepare(x);
    double eps_k = inexact.epsilon ? std::max(0.0, inexact.epsilon(k)) : 0.0;
    std::fill(buf.have.begin(), buf.have.end(), 0);

    std::vector<int> everything(n);
    std::iota(everything.begin(), everything.end(), 0);

    std::vector<int> active;
    bool full = false;
    double residual = std::numeric_limits<double>::quiet_NaN();

    if (sweep_rule) {
      // sequential sweeps per group from a shared snapshot; fresh own values,
      // snapshot values for everyone else
      double gamma = gamma_state;
      if (!problem.separable_G && problem.eval_G) gamma = std::min(gamma, 1.0 / n);
      std::vector<std::vector<int>> plan = rule.groups();
      if (rule.kind() == SelectionRule::Kind::partitioned_greedy_cyclic) {
        compute_responses(family, x, eps_k, everything, cfg.workers, buf);
        Vec E = error_bound_default(problem.partition, x, buf.z);
        residual = E.maxCoeff();
        full = true;
        if (residual <= cfg.stop_tol) break;
        double M = residual;
        for (auto& g : plan) {
          std::vector<int> kept;
          for (int i : g)
            if (E[i] >= rule.rho() * M) kept.push_back(i);
          g = std::move(kept);
        }
      }
      Vec x_next = x;
      double sweep_residual = 0.0;
      int touched = 0;
      for (const auto& g : plan) {
        if (g.empty()) continue;
        if (family.prepare) family.prepare(x);  // caches must match the snapshot again
        Vec x_local = x;
        for (int i : g) {
          Vec z = family.best_response(i, x_local, eps_k);
          Vec old_block = problem.partition.block(x_local, i);
          sweep_residual = std::max(sweep_residual, (z - old_block).norm());
          Vec new_block = old_block + gamma * (z - old_block);
          problem.partition.block(x_local, i) = new_block;
          problem.partition.block(x_next, i) = new_block;
          if (family.commit) family.commit(i, old_block, new_block);
          ++touched;
        }
      }
      if (rule.kind() == SelectionRule::Kind::partitioned_cyclic) {
        residual = sweep_residual;
        full = true;
        if (residual <= cfg.stop_tol) break;
      }
      active.assign(static_cast<size_t>(touched), 0);  // only the count is reported

      double V_trial = problem.value(x_next);
      bool reject = cfg.adaptive_tau && V_trial >= V && traj.tau_updates < cfg.tau_max_updates;
      MeritReport m;
      m.fixed_point_residual = residual;
      if (reject) {
        tau *= 2.0;
        ++traj.tau_updates;
        decrease_streak = 0;
        m.objective = V;
        m.relative_descent = 0.0;
        m.iterate_delta = 0.0;
      } else {
        m.objective = V_trial;
        m.relative_descent = (V - V_trial) / std::max(1.0, std::abs(V));
        m.iterate_delta = (x_next - x).norm();
        if (V_trial < V) ++decrease_streak;
        x = std::move(x_next);
        V = V_trial;
        if (cfg.progress_merit) merit_at_x = cfg.progress_merit(x);
        if (cfg.adaptive_tau && traj.tau_updates < cfg.tau_max_updates &&
            (decrease_streak >= cfg.tau_shrink_after ||
             (cfg.progress_merit && merit_at_x <= cfg.tau_shrink_threshold))) {
          tau /= 2.0;
          ++traj.tau_updates;
          decrease_streak = 0;
        }
        if (cfg.merit_step_rule)
          gamma_state *= 1.0 - std::min(1.0, cfg.merit_step_c / merit_at_x) *
                                   cfg.merit_step_theta * gamma_state;
        else if (!armijo && schedule.kind() != Schedule::Kind::constant)
          gamma_state = next_stepsize(schedule);
      }
      traj.merits.push_back(m);
      traj.stepsizes.push_back(gamma);
      traj.selected_counts.push_back(touched);
      if (cfg.progress_merit) traj.progress.push_back(merit_at_x);
      if (cfg.record_iterates) traj.iterates.push_back(x);
      ++traj.iterations;
      continue;
    }

    switch (rule.kind()) {
      case SelectionRule::Kind::all:
        active = everything;
        full = true;
        break;
      case SelectionRule::Kind::essentially_cyclic: {
        for (int i = k % rule.period(); i < n; i += rule.period()) active.push_back(i);
        break;
      }
      case SelectionRule::Kind::greedy: {
        compute_responses(family, x, eps_k, everything, cfg.workers, buf);
        Vec E = error_bound_default(problem.partition, x, buf.z);
        active = greedy_select(E, rule.rho());
        full = true;
        break;
      }
      case SelectionRule::Kind::random:
        active = rule.sampling().draw(n, gen);
        break;
      case SelectionRule::Kind::random_greedy: {
        std::vector<int> pool = rule.sampling().draw(n, gen);
        if (!pool.empty()) {
          compute_responses(family, x, eps_k, pool, cfg.workers, buf);
          Vec E = Vec::Constant(n, -std::numeric_limits<double>::infinity());
          for (int i : pool) E[i] = (buf.z[i] - problem.partition.block(x, i)).norm();
          double M = -std::numeric_limits<double>::infinity();
          for (int i : pool) M = std::max(M, E[i]);
          for (int i : pool)
            if (E[i] >= rule.rho() * M) active.push_back(i);
        }
        break;
      }
      default:
        throw std::logic_error("unreachable");
    }

    bool want_full = full || (cfg.check_every > 0 && k % cfg.check_every == 0);
    if (want_full) {
      compute_responses(family, x, eps_k, everything, cfg.workers, buf);
      residual = error_bound_default(problem.partition, x, buf.z).maxCoeff();
      full = true;
      if (residual <= cfg.stop_tol) break;
    } else {
      compute_responses(family, x, eps_k, active, cfg.workers, buf);
      double r = 0.0;
      for (int i : active) r = std::max(r, (buf.z[i] - problem.partition.block(x, i)).norm());
      residual = active.empty() ? std::numeric_limits<double>::quiet_NaN() : r;
    }

    if (inexact.descent_check && family.value) {
      double Gx = problem.G_value(x);
      for (int i : active) {
        double lhs = family.value(i, buf.z[i], x) + block_G_delta(problem, x, i, buf.z[i], Gx);
        if (lhs > 1e-10 * std::max(1.0, std::abs(V)))
          throw contract_violation("an accepted block response increased its model");
      }
    }

    Vec d = Vec::Zero(x.size());
    for (int i : active)
      problem.partition.block(d, i) = buf.z[i] - problem.partition.block(x, i);

    double gamma;
    if (armijo) {
      double g_dec = problem.grad_F(x).dot(d);
      double Gx = problem.G_value(x);
      for (int i : active) g_dec += block_G_delta(problem, x, i, buf.z[i], Gx);
      gamma = armijo_linesearch(problem, x, d, std::min(g_dec, 0.0), schedule.armijo_alpha(),
                                schedule.armijo_delta(), schedule.armijo_gamma0());
    } else {
      gamma = gamma_state;
    }
    if (!problem.separable_G && problem.eval_G) gamma = std::min(gamma, 1.0 / n);

    Vec x_next = x + gamma * d;
    double V_trial = problem.value(x_next);

    bool reject = cfg.adaptive_tau && V_trial >= V && traj.tau_updates < cfg.tau_max_updates;
    MeritReport m;
    m.fixed_point_residual = residual;
    if (reject) {
      tau *= 2.0;
      ++traj.tau_updates;
      decrease_streak = 0;
      m.objective = V;
      m.relative_descent = 0.0;
      m.iterate_delta = 0.0;
    } else {
      m.objective = V_trial;
      m.relative_descent = (V - V_trial) / std::max(1.0, std::abs(V));
      m.iterate_delta = (x_next - x).norm();
      if (V_trial < V) ++decrease_streak;
      x = std::move(x_next);
      V = V_trial;
      if (cfg.progress_merit) merit_at_x = cfg.progress_merit(x);
      if (cfg.adaptive_tau && traj.tau_updates < cfg.tau_max_updates &&
          (decrease_streak >= cfg.tau_shrink_after ||
           (cfg.progress_merit && merit_at_x <= cfg.tau_shrink_threshold))) {
        tau /= 2.0;
        ++traj.tau_updates;
        decrease_streak = 0;
      }
      if (cfg.merit_step_rule)
        gamma_state *=
            1.0 - std::min(1.0, cfg.merit_step_c / merit_at_x) * cfg.merit_step_theta * gamma_state;
      else if (!armijo && schedule.kind() != Schedule::Kind::constant)
        gamma_state = next_stepsize(schedule);
    }
    traj.merits.push_back(m);
    traj.stepsizes.push_back(gamma);
    traj.selected_counts.push_back(static_cast<int>(active.size()));
    if (cfg.progress_merit) traj.progress.push_back(merit_at_x);
    if (cfg.record_iterates) traj.iterates.push_back(x);
    ++traj.iterations;
  }

  traj.solution = x;
  return traj;
}

}  // namespace sca
