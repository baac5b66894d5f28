#include "sca/mm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sca {

namespace {

double relative_descent(double v_cur, double v_next) {
  return (v_cur - v_next) / std::max(1.0, std::abs(v_cur));
}

void check_sample(const ChainSample& c, double slack, const char* where) {
  if (c.value_next > c.surrogate_at_next + slack)
    throw contract_violation(std::string(where) + ": objective exceeds its surrogate");
  if (c.surrogate_at_next > c.value_current + slack)
    throw contract_violation(std::string(where) + ": surrogate failed to descend");
}

}  // namespace

MMTrajectory mm_minimize(const SurrogateSolver& solve, const SurrogateValue& surrogate,
                         const Objective& objective, const Vec& x0, const MMConfig& cfg) {
  if (!solve || !objective) throw std::invalid_argument("solver and objective are required");
  MMTrajectory traj;
  traj.iterates.push_back(x0);
  Vec x = x0;
  double v = objective(x);
  for (int k = 0; k < cfg.max_iters; ++k) {
    Vec xn = solve(x);
    double vn = objective(xn);
    if (surrogate) {
      ChainSample c{v, surrogate(xn, x), vn};
      if (cfg.check_chain) {
        double touch = surrogate(x, x);
        if (std::abs(touch - v) > cfg.chain_slack * std::max(1.0, std::abs(v)))
          throw contract_violation("surrogate does not touch the objective at the base point");
        check_sample(c, cfg.chain_slack, "mm step");
      }
      traj.chain.push_back(c);
    } else if (cfg.check_chain && vn > v + cfg.chain_slack) {
      throw contract_violation("mm step: objective increased");
    }
    MeritReport m;
    m.objective = vn;
    m.relative_descent = relative_descent(v, vn);
    m.iterate_delta = (xn - x).norm();
    m.fixed_point_residual = m.iterate_delta;
    traj.merits.push_back(m);
    traj.iterates.push_back(xn);
    ++traj.iterations;
    x = std::move(xn);
    double vprev = v;
    v = vn;
    if (relative_descent(vprev, vn) <= cfg.tol_relative_descent ||
        m.iterate_delta <= cfg.tol_iterate_delta)
      break;
  }
  return traj;
}

BlockRule BlockRule::cyclic(int period) {
  if (period < 1) throw std::invalid_argument("cyclic period must be positive");
  BlockRule r;
  r.kind_ = Kind::cyclic;
  r.period_ = period;
  return r;
}

BlockRule BlockRule::max_improvement() {
  BlockRule r;
  r.kind_ = Kind::max_improvement;
  return r;
}

BlockRule BlockRule::random(double p_min, unsigned seed) {
  if (!(p_min > 0.0)) throw std::invalid_argument("selection floor must be positive");
  BlockRule r;
  r.kind_ = Kind::random;
  r.p_min_ = p_min;
  r.seed_ = seed;
  return r;
}

BlockMMTrajectory block_mm_minimize(const BlockSurrogate& surrogate, const Objective& objective,
                                    const BlockPartition& partition, const Vec& x0,
                                    const BlockRule& rule, const MMConfig& cfg) {
  if (!surrogate.solve || !objective) throw std::invalid_argument("solver and objective are required");
  if (x0.size() != partition.total()) throw std::invalid_argument("start point does not fit the partition");
  const int n = partition.blocks();
  if (rule.kind() == BlockRule::Kind::cyclic && rule.period() < n)
    throw std::invalid_argument("cyclic period shorter than the block count cannot cover all blocks");
  if (rule.kind() == BlockRule::Kind::random && rule.p_min() > 1.0 / n)
    throw std::invalid_argument("uniform draws cannot honor a selection floor above 1/blocks");
  if (rule.kind() == BlockRule::Kind::max_improvement && !surrogate.value)
    throw std::invalid_argument("max improvement needs surrogate values to compare");

  BlockMMTrajectory traj;
  traj.iterates.push_back(x0);
  Vec x = x0;
  double v = objective(x);
  std::mt19937_64 gen(rule.seed());
  std::vector<char> settled(n, 0);  // blocks at their surrogate minimum since the last progress

  for (int k = 0; k < cfg.max_iters; ++k) {
    int pick = 0;
    Vec z;
    switch (rule.kind()) {
      case BlockRule::Kind::cyclic:
        pick = k % n;
        z = surrogate.solve(pick, x);
        break;
      case BlockRule::Kind::random: {
        std::uniform_int_distribution<int> d(0, n - 1);
        pick = d(gen);
        z = surrogate.solve(pick, x);
        break;
      }
      case BlockRule::Kind::max_improvement: {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
          Vec zi = surrogate.solve(i, x);
          double vi = surrogate.value(i, zi, x);
          if (vi < best) {
            best = vi;
            pick = i;
            z = std::move(zi);
          }
        }
        break;
      }
    }

    Vec xn = x;
    partition.block(xn, pick) = z;
    double vn = objective(xn);

    if (surrogate.value) {
      ChainSample c{v, surrogate.value(pick, z, x), vn};
      if (cfg.check_chain) {
        double touch = surrogate.value(pick, Vec(partition.block(x, pick)), x);
        if (std::abs(touch - v) > cfg.chain_slack * std::max(1.0, std::abs(v)))
          throw contract_violation("block surrogate does not touch the objective at the base point");
        check_sample(c, cfg.chain_slack, "block mm step");
      }
      traj.chain.push_back(c);
    } else if (cfg.check_chain && vn > v + cfg.chain_slack) {
      throw contract_violation("block mm step: objective increased");
    }

    MeritReport m;
    m.objective = vn;
    m.relative_descent = relative_descent(v, vn);
    m.iterate_delta = (xn - x).norm();
    m.fixed_point_residual = m.iterate_delta;
    traj.merits.push_back(m);
    traj.iterates.push_back(xn);
    traj.visited.push_back(pick);
    ++traj.iterations;
    x = std::move(xn);
    v = vn;

    bool small =
        m.relative_descent <= cfg.tol_relative_descent && m.iterate_delta <= cfg.tol_iterate_delta;
    if (small) {
      settled[pick] = 1;
    } else {
      std::fill(settled.begin(), settled.end(), 0);
      settled[pick] = 0;
    }
    // the best block making no progress means no block can; otherwise wait until
    // every block has been visited without progress
    if (small && rule.kind() == BlockRule::Kind::max_improvement) break;
    if (std::all_of(settled.begin(), settled.end(), [](char c) { return c != 0; })) break;
  }
  return traj;
}

// ---- sparse least squares ----

double sparse_ls_objective(const Mat& A, const Vec& z, double lambda, const DCPenalty& penalty,
                           const Vec& x) {
  double pen = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) pen += penalty.value(x[i]);
  return (z - A * x).squaredNorm() + lambda * pen;
}

MMTrajectory sparse_ls_mm(const Mat& A, const Vec& z, double lambda, const DCPenalty& penalty,
                          SparseLsVariant variant, const Vec& x0, const MMConfig& cfg) {
  if (A.rows() != z.size()) throw std::invalid_argument("data length must match the row count");
  if (A.cols() != x0.size()) throw std::invalid_argument("start point must match the column count");
  if (!(lambda >= 0.0)) throw std::invalid_argument("penalty weight must be nonnegative");
  // loss is the squared residual, so its gradient modulus is twice the top gram eigenvalue;
  // tiny inflation keeps the quadratic bound valid under power-iteration underestimation
  const double L = 2.0 * lambda_max_gram(A) * (1.0 + 1e-9);
  if (!(L > 0.0)) throw std::invalid_argument("zero matrix has no curvature to majorize");
  const double eta = penalty.eta();

  auto weights = [&](const Vec& y) {
    Vec w(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) w[i] = penalty.dg_minus(y[i]);
    return w;
  };
  auto step = [&](const Vec& y, const Vec& w) {
    Vec b = y - (2.0 / L) * (A.transpose() * (A * y - z)) + (lambda / L) * w;
    return soft_threshold(b, lambda * eta / L);
  };

  SurrogateSolver solve;
  SurrogateValue surrogate;
  auto objective = [&, A, z, lambda, penalty](const Vec& x) {
    return sparse_ls_objective(A, z, lambda, penalty, x);
  };
  auto dc_sum = [&, lambda, penalty](const Vec& x, const Vec& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += majorize_dc(penalty, x[i], y[i]);
    return lambda * s;
  };

  if (variant == SparseLsVariant::one_step) {
    solve = [&](const Vec& y) { return step(y, weights(y)); };
    // full quadratic model: loss linearized with curvature L plus the tangent penalty
    surrogate = [&](const Vec& x, const Vec& y) {
      Vec r = A * y - z;
      return r.squaredNorm() + 2.0 * r.dot(A * (x - y)) + (L / 2.0) * (x - y).squaredNorm() +
             dc_sum(x, y);
    };
  } else {
    solve = [&](const Vec& y) {
      Vec w = weights(y);
      Vec xr = y;
      for (int r = 0; r < cfg.inner_max_iters; ++r) {
        Vec xr1 = step(xr, w);
        double d = (xr1 - xr).norm();
        xr = std::move(xr1);
        if (d <= cfg.inner_tol) break;
      }
      return xr;
    };
    // loss kept exact, penalty replaced by its tangent majorizer
    surrogate = [&](const Vec& x, const Vec& y) {
      return (z - A * x).squaredNorm() + dc_sum(x, y);
    };
  }
  return mm_minimize(solve, surrogate, objective, x0, cfg);
}

// ---- nonnegative least squares ----

MMTrajectory nnls_mm(const Mat& A, const Vec& z, NnlsVariant variant, const Vec& x0,
                     const MMConfig& cfg) {
  if (A.rows() != z.size()) throw std::invalid_argument("data length must match the row count");
  if (A.cols() != x0.size()) throw std::invalid_argument("start point must match the column count");
  auto objective = [&A, &z](const Vec& x) { return 0.5 * (z - A * x).squaredNorm(); };

  if (variant == NnlsVariant::grad_proj) {
    const double lam = lambda_max_gram(A) * (1.0 + 1e-9);
    if (!(lam > 0.0)) throw std::invalid_argument("zero matrix has no curvature to majorize");
    SurrogateSolver solve = [&, lam](const Vec& y) {
      Vec g = A.transpose() * (A * y) - A.transpose() * z;
      return Vec((y - g / lam).cwiseMax(0.0));
    };
    SurrogateValue surrogate = [&, lam](const Vec& x, const Vec& y) {
      Vec g = A.transpose() * (A * y) - A.transpose() * z;
      return 0.5 * (z - A * y).squaredNorm() + g.dot(x - y) + (lam / 2.0) * (x - y).squaredNorm();
    };
    return mm_minimize(solve, surrogate, objective, x0, cfg);
  }

  // multiplicative updates need nonnegative data and a strictly positive start
  if ((A.array() < 0.0).any()) throw std::invalid_argument("multiplicative updates need A >= 0");
  if ((z.array() < 0.0).any() || z.isZero(0.0))
    throw std::invalid_argument("multiplicative updates need z >= 0 with some mass");
  if ((x0.array() <= 0.0).any())
    throw std::invalid_argument("multiplicative updates need a positive start");

  Vec atz = A.transpose() * z;
  SurrogateSolver solve = [&, atz](const Vec& y) {
    Vec ky = A.transpose() * (A * y);
    Vec xn(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
      xn[i] = ky[i] > 0.0 ? y[i] * atz[i] / ky[i] : y[i];
    return xn;
  };
  // separable quadratic bound on the gram form; exact at x = y for positive y
  SurrogateValue surrogate = [&, atz](const Vec& x, const Vec& y) {
    Vec ky = A.transpose() * (A * y);
    double q = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] > 0.0)
        q += ky[i] * x[i] * x[i] / y[i];
      // a zero coordinate stays zero under the update, contributing nothing
    }
    return 0.5 * q - atz.dot(x) + 0.5 * z.squaredNorm();
  };
  return mm_minimize(solve, surrogate, objective, x0, cfg);
}

// ---- matrix completion ----

Mat singular_value_threshold(const Mat& X, double lambda_r, double eta, const Vec& w) {
  if (X.rows() > X.cols())
    throw std::invalid_argument("spectral threshold expects rows <= cols");
  if (w.size() != X.rows()) throw std::invalid_argument("one weight per singular value");
  if (!(lambda_r >= 0.0) || !(eta >= 0.0))
    throw std::invalid_argument("threshold parameters must be nonnegative");
  if ((w.array() < 0.0).any()) throw std::invalid_argument("weights must be nonnegative");
  if (lambda_r == 0.0) return X;
  Eigen::JacobiSVD<Mat> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vec s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i)
    s[i] = std::max(s[i] + w[i] * lambda_r / 2.0 - eta * lambda_r / 2.0, 0.0);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

double matcomp_objective(const MatCompProblem& p, const MatCompState& st) {
  double data = 0.0, pen_s = 0.0;
  for (Eigen::Index i = 0; i < p.Y.rows(); ++i)
    for (Eigen::Index j = 0; j < p.Y.cols(); ++j) {
      if (p.observed(i, j)) {
        double r = p.Y(i, j) - st.L(i, j) - st.S(i, j);
        data += r * r;
      }
      pen_s += p.entry_penalty.value(st.S(i, j));
    }
  Eigen::JacobiSVD<Mat> svd(st.L);
  double pen_r = 0.0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    pen_r += p.spectral_penalty.value(svd.singularValues()[i]);
  return data + p.lambda_s * pen_s + p.lambda_r * pen_r;
}

MatCompTrajectory matcomp_block_mm(const MatCompProblem& p, const MatCompState& init,
                                   const MMConfig& cfg) {
  if (p.Y.rows() > p.Y.cols())
    throw std::invalid_argument("store the data with rows <= cols");
  if (init.L.rows() != p.Y.rows() || init.L.cols() != p.Y.cols() ||
      init.S.rows() != p.Y.rows() || init.S.cols() != p.Y.cols())
    throw std::invalid_argument("state blocks must match the data shape");
  if (p.observed.rows() != p.Y.rows() || p.observed.cols() != p.Y.cols())
    throw std::invalid_argument("mask must match the data shape");

  const double eta_s = p.entry_penalty.eta();
  const double eta_r = p.spectral_penalty.eta();
  MatCompTrajectory traj;
  traj.state = init;
  double v = matcomp_objective(p, traj.state);
  traj.objectives.push_back(v);

  auto spectral_sum = [&](const Mat& L) {
    Eigen::JacobiSVD<Mat> svd(L);
    double s = 0.0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      s += p.spectral_penalty.value(svd.singularValues()[i]);
    return p.lambda_r * s;
  };
  auto entry_sum = [&](const Mat& S) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < S.rows(); ++i)
      for (Eigen::Index j = 0; j < S.cols(); ++j) s += p.entry_penalty.value(S(i, j));
    return p.lambda_s * s;
  };

  for (int k = 0; k < cfg.max_iters; ++k) {
    Mat& L = traj.state.L;
    Mat& S = traj.state.S;

    // outlier block: entrywise threshold of the residual completed by the old outliers
    Mat Yt(S.rows(), S.cols());
    for (Eigen::Index i = 0; i < S.rows(); ++i)
      for (Eigen::Index j = 0; j < S.cols(); ++j)
        Yt(i, j) = p.observed(i, j) ? p.Y(i, j) - L(i, j) : S(i, j);
    Mat Sn(S.rows(), S.cols());
    double tangent_s = 0.0;  // tangent majorizer of the entry penalty at the new point
    for (Eigen::Index i = 0; i < S.rows(); ++i)
      for (Eigen::Index j = 0; j < S.cols(); ++j) {
        double w = p.entry_penalty.dg_minus(S(i, j));
        Sn(i, j) = soft_threshold(Yt(i, j) + p.lambda_s * w / 2.0, p.lambda_s * eta_s / 2.0);
        tangent_s += majorize_dc(p.entry_penalty, Sn(i, j), S(i, j));
      }
    MatCompState after_s{L, Sn};
    double v_s = matcomp_objective(p, after_s);
    double surr_s = (Sn - Yt).squaredNorm() + p.lambda_s * tangent_s + spectral_sum(L);
    ChainSample cs{v, surr_s, v_s};
    if (cfg.check_chain) check_sample(cs, cfg.chain_slack, "outlier block");
    traj.chain.push_back(cs);

    // low-rank block: spectral threshold of the residual completed by the old low-rank part
    Eigen::JacobiSVD<Mat> svdL(L);
    Vec sigL = svdL.singularValues();
    Vec w_r(sigL.size());
    double tangent_base = 0.0;  // constant part of the spectral tangent majorizer
    for (Eigen::Index i = 0; i < sigL.size(); ++i) {
      w_r[i] = p.spectral_penalty.dg_minus(sigL[i]);
      tangent_base += w_r[i] * sigL[i] - p.spectral_penalty.g_minus(sigL[i]);
    }
    Mat X(L.rows(), L.cols());
    for (Eigen::Index i = 0; i < L.rows(); ++i)
      for (Eigen::Index j = 0; j < L.cols(); ++j)
        X(i, j) = p.observed(i, j) ? p.Y(i, j) - Sn(i, j) : L(i, j);
    Mat Ln = singular_value_threshold(X, p.lambda_r, eta_r, w_r);
    MatCompState after_l{Ln, Sn};
    double v_l = matcomp_objective(p, after_l);
    Eigen::JacobiSVD<Mat> svdLn(Ln);
    double lin = 0.0;
    for (Eigen::Index i = 0; i < svdLn.singularValues().size(); ++i)
      lin += (eta_r - w_r[i]) * svdLn.singularValues()[i];
    double surr_l =
        (Ln - X).squaredNorm() + p.lambda_r * (lin + tangent_base) + entry_sum(Sn);
    ChainSample cl{v_s, surr_l, v_l};
    if (cfg.check_chain) check_sample(cl, cfg.chain_slack, "low-rank block");
    traj.chain.push_back(cl);

    double delta = std::sqrt((Ln - L).squaredNorm() + (Sn - S).squaredNorm());
    traj.state = after_l;
    traj.objectives.push_back(v_l);
    ++traj.iterations;
    double rd = relative_descent(v, v_l);
    v = v_l;
    if (rd <= cfg.tol_relative_descent || delta <= cfg.tol_iterate_delta) break;
  }
  return traj;
}

// ---- dictionary learning ----

DictConstraint DictConstraint::frobenius_ball(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("ball size must be positive");
  DictConstraint c;
  c.kind_ = Kind::frobenius_ball;
  c.alpha_ = alpha;
  return c;
}

DictConstraint DictConstraint::per_column_ball(const Vec& alphas) {
  if ((alphas.array() <= 0.0).any())
    throw std::invalid_argument("column ball sizes must be positive");
  DictConstraint c;
  c.kind_ = Kind::per_column_ball;
  c.alphas_ = alphas;
  return c;
}

DictConstraint DictConstraint::nonneg() {
  DictConstraint c;
  c.kind_ = Kind::nonneg;
  return c;
}

Mat DictConstraint::project(const Mat& D) const {
  switch (kind_) {
    case Kind::frobenius_ball: {
      double n2 = D.squaredNorm();
      if (n2 <= alpha_) return D;
      return D * std::sqrt(alpha_ / n2);
    }
    case Kind::per_column_ball: {
      if (alphas_.size() != D.cols())
        throw std::invalid_argument("one ball size per dictionary column");
      Mat out = D;
      for (Eigen::Index j = 0; j < D.cols(); ++j) {
        double n2 = out.col(j).squaredNorm();
        if (n2 > alphas_[j]) out.col(j) *= std::sqrt(alphas_[j] / n2);
      }
      return out;
    }
    case Kind::nonneg:
      return D.cwiseMax(0.0);
  }
  throw std::logic_error("unreachable");
}

double dict_learn_objective(const Mat& Y, const Mat& D, const Mat& X, double lambda_s,
                            const DCPenalty& penalty) {
  double pen = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) pen += penalty.value(X(i, j));
  return 0.5 * (Y - D * X).squaredNorm() + lambda_s * pen;
}

DictLearnResult dictionary_learning_mm(const Mat& Y, double lambda_s, const DCPenalty& penalty,
                                       const DictConstraint& constraint, const Mat& D0,
                                       const Mat& X0, const MMConfig& cfg) {
  if (D0.rows() != Y.rows() || X0.cols() != Y.cols() || D0.cols() != X0.rows())
    throw std::invalid_argument("factor shapes must compose to the data shape");
  const double eta = penalty.eta();
  DictLearnResult out;
  out.D = D0;
  out.X = X0;
  double v = dict_learn_objective(Y, out.D, out.X, lambda_s, penalty);
  out.objectives.push_back(v);

  auto pen_sum = [&](const Mat& X) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index j = 0; j < X.cols(); ++j) s += penalty.value(X(i, j));
    return lambda_s * s;
  };

  for (int k = 0; k < cfg.max_iters; ++k) {
    Mat G = out.X * out.X.transpose();
    Mat M = Y * out.X.transpose();
    Mat Dn;
    double surr_d = 0.0;
    bool exact_d = false;

    if (constraint.kind() == DictConstraint::Kind::frobenius_ball) {
      Eigen::SelfAdjointEigenSolver<Mat> es(G);
      Vec lam = es.eigenvalues();
      double lmax = lam.size() ? lam.maxCoeff() : 0.0;
      bool singular = lam.size() == 0 || lam.minCoeff() <= 1e-12 * std::max(1.0, lmax);
      if (!singular) {
        Mat MQ = M * es.eigenvectors();
        Vec col2(lam.size());
        for (Eigen::Index j = 0; j < lam.size(); ++j) col2[j] = MQ.col(j).squaredNorm();
        auto norm2_at = [&](double mu) {
          double s = 0.0;
          for (Eigen::Index j = 0; j < lam.size(); ++j) {
            double d = lam[j] + mu;
            s += col2[j] / (d * d);
          }
          return s;
        };
        auto build = [&](double mu) {
          Mat C = MQ;
          for (Eigen::Index j = 0; j < lam.size(); ++j) C.col(j) /= (lam[j] + mu);
          return Mat(C * es.eigenvectors().transpose());
        };
        double mu = 0.0;
        if (norm2_at(0.0) > constraint.alpha() + 1e-12) {
          double lo = 0.0, hi = 1.0;
          while (norm2_at(hi) > constraint.alpha()) hi *= 2.0;
          for (int it = 0; it < 500; ++it) {
            mu = 0.5 * (lo + hi);
            double h = constraint.alpha() - norm2_at(mu);
            if (std::abs(h) <= 1e-10) break;
            (h > 0.0 ? hi : lo) = mu;
          }
        }
        Dn = build(mu);
        exact_d = true;
      }
    }
    if (!exact_d) {
      // gram-singular or non-ball constraints: one projected curvature-bounded step
      double Ld = lambda_max_sym(G) * (1.0 + 1e-9);
      if (!(Ld > 0.0)) Ld = 1.0;
      Mat grad = out.D * G - M;
      Dn = constraint.project(out.D - grad / Ld);
      surr_d = 0.5 * (Y - out.D * out.X).squaredNorm() + (grad.array() * (Dn - out.D).array()).sum() +
               (Ld / 2.0) * (Dn - out.D).squaredNorm() + pen_sum(out.X);
    }
    double v_d = dict_learn_objective(Y, Dn, out.X, lambda_s, penalty);
    if (exact_d) surr_d = v_d;  // the block was solved exactly, the model is the objective itself
    ChainSample cd{v, surr_d, v_d};
    if (cfg.check_chain) check_sample(cd, cfg.chain_slack, "dictionary block");
    out.chain.push_back(cd);

    // code block: one thresholded curvature-bounded step per column
    double Lx = lambda_max_sym(Dn.transpose() * Dn) * (1.0 + 1e-9);
    if (!(Lx > 0.0)) Lx = 1.0;
    Mat Xn(out.X.rows(), out.X.cols());
    double lin_term = 0.0, tangent = 0.0;
    Mat R = Dn * out.X - Y;
    Mat Gx = Dn.transpose() * R;  // per-column gradients of the half squared residual
    for (Eigen::Index j = 0; j < out.X.cols(); ++j) {
      for (Eigen::Index i = 0; i < out.X.rows(); ++i) {
        double w = penalty.dg_minus(out.X(i, j));
        double b = out.X(i, j) - Gx(i, j) / Lx + lambda_s * w / Lx;
        Xn(i, j) = soft_threshold(b, lambda_s * eta / Lx);
        tangent += majorize_dc(penalty, Xn(i, j), out.X(i, j));
      }
    }
    lin_term = (Gx.array() * (Xn - out.X).array()).sum();
    double v_x = dict_learn_objective(Y, Dn, Xn, lambda_s, penalty);
    double surr_x = 0.5 * R.squaredNorm() + lin_term + (Lx / 2.0) * (Xn - out.X).squaredNorm() +
                    lambda_s * tangent;
    ChainSample cx{v_d, surr_x, v_x};
    if (cfg.check_chain) check_sample(cx, cfg.chain_slack, "code block");
    out.chain.push_back(cx);

    double delta = std::sqrt((Dn - out.D).squaredNorm() + (Xn - out.X).squaredNorm());
    out.D = std::move(Dn);
    out.X = std::move(Xn);
    out.objectives.push_back(v_x);
    ++out.iterations;
    double rd = relative_descent(v, v_x);
    v = v_x;
    if (rd <= cfg.tol_relative_descent || delta <= cfg.tol_iterate_delta) break;
  }
  return out;
}

}  // namespace sca
