#pragma once

#include "sca/core.hpp"

#include <cmath>

namespace sca {

// even, nondecreasing-in-|x| sparsity penalties with g(0) = 0, normalized so
// g -> 1 pointwise away from 0 as theta grows, each written as the difference
// eta(theta)*|x| - g_minus(x) with g_minus convex
class DCPenalty {
 public:
  enum class Kind { exp, lp_plus, lp_minus, scad, log };

  static DCPenalty exp_kind(double theta);
  // exponent is 1/theta, so theta > 1 keeps the power below one
  static DCPenalty lp_plus(double theta, double eps);
  static DCPenalty lp_minus(double theta, double p);
  static DCPenalty scad(double theta, double a = 3.7);
  static DCPenalty log_kind(double theta);

  Kind kind() const { return kind_; }
  double theta() const { return theta_; }
  double eps() const { return eps_; }
  double p() const { return p_; }
  double a() const { return a_; }

  double value(double x) const;
  // slope of the convex |x| part of the decomposition
  double eta() const;
  // derivative of the convex remainder g_minus = eta*|x| - g; 0 at x = 0
  double dg_minus(double x) const;
  double g_minus(double x) const { return eta() * std::abs(x) - value(x); }

 private:
  DCPenalty() = default;
  Kind kind_ = Kind::exp;
  double theta_ = 1.0, eps_ = 0.0, p_ = 0.0, a_ = 0.0;
};

double penalty_value(const DCPenalty& g, double x);
double penalty_eta(const DCPenalty& g);

// tangent majorizer from the convex decomposition; touches g at y
double majorize_dc(const DCPenalty& g, double x, double y);

// weighted-l1 reweighting coefficients: slope * |x| with the additive tangent
// constant dropped, so the value at y sits below g(y); log and lp_plus only
double majorize_concave_adhoc(const DCPenalty& g, double x, double y);

}  // namespace sca
