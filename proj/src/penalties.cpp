#include "sca/penalties.hpp"

#include <cmath>

namespace sca {

DCPenalty DCPenalty::exp_kind(double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("exp penalty needs theta > 0");
  DCPenalty g;
  g.kind_ = Kind::exp;
  g.theta_ = theta;
  return g;
}

DCPenalty DCPenalty::lp_plus(double theta, double eps) {
  if (!(theta > 1.0)) throw std::invalid_argument("lp_plus needs theta > 1");
  if (!(eps > 0.0)) throw std::invalid_argument("lp_plus needs eps > 0");
  DCPenalty g;
  g.kind_ = Kind::lp_plus;
  g.theta_ = theta;
  g.eps_ = eps;
  return g;
}

DCPenalty DCPenalty::lp_minus(double theta, double p) {
  if (!(theta > 0.0)) throw std::invalid_argument("lp_minus needs theta > 0");
  if (!(p < 0.0)) throw std::invalid_argument("lp_minus needs p < 0");
  DCPenalty g;
  g.kind_ = Kind::lp_minus;
  g.theta_ = theta;
  g.p_ = p;
  return g;
}

DCPenalty DCPenalty::scad(double theta, double a) {
  if (!(theta > 0.0)) throw std::invalid_argument("scad needs theta > 0");
  if (!(a > 1.0)) throw std::invalid_argument("scad needs a > 1");
  DCPenalty g;
  g.kind_ = Kind::scad;
  g.theta_ = theta;
  g.a_ = a;
  return g;
}

DCPenalty DCPenalty::log_kind(double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("log penalty needs theta > 0");
  DCPenalty g;
  g.kind_ = Kind::log;
  g.theta_ = theta;
  return g;
}

double DCPenalty::value(double x) const {
  double u = std::abs(x);
  switch (kind_) {
    case Kind::exp:
      return 1.0 - std::exp(-theta_ * u);
    case Kind::lp_plus:
      // shifted so the value at 0 is exactly 0
      return std::pow(u + eps_, 1.0 / theta_) - std::pow(eps_, 1.0 / theta_);
    case Kind::lp_minus:
      return 1.0 - std::pow(theta_ * u + 1.0, p_);
    case Kind::scad: {
      double t1 = 1.0 / theta_, t2 = a_ / theta_;
      if (u <= t1) return 2.0 * theta_ * u / (a_ + 1.0);
      if (u <= t2)
        return (-theta_ * theta_ * u * u + 2.0 * a_ * theta_ * u - 1.0) / (a_ * a_ - 1.0);
      return 1.0;
    }
    case Kind::log:
      return std::log1p(theta_ * u) / std::log1p(theta_);
  }
  throw std::logic_error("unreachable");
}

double DCPenalty::eta() const {
  switch (kind_) {
    case Kind::exp:
      return theta_;
    case Kind::lp_plus:
      return (1.0 / theta_) * std::pow(eps_, 1.0 / theta_ - 1.0);
    case Kind::lp_minus:
      return -p_ * theta_;
    case Kind::scad:
      return 2.0 * theta_ / (a_ + 1.0);
    case Kind::log:
      return theta_ / std::log1p(theta_);
  }
  throw std::logic_error("unreachable");
}

double DCPenalty::dg_minus(double x) const {
  if (x == 0.0) return 0.0;
  double s = x > 0.0 ? 1.0 : -1.0;
  double u = std::abs(x);
  switch (kind_) {
    case Kind::exp:
      return s * theta_ * (1.0 - std::exp(-theta_ * u));
    case Kind::lp_plus:
      return s * (1.0 / theta_) *
             (std::pow(eps_, 1.0 / theta_ - 1.0) - std::pow(u + eps_, 1.0 / theta_ - 1.0));
    case Kind::lp_minus:
      return s * (-p_) * theta_ * (1.0 - std::pow(1.0 + theta_ * u, p_ - 1.0));
    case Kind::scad: {
      double t1 = 1.0 / theta_, t2 = a_ / theta_;
      if (u <= t1) return 0.0;
      if (u <= t2) return s * 2.0 * theta_ * (theta_ * u - 1.0) / (a_ * a_ - 1.0);
      return s * 2.0 * theta_ / (a_ + 1.0);
    }
    case Kind::log:
      return s * theta_ * theta_ * u / (std::log1p(theta_) * (1.0 + theta_ * u));
  }
  throw std::logic_error("unreachable");
}

double penalty_value(const DCPenalty& g, double x) { return g.value(x); }

double penalty_eta(const DCPenalty& g) { return g.eta(); }

double majorize_dc(const DCPenalty& g, double x, double y) {
  // eta|x| minus the tangent of the convex part at y; equals g(y) at x = y
  return g.eta() * std::abs(x) - g.dg_minus(y) * (x - y) - g.g_minus(y);
}

double majorize_concave_adhoc(const DCPenalty& g, double x, double y) {
  double u = std::abs(x), v = std::abs(y);
  switch (g.kind()) {
    case DCPenalty::Kind::log:
      return (g.theta() / std::log1p(g.theta())) * u / (1.0 + g.theta() * v);
    case DCPenalty::Kind::lp_plus:
      return (1.0 / g.theta()) * std::pow(v + g.eps(), 1.0 / g.theta() - 1.0) * u;
    default:
      throw std::invalid_argument("reweighting coefficients exist for log and lp_plus only");
  }
}

}  // namespace sca
