#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "branchtail/asymptotics.hpp"
#include "branchtail/distributions.hpp"
#include "branchtail/fitting.hpp"

namespace branchtail {

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

struct PhiOptions {
  double base_lambda = 1e-5;  // see note below
  int depth_cap = 4096;
};
// Note: a second-order base expansion at lambda' carries an O(lambda'^3)
// error that the upward recursion amplifies by roughly lambda*/lambda'
// (lambda* = O(1)). 1e-5 keeps the propagated error near 1e-10, small
// enough that halving the base point moves nothing above 1e-8.

namespace detail {

struct PhiResult {
  double log_phi = 0.0;
  int depth = 0;
};

// log E exp(-lambda W) via the generating-function fixed point
//   phi(lambda) = f(phi(lambda/m)),
// iterated upward from a base point lambda' <= base_lambda where the
// second-order expansion phi ~ 1 - l' + (EW^2/2) l'^2 is accurate
// (E W^2 = 1 + sigma^2/(m^2-m)). Every iterate is carried in log domain
// through the minimal-support factored map, so values survive the
// double-exponential decay of the gamma >= 2 regime.
inline PhiResult log_phi_W_impl(const OffspringSpec& off, double lambda,
                                const PhiOptions& opt) {
  if (!(lambda > 0.0)) throw std::domain_error("phi_W: lambda must be positive");
  if (!(opt.base_lambda > 0.0)) throw std::domain_error("phi_W: base_lambda must be positive");
  const double logm = std::log(off.m);
  int n = 0;
  if (lambda > opt.base_lambda) {
    n = int(std::ceil(std::log(lambda / opt.base_lambda) / logm - 1e-12));
    if (n < 0) n = 0;
  }
  if (n > opt.depth_cap)
    throw NumericalError("phi_W: recursion depth " + std::to_string(n) +
                         " exceeds depth cap " + std::to_string(opt.depth_cap));
  const double lam0 = lambda / std::pow(off.m, double(n));
  double x;
  if (std::isfinite(off.variance)) {
    const double ew2 = 1.0 + off.variance / (off.m * off.m - off.m);
    x = -lam0 + 0.5 * ew2 * lam0 * lam0;
  } else {
    x = -lam0;  // first-order fallback
  }
  double L = std::log1p(x);
  for (int i = 0; i < n; ++i) L = off.pmf.log_pgf_of_log(L);
  if (L > 0.0) L = 0.0;
  return {L, n};
}

}  // namespace detail

inline double log_phi_W(const OffspringSpec& off, double lambda, const PhiOptions& opt = {}) {
  return detail::log_phi_W_impl(off, lambda, opt).log_phi;
}

struct PhiCurlyOptions {
  double tol = 1e-15;  // stop once 1 - h(phi(lambda m^-N)) < tol
  PhiOptions phi;
  int max_terms = 200000;
};

namespace detail {

struct PhiCurlyResult {
  double log_phi = 0.0;
  int depth = 0;  // deepest phi recursion (the i = 0 factor)
  int terms = 0;
};

// log E exp(-lambda curlyW) = sum_{i>=0} log h(phi(lambda m^-i)),
// one factor per immigration generation. The discarded tail after N terms is
// bounded through 1 - h(s) <= EY (1 - s) <= EY * lambda m^-N.
inline PhiCurlyResult log_phi_curlyW_impl(const OffspringSpec& off, const ImmigrationSpec& imm,
                                          double lambda, const PhiCurlyOptions& opt) {
  if (!(lambda > 0.0)) throw std::domain_error("phi_curlyW: lambda must be positive");
  PhiCurlyResult out;
  if (imm.q0 >= 1.0) return out;  // no immigrants ever: Phi == 1
  double lam = lambda;
  double total = 0.0;
  for (int i = 0; i < opt.max_terms; ++i) {
    const PhiResult p = log_phi_W_impl(off, lam, opt.phi);
    if (i == 0) out.depth = p.depth;
    const double log_h = imm.pmf.log_pgf_of_log(p.log_phi);
    total += log_h;
    out.terms = i + 1;
    if (-std::expm1(log_h) < opt.tol) break;  // 1 - h(phi) below tolerance
    lam /= off.m;
  }
  out.log_phi = total > 0.0 ? 0.0 : total;
  return out;
}

}  // namespace detail

inline double log_phi_curlyW(const OffspringSpec& off, const ImmigrationSpec& imm,
                             double lambda, const PhiCurlyOptions& opt = {}) {
  return detail::log_phi_curlyW_impl(off, imm, lambda, opt).log_phi;
}

// log E exp(-lambda tildeW): the single-ancestor limit W + curlyW/m splits
// into independent factors.
inline double log_phi_tildeW(const OffspringSpec& off, const ImmigrationSpec& imm,
                             double lambda, const PhiCurlyOptions& opt = {}) {
  return log_phi_W(off, lambda, opt.phi) + log_phi_curlyW(off, imm, lambda / off.m, opt);
}

struct LaplaceCurve {
  std::vector<double> lambdas;     // increasing
  std::vector<double> log_values;  // <= 0
  std::vector<int> depths;
  std::vector<int> terms;  // product terms (0 for a plain phi curve)
  struct Meta {
    std::string spec_digest;
    double base_lambda = 0.0;
    double tol = 0.0;
  } meta;
};

inline std::vector<double> log_spaced_grid(double lo, double hi, int points) {
  if (!(lo > 0.0 && hi > lo) || points < 2)
    throw std::invalid_argument("log_spaced_grid: need 0 < lo < hi and >= 2 points");
  std::vector<double> g(points);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < points; ++i)
    g[i] = std::exp(a + (b - a) * double(i) / double(points - 1));
  return g;
}

inline LaplaceCurve phi_W_curve(const OffspringSpec& off, std::vector<double> lambdas,
                                const PhiOptions& opt = {}) {
  LaplaceCurve c;
  c.lambdas = std::move(lambdas);
  c.meta.spec_digest = "offspring=" + off.pmf.to_string();
  c.meta.base_lambda = opt.base_lambda;
  for (double lam : c.lambdas) {
    const detail::PhiResult p = detail::log_phi_W_impl(off, lam, opt);
    c.log_values.push_back(p.log_phi);
    c.depths.push_back(p.depth);
    c.terms.push_back(0);
  }
  return c;
}

inline LaplaceCurve phi_curlyW_curve(const OffspringSpec& off, const ImmigrationSpec& imm,
                                     std::vector<double> lambdas,
                                     const PhiCurlyOptions& opt = {}) {
  LaplaceCurve c;
  c.lambdas = std::move(lambdas);
  c.meta.spec_digest =
      "offspring=" + off.pmf.to_string() + " immigration=" + imm.pmf.to_string();
  c.meta.base_lambda = opt.phi.base_lambda;
  c.meta.tol = opt.tol;
  for (double lam : c.lambdas) {
    const detail::PhiCurlyResult p = detail::log_phi_curlyW_impl(off, imm, lam, opt);
    c.log_values.push_back(p.log_phi);
    c.depths.push_back(p.depth);
    c.terms.push_back(p.terms);
  }
  return c;
}

inline LaplaceCurve phi_tildeW_curve(const OffspringSpec& off, const ImmigrationSpec& imm,
                                     std::vector<double> lambdas,
                                     const PhiCurlyOptions& opt = {}) {
  LaplaceCurve c;
  c.lambdas = std::move(lambdas);
  c.meta.spec_digest = "offspring=" + off.pmf.to_string() +
                       " immigration=" + imm.pmf.to_string() + " variant=tildeW";
  c.meta.base_lambda = opt.phi.base_lambda;
  c.meta.tol = opt.tol;
  for (double lam : c.lambdas) {
    const detail::PhiResult pw = detail::log_phi_W_impl(off, lam, opt.phi);
    const detail::PhiCurlyResult pc =
        detail::log_phi_curlyW_impl(off, imm, lam / off.m, opt);
    c.log_values.push_back(pw.log_phi + pc.log_phi);
    c.depths.push_back(pw.depth);
    c.terms.push_back(pc.terms);
  }
  return c;
}

// Tail/transform rate correspondence:
//   log P(V <= t) <= -C t^-alpha |log t|^theta
// maps to
//   log E e^(-lambda V) <= -C' lambda^(alpha/(1+alpha)) (log lambda)^(theta/(1+alpha)).
// Admissible: alpha > 0 with any theta, or alpha = 0 with theta > 0.
struct TauberianRate {
  double alpha = 0.0;
  double theta = 0.0;
  double lt_alpha = 0.0;  // alpha/(1+alpha), in [0,1)
  double lt_theta = 0.0;  // theta/(1+alpha)
};

inline TauberianRate tauberian_convert(double alpha, double theta) {
  if (!(alpha > 0.0 || (alpha == 0.0 && theta > 0.0)))
    throw std::domain_error("tauberian_convert: need alpha > 0, or alpha = 0 with theta > 0");
  TauberianRate r;
  r.alpha = alpha;
  r.theta = theta;
  r.lt_alpha = alpha / (1.0 + alpha);
  r.lt_theta = theta / (1.0 + alpha);
  return r;
}

enum class LtModel { power, logsq, stretched };

struct LtFit {
  double coefficient = 0.0;
  double exponent = 0.0;
  double r2 = 0.0;
};

// Rate extraction from a transform curve. power: slope of log phi against
// log lambda (negative). logsq: coefficient c of log Phi = -c (log lambda)^2
// + b log lambda + a. stretched: slope of log(-log phi) against log lambda.
inline LtFit fit_lt_rate(const LaplaceCurve& curve, LtModel model) {
  const std::size_t n = curve.lambdas.size();
  if (n < 3) throw std::invalid_argument("fit_lt_rate: need >= 3 points");
  if (std::log10(curve.lambdas.back() / curve.lambdas.front()) < 3.0 - 1e-9)
    throw std::invalid_argument("fit_lt_rate: curve must span >= 3 decades");
  bool all_zero = true;
  for (double v : curve.log_values)
    if (v != 0.0) all_zero = false;
  if (all_zero) throw std::invalid_argument("fit_lt_rate: degenerate curve (all zeros)");

  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::log(curve.lambdas[i]);

  LtFit out;
  switch (model) {
    case LtModel::power: {
      for (std::size_t i = 0; i < n; ++i) y[i] = curve.log_values[i];
      const detail::LineFit f = detail::fit_line(x, y);
      out.exponent = f.slope;
      out.coefficient = std::exp(f.intercept);
      out.r2 = f.r2;
      break;
    }
    case LtModel::logsq: {
      for (std::size_t i = 0; i < n; ++i) y[i] = curve.log_values[i];
      const detail::QuadFit f = detail::fit_quadratic(x, y);
      out.coefficient = -f.c2;
      out.exponent = 2.0;
      out.r2 = f.r2;
      break;
    }
    case LtModel::stretched: {
      for (std::size_t i = 0; i < n; ++i) {
        if (!(curve.log_values[i] < 0.0))
          throw std::invalid_argument("fit_lt_rate: stretched model needs log phi < 0");
        y[i] = std::log(-curve.log_values[i]);
      }
      const detail::LineFit f = detail::fit_line(x, y);
      out.exponent = f.slope;
      out.coefficient = std::exp(f.intercept);
      out.r2 = f.r2;
      break;
    }
  }
  return out;
}

}  // namespace branchtail
