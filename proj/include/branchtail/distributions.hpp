#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "branchtail/pmf.hpp"

namespace branchtail {

class NotSupercriticalError : public std::runtime_error {
 public:
  explicit NotSupercriticalError(const std::string& what) : std::runtime_error(what) {}
};

class UnsupportedRepresentationError : public std::runtime_error {
 public:
  explicit UnsupportedRepresentationError(const std::string& what)
      : std::runtime_error(what) {}
};

// Offspring law of a supercritical process: mean m > 1 enforced on construction.
struct OffspringSpec {
  Pmf pmf;
  double m = 0.0;            // mean offspring count
  std::uint64_t gamma = 0;   // min{k : p_k > 0}
  double p0 = 0.0;
  double p1 = 0.0;
  double variance = 0.0;     // +inf marker allowed, never produced by these families

  static OffspringSpec from_pmf(Pmf pmf) {
    OffspringSpec s;
    s.m = pmf.mean();
    if (!(s.m > 1.0))
      throw NotSupercriticalError("offspring mean m = " + std::to_string(s.m) +
                                  " <= 1: process is not supercritical");
    s.gamma = pmf.min_support();
    s.p0 = pmf.mass_at(0);
    s.p1 = pmf.mass_at(1);
    s.variance = pmf.variance();
    s.pmf = std::move(pmf);
    return s;
  }
};

struct ImmigrationSpec {
  Pmf pmf;
  std::uint64_t K = 0;  // min{k : q_k > 0}
  double q0 = 0.0;
  double mean_y = 0.0;

  static ImmigrationSpec from_pmf(Pmf pmf) {
    ImmigrationSpec s;
    s.K = pmf.min_support();
    s.q0 = pmf.mass_at(0);
    s.mean_y = pmf.mean();
    s.pmf = std::move(pmf);
    return s;
  }
};

struct LogMomentReport {
  bool ok = false;
  double e_xlogx = 0.0;  // E[X log+ X]
  double e_logy = 0.0;   // E[log+ Y]
  std::string message;
};

// Moment conditions for a nondegenerate finite limit. Finite-support and
// fractional-linear laws always satisfy them; the only rejection is a
// non-supercritical offspring mean.
inline LogMomentReport validate_log_moments(const Pmf& offspring, const Pmf& immigration) {
  LogMomentReport r;
  const double m = offspring.mean();
  if (!(m > 1.0)) {
    r.ok = false;
    r.message = "offspring mean m = " + std::to_string(m) + " <= 1: not supercritical";
    return r;
  }
  r.e_xlogx = offspring.mean_klogk();
  r.e_logy = immigration.mean_logplus();
  r.ok = true;
  r.message = "ok";
  return r;
}

inline LogMomentReport validate_log_moments(const OffspringSpec& off,
                                            const ImmigrationSpec& imm) {
  return validate_log_moments(off.pmf, imm.pmf);
}

// Unique root of f(s) = s in [0,1). Returns 0 exactly when p0 = 0; otherwise
// bisection on the convex pgf (f(0) = p0 > 0, f(s) - s < 0 just below 1),
// driven to |f(rho) - rho| <= 1e-12.
inline double extinction_root(const OffspringSpec& off) {
  if (off.p0 == 0.0) return 0.0;
  const Pmf& f = off.pmf;
  double lo = 0.0;           // f(lo) - lo > 0
  double hi = 0.5;
  int guard = 0;
  while (f.pgf(hi) - hi >= 0.0) {
    hi = 0.5 * (1.0 + hi);
    if (++guard > 200)
      throw std::runtime_error("extinction_root: no sign change below 1");
  }
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f.pgf(mid) - mid > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double rho = 0.5 * (lo + hi);
  if (std::fabs(f.pgf(rho) - rho) > 1e-12)
    throw std::runtime_error("extinction_root: residual above tolerance");
  return rho;
}

struct HSTransformResult {
  double rho = 0.0;          // extinction probability
  OffspringSpec transformed; // law with pgf (f((1-rho)s+rho)-rho)/(1-rho)
  double p1_tilde = 0.0;     // f'(rho)
  double tau = 0.0;          // |log p1_tilde| / log m; +inf when p1_tilde = 0
  double w0_atom = 1.0;      // 1/(1-rho)
};

// Conjugate the offspring law so the transformed pgf has no mass at 0.
// For finite support the coefficients of f((1-rho)s + rho) are obtained by
// exact binomial expansion; masses below 1e-15 are pruned and the rest
// renormalized. p0 = 0 inputs pass through unchanged (rho = 0).
inline HSTransformResult harris_sevastyanov(const OffspringSpec& off) {
  HSTransformResult out;
  if (off.p0 == 0.0) {
    out.rho = 0.0;
    out.transformed = off;
    out.p1_tilde = off.p1;
    out.tau = off.p1 > 0.0 ? std::fabs(std::log(off.p1)) / std::log(off.m)
                           : std::numeric_limits<double>::infinity();
    out.w0_atom = 1.0;
    return out;
  }
  if (!off.pmf.has_finite_support())
    throw UnsupportedRepresentationError(
        "harris_sevastyanov: infinite-support law with p0 > 0 is not representable");

  const double rho = extinction_root(off);
  const double s1 = 1.0 - rho;
  const std::uint64_t kmax = off.pmf.max_support();
  if (kmax > 256)
    throw UnsupportedRepresentationError("harris_sevastyanov: support too large");

  // c_j = [s^j] f((1-rho)s + rho) = sum_{k>=j} p_k C(k,j) rho^(k-j) (1-rho)^j
  std::vector<double> c(kmax + 1, 0.0);
  for (const Pmf::Atom& a : off.pmf.atoms()) {
    const std::uint64_t k = a.first;
    double binom = 1.0;  // C(k, j), built multiplicatively
    for (std::uint64_t j = 0; j <= k; ++j) {
      c[j] += a.second * binom * std::pow(rho, double(k - j)) * std::pow(s1, double(j));
      binom *= double(k - j) / double(j + 1);
    }
  }
  const double mass0 = (c[0] - rho) / s1;  // = (f(rho) - rho)/(1-rho)
  if (std::fabs(mass0) > 1e-12)
    throw std::runtime_error("harris_sevastyanov: transformed mass at 0 not vanishing");

  std::vector<Pmf::Atom> atoms;
  double total = 0.0;
  for (std::uint64_t j = 1; j <= kmax; ++j) {
    const double mass = c[j] / s1;
    if (mass >= 1e-15) {
      atoms.emplace_back(j, mass);
      total += mass;
    }
  }
  for (Pmf::Atom& a : atoms) a.second /= total;

  out.rho = rho;
  out.transformed = OffspringSpec::from_pmf(Pmf::finite(std::move(atoms)));
  out.p1_tilde = off.pmf.pgf_prime(rho);
  out.tau = std::fabs(std::log(out.p1_tilde)) / std::log(off.m);
  out.w0_atom = 1.0 / s1;
  return out;
}

// Var W = sigma^2 / (m^2 - m) for finite-variance offspring (classical).
inline double limit_variance(const OffspringSpec& off) {
  return off.variance / (off.m * off.m - off.m);
}

}  // namespace branchtail
