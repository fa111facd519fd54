#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "branchtail/asymptotics.hpp"
#include "branchtail/distributions.hpp"
#include "branchtail/fitting.hpp"

namespace branchtail {
namespace detail {

// Regularized incomplete beta I_x(a,b), continued fraction (Lentz).
inline double betacf(double a, double b, double x) {
  const double eps = 1e-15, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 400; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lnfront =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(lnfront);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// inverse of I_x(a,b) by bisection; plenty for confidence bounds
inline double ibeta_inv(double a, double b, double p) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (ibeta(a, b, mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

struct ConfidenceInterval {
  double low = 0.0;
  double high = 1.0;
};

// Exact (Clopper-Pearson) two-sided interval for k successes in n trials.
inline ConfidenceInterval clopper_pearson(std::uint64_t k, std::uint64_t n,
                                          double confidence = 0.95) {
  if (n == 0) throw std::invalid_argument("clopper_pearson: n = 0");
  const double alpha = 1.0 - confidence;
  ConfidenceInterval ci;
  if (k == 0) {
    ci.low = 0.0;
    ci.high = 1.0 - std::pow(alpha / 2.0, 1.0 / double(n));
  } else if (k == n) {
    ci.low = std::pow(alpha / 2.0, 1.0 / double(n));
    ci.high = 1.0;
  } else {
    ci.low = detail::ibeta_inv(double(k), double(n - k + 1), alpha / 2.0);
    ci.high = detail::ibeta_inv(double(k + 1), double(n - k), 1.0 - alpha / 2.0);
  }
  return ci;
}

struct TailCurve {
  std::vector<double> epsilons;  // decreasing
  std::vector<double> probs;     // P(sample <= eps)
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  std::uint64_t replicates = 0;
  std::uint64_t seed = 0;
};

// Empirical left-tail curve over a decreasing grid of thresholds; one pass
// over the sorted samples, exact 95% intervals per point.
inline TailCurve mc_tail(std::span<const double> samples, std::vector<double> epsilons,
                         std::uint64_t seed_echo = 0) {
  if (samples.empty()) throw std::invalid_argument("mc_tail: no samples");
  if (epsilons.empty()) throw std::invalid_argument("mc_tail: empty grid");
  std::sort(epsilons.begin(), epsilons.end(), std::greater<double>());
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  TailCurve c;
  c.epsilons = std::move(epsilons);
  c.replicates = samples.size();
  c.seed = seed_echo;
  const std::uint64_t n = sorted.size();
  std::size_t idx = sorted.size();  // number of samples <= current eps
  for (double eps : c.epsilons) {
    while (idx > 0 && sorted[idx - 1] > eps) --idx;
    const std::uint64_t k = idx;
    c.probs.push_back(double(k) / double(n));
    const ConfidenceInterval ci = clopper_pearson(k, n);
    c.ci_low.push_back(ci.low);
    c.ci_high.push_back(ci.high);
  }
  return c;
}

// Two-sample Kolmogorov-Smirnov sup distance.
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = double(sa.size()), nb = double(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    d = std::max(d, std::fabs(double(i) / na - double(j) / nb));
  }
  return d;
}

// One-sample KS distance against a cdf callable.
template <class Cdf>
double ks_distance_to_cdf(std::span<const double> samples, Cdf&& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_distance_to_cdf: empty sample");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = double(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = cdf(s[i]);
    d = std::max(d, std::max(F - double(i) / n, double(i + 1) / n - F));
  }
  return d;
}

inline double zero_fraction(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("zero_fraction: empty sample");
  std::size_t k = 0;
  for (double v : samples)
    if (v == 0.0) ++k;
  return double(k) / double(samples.size());
}

struct ExactDist {
  std::uint32_t n = 0;
  std::map<std::uint64_t, double> masses;
  double spill = 0.0;  // mass pushed above the cap
};

// Exact law of the immigration process population at a small horizon,
// by iterated convolution powers of the offspring pmf. Used as the
// brute-force oracle for the minimal-tree probabilities.
inline ExactDist exact_dist_dp(const OffspringSpec& off, const ImmigrationSpec& imm,
                               std::uint32_t n, std::uint64_t cap) {
  if (n > 4) throw std::invalid_argument("exact_dist_dp: horizon limited to n <= 4");
  if (!off.pmf.has_finite_support() || !imm.pmf.has_finite_support())
    throw UnsupportedRepresentationError("exact_dist_dp: finite-support laws only");
  if (cap < 1 || cap > 2000000) throw std::invalid_argument("exact_dist_dp: bad cap");

  // minimal reachable population at horizon n must fit under the cap
  std::uint64_t min_reach = imm.K;
  for (std::uint32_t g = 0; g < n; ++g) min_reach = min_reach * off.gamma + imm.K;
  if (min_reach > cap)
    throw std::invalid_argument("exact_dist_dp: cap smaller than the minimal population " +
                                std::to_string(min_reach));

  const std::size_t width = std::size_t(cap) + 1;
  std::vector<double> dist(width, 0.0);
  double spill = 0.0;
  for (const Pmf::Atom& a : imm.pmf.atoms()) {
    if (a.first <= cap)
      dist[std::size_t(a.first)] += a.second;
    else
      spill += a.second;
  }

  auto convolve_with = [&](const std::vector<double>& src, const Pmf& pmf,
                           std::vector<double>& dst, double& spill_acc) {
    std::fill(dst.begin(), dst.end(), 0.0);
    for (std::size_t z = 0; z < src.size(); ++z) {
      const double pz = src[z];
      if (pz == 0.0) continue;
      for (const Pmf::Atom& a : pmf.atoms()) {
        const std::uint64_t w = std::uint64_t(z) + a.first;
        if (w <= cap)
          dst[std::size_t(w)] += pz * a.second;
        else
          spill_acc += pz * a.second;
      }
    }
  };

  std::vector<double> power(width, 0.0), power_next(width, 0.0);
  std::vector<double> next(width, 0.0), with_imm(width, 0.0);
  for (std::uint32_t g = 0; g < n; ++g) {
    std::size_t zmax = 0;
    for (std::size_t z = 0; z < width; ++z)
      if (dist[z] != 0.0) zmax = z;
    // accumulate next[w] = sum_z dist[z] * (offspring pmf)^(*z)[w]
    std::fill(next.begin(), next.end(), 0.0);
    std::fill(power.begin(), power.end(), 0.0);
    power[0] = 1.0;  // z = 0 individuals: point mass at 0
    double power_spill = 0.0;
    for (std::size_t z = 0; z <= zmax; ++z) {
      if (dist[z] != 0.0) {
        for (std::size_t w = 0; w < width; ++w) next[w] += dist[z] * power[w];
        spill += dist[z] * power_spill;
      }
      if (z < zmax) {
        convolve_with(power, off.pmf, power_next, power_spill);
        std::swap(power, power_next);
      }
    }
    // add the generation's immigration
    double imm_spill = 0.0;
    convolve_with(next, imm.pmf, with_imm, imm_spill);
    spill += imm_spill;
    std::swap(dist, with_imm);
  }

  ExactDist out;
  out.n = n;
  out.spill = spill;
  for (std::size_t z = 0; z < width; ++z)
    if (dist[z] != 0.0) out.masses[std::uint64_t(z)] = dist[z];
  return out;
}

struct TailFit {
  double fitted_rate = 0.0;
  double r2 = 0.0;
  std::size_t points_used = 0;
};

// Fit the left-tail decay of a Monte Carlo curve under the model the regime
// prescribes. power: slope of log P against log eps. logsq: coefficient of
// |log eps|^2. stretched: negated slope of log(-log P) against log eps.
// Grid points with zero hits are unusable; endpoints whose interval width (in
// log scale) exceeds half the fitted decade drop are trimmed as too noisy.
inline TailFit fit_tail(const TailCurve& curve, const RegimeReport& regime) {
  if (regime.regime == Regime::Degenerate || regime.regime == Regime::Unclassified)
    throw std::invalid_argument("fit_tail: regime carries no rate prediction");
  if (regime.variant == Variant::W_only && regime.rho > 0.0)
    throw std::invalid_argument(
        "fit_tail: W with an extinction atom is not fit directly; check the atom frequency "
        "instead");

  std::vector<double> le, lp, width;
  for (std::size_t i = 0; i < curve.epsilons.size(); ++i) {
    if (curve.probs[i] <= 0.0) continue;
    le.push_back(std::log(curve.epsilons[i]));
    lp.push_back(std::log(curve.probs[i]));
    const double lo = curve.ci_low[i];
    width.push_back(lo > 0.0 ? std::log(curve.ci_high[i] / lo)
                             : std::numeric_limits<double>::infinity());
  }
  // trim noisy endpoints
  std::size_t b = 0, e = le.size();
  while (e - b > 2) {
    const double drop = std::fabs(lp[b] - lp[e - 1]);
    if (width[e - 1] > 0.5 * drop)
      --e;
    else if (width[b] > 0.5 * drop)
      ++b;
    else
      break;
  }
  const std::size_t kept = e - b;
  if (kept < 5) throw std::invalid_argument("fit_tail: insufficient positive probabilities");
  std::span<const double> x(le.data() + b, kept);

  TailFit out;
  out.points_used = kept;
  if (regime.is_power()) {
    std::span<const double> y(lp.data() + b, kept);
    const detail::LineFit f = detail::fit_line(x, y);
    out.fitted_rate = f.slope;
    out.r2 = f.r2;
  } else if (regime.is_logsq()) {
    std::vector<double> ax(kept), y(kept);
    for (std::size_t i = 0; i < kept; ++i) {
      ax[i] = std::fabs(x[i]);
      y[i] = lp[b + i];
    }
    const detail::QuadFit f = detail::fit_quadratic(ax, y);
    out.fitted_rate = -f.c2;
    out.r2 = f.r2;
  } else {
    std::vector<double> y(kept);
    for (std::size_t i = 0; i < kept; ++i) {
      if (!(lp[b + i] < 0.0))
        throw std::invalid_argument("fit_tail: stretched model needs P < 1");
      y[i] = std::log(-lp[b + i]);
    }
    const detail::LineFit f = detail::fit_line(x, y);
    out.fitted_rate = -f.slope;
    out.r2 = f.r2;
  }
  return out;
}

}  // namespace branchtail
