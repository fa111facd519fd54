#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "branchtail/distributions.hpp"

namespace branchtail {

class RegimeMismatchError : public std::runtime_error {
 public:
  explicit RegimeMismatchError(const std::string& what) : std::runtime_error(what) {}
};

enum class Variant { curlyW, tildeW, W_only };

enum class Regime {
  CaseA,   // p0 = 0, 0 < q0 < 1: power tail exp |log q0|/log m
  CaseB,   // p0 = 0, q0 = 0, p1 > 0: log^2 decay
  CaseC,   // p0 = 0, q0 = 0, p1 = 0: stretched exponential
  CaseD,   // p0 > 0: power tail exp |log h(rho)|/log m
  DubucA,  // no immigration, p1 > 0 (after transform when p0 > 0)
  DubucB,  // no immigration, p1 = 0
  Thm3A,
  Thm3B,
  Thm3C,
  Thm3D,
  Degenerate,   // curlyW with q0 = 1: the limit is identically 0
  Unclassified  // hypothesis gap; no prediction emitted
};

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::CaseA: return "A";
    case Regime::CaseB: return "B";
    case Regime::CaseC: return "C";
    case Regime::CaseD: return "D";
    case Regime::DubucA: return "Dubuc-a";
    case Regime::DubucB: return "Dubuc-b";
    case Regime::Thm3A: return "Thm3-a";
    case Regime::Thm3B: return "Thm3-b";
    case Regime::Thm3C: return "Thm3-c";
    case Regime::Thm3D: return "Thm3-d";
    case Regime::Degenerate: return "degenerate";
    case Regime::Unclassified: return "unclassified";
  }
  return "?";
}

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::curlyW: return "curlyW";
    case Variant::tildeW: return "tildeW";
    case Variant::W_only: return "W_only";
  }
  return "?";
}

// A rate of the form |log a| / log b, kept as the two log magnitudes so that
// algebraic identities between regimes can be checked at 1e-12.
struct RateExpr {
  double abs_log_num = 0.0;  // |log a|
  double log_den = 1.0;      // log b
  double value() const { return abs_log_num / log_den; }
};

struct RegimeReport {
  Regime regime = Regime::Unclassified;
  Variant variant = Variant::curlyW;
  std::optional<RateExpr> power_exponent;     // cases a/d, Dubuc-a, Thm3-a/d
  std::optional<double> logsq_coefficient;    // K|log p1| / (2 (log m)^2)
  std::optional<double> beta;                 // log gamma / log m
  std::optional<double> stretched_exponent;   // beta / (1 - beta)
  double rho = 0.0;
  std::optional<double> h_rho;
  std::optional<double> tau;
  std::vector<std::string> warnings;

  bool is_power() const {
    return regime == Regime::CaseA || regime == Regime::CaseD || regime == Regime::DubucA ||
           regime == Regime::Thm3A || regime == Regime::Thm3D;
  }
  bool is_logsq() const { return regime == Regime::CaseB || regime == Regime::Thm3B; }
  bool is_stretched() const {
    return regime == Regime::CaseC || regime == Regime::DubucB || regime == Regime::Thm3C;
  }

  // flat key-value block, one `key = value` per line
  std::string to_text() const {
    char buf[128];
    std::string out;
    auto put = [&](const char* key, double v) {
      std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
      out += buf;
    };
    out += std::string("case = ") + regime_name(regime) + "\n";
    out += std::string("variant = ") + variant_name(variant) + "\n";
    if (power_exponent) put("power_exponent", power_exponent->value());
    if (logsq_coefficient) put("logsq_coefficient", *logsq_coefficient);
    if (beta) put("beta", *beta);
    if (stretched_exponent) put("stretched_exponent", *stretched_exponent);
    put("rho", rho);
    if (h_rho) put("h_rho", *h_rho);
    if (tau) put("tau", *tau);
    for (const std::string& w : warnings) out += "warning = " + w + "\n";
    return out;
  }
};

namespace detail {

inline RegimeReport classify_no_immigration(const OffspringSpec& off) {
  RegimeReport r;
  r.variant = Variant::W_only;
  const double logm = std::log(off.m);
  if (off.p0 > 0.0) {
    // Atom at zero; the positive part decays with the transformed p1.
    const HSTransformResult hs = harris_sevastyanov(off);
    r.regime = Regime::DubucA;
    r.rho = hs.rho;
    r.tau = hs.tau;
    r.power_exponent = RateExpr{std::fabs(std::log(hs.p1_tilde)), logm};
    r.warnings.push_back("offspring has an atom at zero: P(W = 0) = rho; the exponent "
                         "describes P(0 < W <= eps)");
    return r;
  }
  if (off.p1 > 0.0) {
    r.regime = Regime::DubucA;
    r.power_exponent = RateExpr{std::fabs(std::log(off.p1)), logm};
    r.tau = r.power_exponent->value();
  } else {
    r.regime = Regime::DubucB;
    const double beta = std::log(double(off.gamma)) / logm;
    r.beta = beta;
    r.stretched_exponent = beta / (1.0 - beta);
  }
  return r;
}

}  // namespace detail

// Regime and predicted rate parameters for the chosen limit variable.
// curlyW follows the four immigration cases, tildeW the single-ancestor
// variants, W_only the no-immigration dichotomy. q0 = 1 degenerates curlyW
// and reduces tildeW to the no-immigration classification.
inline RegimeReport classify(const OffspringSpec& off, const ImmigrationSpec* imm,
                             Variant variant) {
  if (variant != Variant::W_only && imm == nullptr)
    throw std::invalid_argument("classify: immigration law required for this variant");

  RegimeReport r;
  if (variant == Variant::W_only) {
    r = detail::classify_no_immigration(off);
  } else if (imm->q0 >= 1.0) {
    if (variant == Variant::curlyW) {
      r.regime = Regime::Degenerate;
      r.variant = Variant::curlyW;
      r.warnings.push_back("q0 = 1: immigration is almost surely zero, the limit is "
                           "identically 0");
    } else {
      r = detail::classify_no_immigration(off);
      r.variant = Variant::tildeW;
      r.warnings.push_back("q0 = 1: no immigration; classification reduces to the "
                           "no-immigration case");
    }
  } else {
    const double logm = std::log(off.m);
    r.variant = variant;
    if (variant == Variant::curlyW) {
      if (off.p0 > 0.0) {
        r.regime = Regime::CaseD;
      } else if (imm->q0 > 0.0) {
        r.regime = Regime::CaseA;
        r.power_exponent = RateExpr{std::fabs(std::log(imm->q0)), logm};
      } else if (off.p1 > 0.0) {
        r.regime = Regime::CaseB;
      } else {
        r.regime = Regime::CaseC;
      }
    } else {  // tildeW
      if (off.p0 > 0.0) {
        r.regime = Regime::Thm3D;
      } else if (off.p1 == 0.0) {
        r.regime = Regime::Thm3C;
      } else if (imm->q0 > 0.0) {
        r.regime = Regime::Thm3A;
        r.power_exponent =
            RateExpr{std::fabs(std::log(off.p1)) + std::fabs(std::log(imm->q0)), logm};
      } else {
        r.regime = Regime::Thm3B;
      }
    }
    if (r.regime == Regime::CaseB || r.regime == Regime::Thm3B) {
      r.logsq_coefficient =
          double(imm->K) * std::fabs(std::log(off.p1)) / (2.0 * logm * logm);
    }
    if (r.regime == Regime::CaseC || r.regime == Regime::Thm3C) {
      const double beta = std::log(double(off.gamma)) / logm;
      r.beta = beta;
      r.stretched_exponent = beta / (1.0 - beta);
    }
    if (r.regime == Regime::CaseD || r.regime == Regime::Thm3D) {
      const HSTransformResult hs = harris_sevastyanov(off);
      r.rho = hs.rho;
      r.tau = hs.tau;
      r.h_rho = imm->pmf.pgf(hs.rho);
      r.power_exponent = RateExpr{std::fabs(std::log(*r.h_rho)), logm};
    }
  }
  if (off.pmf.is_deterministic())
    r.warnings.push_back("deterministic offspring law (some p_k = 1): outside the "
                         "standing assumptions, predictions not extrapolated");
  return r;
}

// Minimal-population quantities in the doubly-minimal regime p0 = q0 = 0,
// gamma >= 2: the smallest possible population at generation n, its
// cumulative sum, and the probability of that single path.
struct MinimalTree {
  std::uint32_t n = 0;
  std::uint64_t b_n = 0;   // K (gamma^(n+1) - 1)/(gamma - 1)
  std::uint64_t B_n = 0;   // b(0) + ... + b(n-1)
  double prob = 0.0;       // p_gamma^B(n) * q_K^(n+1); may underflow for large n
  double log_prob = 0.0;
};

inline MinimalTree minimal_tree(const OffspringSpec& off, const ImmigrationSpec& imm,
                                std::uint32_t n) {
  if (off.p0 != 0.0 || imm.q0 != 0.0 || off.gamma < 2)
    throw RegimeMismatchError("minimal_tree: requires p0 = 0, q0 = 0 and gamma >= 2");
  const std::uint64_t g = off.gamma;
  const std::uint64_t K = imm.K;

  unsigned __int128 gpow = 1;  // gamma^(n+1)
  for (std::uint32_t i = 0; i <= n; ++i) {
    gpow *= g;
    if (gpow > (unsigned __int128)(~0ull)) throw std::overflow_error("minimal_tree: overflow");
  }
  const unsigned __int128 b128 = (unsigned __int128)K * (gpow - 1) / (g - 1);
  const unsigned __int128 B128 =
      (unsigned __int128)K * (gpow - (unsigned __int128)(n + 1) * g + n) / ((g - 1) * (g - 1));
  if (b128 > (unsigned __int128)(~0ull) || B128 > (unsigned __int128)(~0ull))
    throw std::overflow_error("minimal_tree: overflow");

  MinimalTree t;
  t.n = n;
  t.b_n = (std::uint64_t)b128;
  t.B_n = (std::uint64_t)B128;
  const double p_gamma = off.pmf.mass_at(g);
  const double q_K = imm.pmf.mass_at(K);
  t.log_prob = double(t.B_n) * std::log(p_gamma) + double(n + 1) * std::log(q_K);
  t.prob = std::exp(t.log_prob);
  return t;
}

namespace detail {

// ceil with a snap: values within 1e-9 of an integer are taken as exact, so
// eps hitting an exact power of the base lands on the expected index.
inline long long snapped_ceil(double r) {
  const double nearest = std::round(r);
  if (std::fabs(r - nearest) < 1e-9) return (long long)nearest;
  return (long long)std::ceil(r);
}

}  // namespace detail

// k with base^-k <= eps < base^-(k-1), i.e. ceil(|log eps| / log base).
inline long long cutoff_index_base(double epsilon, double base) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::domain_error("cutoff_index: epsilon must lie in (0,1)");
  if (!(base > 1.0)) throw std::domain_error("cutoff_index: base must exceed 1");
  const double log_base = std::log(base);
  long long k = detail::snapped_ceil(-std::log(epsilon) / log_base);
  if (k < 1) k = 1;
  // enforce the sandwich in log domain (tolerant of 1-ulp boundary noise)
  const double log_eps = std::log(epsilon);
  const double tol = 1e-9 * std::fabs(log_eps);
  while (-double(k) * log_base > log_eps + tol) ++k;
  while (k > 1 && -double(k - 1) * log_base <= log_eps + tol) --k;
  return k;
}

inline long long cutoff_index(double epsilon, double m) { return cutoff_index_base(epsilon, m); }

inline long long cutoff_index_gamma(double epsilon, double m, double gamma) {
  if (!(m > gamma))
    throw std::domain_error("cutoff_index: gamma mode requires m > gamma (beta < 1)");
  return cutoff_index_base(epsilon, m / gamma);
}

// Smallest l >= 0 with sum_{i>=l+1} P(log+ Y >= delta*i) <= 1/2. Finite
// immigration support only; terms vanish once delta*i exceeds log(max atom).
inline int truncation_level(const ImmigrationSpec& imm, double delta) {
  if (!(delta > 0.0)) throw std::domain_error("truncation_level: delta must be positive");
  if (!imm.pmf.has_finite_support())
    throw UnsupportedRepresentationError("truncation_level: finite-support immigration only");
  const double log_ymax = std::log(double(std::max<std::uint64_t>(imm.pmf.max_support(), 1)));
  const int i_max = int(std::floor(log_ymax / delta));
  auto tail_prob = [&](int i) {
    // P(log+ Y >= delta * i)
    const double x = delta * double(i);
    if (x <= 0.0) return 1.0;
    double p = 0.0;
    for (const Pmf::Atom& a : imm.pmf.atoms())
      if (a.first >= 1 && std::log(double(a.first)) >= x) p += a.second;
    return p;
  };
  double tail = 0.0;
  for (int i = 1; i <= i_max; ++i) tail += tail_prob(i);
  int l = 0;
  for (;; ++l) {
    if (tail <= 0.5) return l;
    if (l + 1 <= i_max) tail -= tail_prob(l + 1);
  }
}

}  // namespace branchtail
