#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace branchtail {

// Thrown by Pmf::parse; offset is the byte position of the offending token.
class PmfParseError : public std::runtime_error {
 public:
  PmfParseError(std::size_t offset, const std::string& what)
      : std::runtime_error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct Moments {
  double mean;
  double variance;
};

// Probability mass function on the nonnegative integers.
//
// Two representations are supported: an explicit finite-support table, and
// the parametric fractional-linear family
//   p_k = (1/m) ((m-1)/m)^(k-1),  k >= 1,   m > 1,
// whose generating function has the closed form s / (m - (m-1)s).
// Values are immutable after construction.
class Pmf {
 public:
  using Atom = std::pair<std::uint64_t, double>;

  // point mass at 1; a valid placeholder for default-constructed holders
  Pmf() : atoms_{{1, 1.0}} {}

  static Pmf finite(std::vector<Atom> atoms) {
    std::sort(atoms.begin(), atoms.end());
    if (atoms.empty()) throw std::invalid_argument("pmf: no atoms");
    double sum = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (i > 0 && atoms[i].first == atoms[i - 1].first)
        throw std::invalid_argument("pmf: duplicate atom " + std::to_string(atoms[i].first));
      const double p = atoms[i].second;
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("pmf: mass outside [0,1]");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("pmf: masses sum to " + std::to_string(sum) + ", not 1");
    // Drop exact zeros so min/max support are meaningful.
    std::vector<Atom> kept;
    kept.reserve(atoms.size());
    for (const Atom& a : atoms)
      if (a.second > 0.0) kept.push_back(a);
    if (kept.empty()) throw std::invalid_argument("pmf: all masses zero");
    Pmf p;
    p.atoms_ = std::move(kept);
    return p;
  }

  static Pmf fractional_linear(double m) {
    if (!(m > 1.0) || !std::isfinite(m))
      throw std::invalid_argument("fractional_linear: requires m > 1");
    Pmf p;
    p.fl_m_ = m;
    return p;
  }

  bool is_fractional_linear() const { return fl_m_ > 1.0; }
  double fl_mean() const { return fl_m_; }

  const std::vector<Atom>& atoms() const {
    require_finite("atoms");
    return atoms_;
  }

  bool has_finite_support() const { return !is_fractional_linear(); }

  double mass_at(std::uint64_t k) const {
    if (is_fractional_linear()) {
      if (k == 0) return 0.0;
      const double q = (fl_m_ - 1.0) / fl_m_;
      return (1.0 / fl_m_) * std::pow(q, double(k - 1));
    }
    for (const Atom& a : atoms_)
      if (a.first == k) return a.second;
    return 0.0;
  }

  std::uint64_t min_support() const {
    return is_fractional_linear() ? 1 : atoms_.front().first;
  }

  std::uint64_t max_support() const {
    require_finite("max_support");
    return atoms_.back().first;
  }

  double mean() const {
    if (is_fractional_linear()) return fl_m_;
    double s = 0.0;
    for (const Atom& a : atoms_) s += double(a.first) * a.second;
    return s;
  }

  double variance() const {
    if (is_fractional_linear()) return fl_m_ * (fl_m_ - 1.0);
    double s2 = 0.0;
    const double mu = mean();
    for (const Atom& a : atoms_) s2 += double(a.first) * double(a.first) * a.second;
    return std::max(0.0, s2 - mu * mu);
  }

  // true when some single value carries all the mass
  bool is_deterministic() const {
    if (is_fractional_linear()) return false;
    for (const Atom& a : atoms_)
      if (a.second >= 1.0 - 1e-12) return true;
    return false;
  }

  double pgf(double s) const {
    if (!(s >= 0.0 && s <= 1.0))
      throw std::domain_error("pgf: argument outside [0,1]");
    if (is_fractional_linear()) return s / (fl_m_ - (fl_m_ - 1.0) * s);
    double acc = 0.0;
    for (const Atom& a : atoms_) acc += a.second * std::pow(s, double(a.first));
    return acc;
  }

  double pgf_prime(double s) const {
    if (!(s >= 0.0 && s <= 1.0))
      throw std::domain_error("pgf_prime: argument outside [0,1]");
    if (is_fractional_linear()) {
      const double d = fl_m_ - (fl_m_ - 1.0) * s;
      return fl_m_ / (d * d);
    }
    double acc = 0.0;
    for (const Atom& a : atoms_) {
      if (a.first == 0) continue;
      acc += a.second * double(a.first) * std::pow(s, double(a.first - 1));
    }
    return acc;
  }

  // log f(exp(L)) for L <= 0, factored through the minimal support point so
  // the value stays representable when f(s) is double-exponentially small:
  //   log f(e^L) = kmin*L + log( sum_{k>=kmin} p_k e^{(k-kmin)L} ).
  // The residual sum lies in (p_kmin, 1], so only harmless underflow occurs.
  double log_pgf_of_log(double log_s) const {
    if (log_s > 0.0) throw std::domain_error("log_pgf_of_log: log s must be <= 0");
    if (is_fractional_linear()) {
      const double e = std::exp(log_s);
      return log_s - std::log(fl_m_ - (fl_m_ - 1.0) * e);
    }
    const double kmin = double(atoms_.front().first);
    double acc = 0.0;
    for (const Atom& a : atoms_) acc += a.second * std::exp((double(a.first) - kmin) * log_s);
    return kmin * log_s + std::log(acc);
  }

  // E[X log+ X]; finite for both representations.
  double mean_klogk() const {
    if (!is_fractional_linear()) {
      double s = 0.0;
      for (const Atom& a : atoms_)
        if (a.first >= 2) s += a.second * double(a.first) * std::log(double(a.first));
      return s;
    }
    const double q = (fl_m_ - 1.0) / fl_m_;
    double s = 0.0, w = (1.0 / fl_m_) * q;  // mass at k = 2
    for (std::uint64_t k = 2; k < 1u << 20; ++k) {
      const double term = w * double(k) * std::log(double(k));
      s += term;
      if (term < 1e-17 * (s + 1e-300)) break;
      w *= q;
    }
    return s;
  }

  // E[log+ X]
  double mean_logplus() const {
    if (!is_fractional_linear()) {
      double s = 0.0;
      for (const Atom& a : atoms_)
        if (a.first >= 2) s += a.second * std::log(double(a.first));
      return s;
    }
    const double q = (fl_m_ - 1.0) / fl_m_;
    double s = 0.0, w = (1.0 / fl_m_) * q;
    for (std::uint64_t k = 2; k < 1u << 20; ++k) {
      const double term = w * std::log(double(k));
      s += term;
      if (term < 1e-17 * (s + 1e-300)) break;
      w *= q;
    }
    return s;
  }

  // Literal grammar: "{k:mass, k:mass, ...}" or "fl(m=<number>)".
  static Pmf parse(std::string_view text) {
    std::size_t i = 0;
    auto skip_ws = [&] {
      while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    };
    auto fail = [&](const std::string& msg) -> void { throw PmfParseError(i, msg); };

    skip_ws();
    if (i >= text.size()) fail("empty distribution literal");

    if (text[i] == 'f') {
      if (text.substr(i, 2) != "fl") fail("expected 'fl(' or '{'");
      i += 2;
      skip_ws();
      if (i >= text.size() || text[i] != '(') fail("expected '(' after 'fl'");
      ++i;
      skip_ws();
      if (text.substr(i, 1) != "m") fail("expected 'm=' inside fl(...)");
      ++i;
      skip_ws();
      if (i >= text.size() || text[i] != '=') fail("expected '=' after 'm'");
      ++i;
      skip_ws();
      double m = parse_number(text, i);
      skip_ws();
      if (i >= text.size() || text[i] != ')') fail("expected ')' to close fl(...)");
      ++i;
      skip_ws();
      if (i != text.size()) fail("trailing characters after fl(...)");
      if (!(m > 1.0)) fail("fl(m=...) requires m > 1");
      return fractional_linear(m);
    }

    if (text[i] != '{') fail("expected '{' or 'fl('");
    ++i;
    std::vector<Atom> atoms;
    while (true) {
      skip_ws();
      if (i >= text.size()) fail("unterminated '{'");
      if (text[i] == '}') {
        ++i;
        break;
      }
      if (!std::isdigit(static_cast<unsigned char>(text[i]))) fail("expected integer key");
      std::uint64_t k = 0;
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
        k = k * 10 + std::uint64_t(text[i] - '0');
        ++i;
      }
      skip_ws();
      if (i >= text.size() || text[i] != ':') fail("expected ':' after key");
      ++i;
      skip_ws();
      double mass = parse_number(text, i);
      atoms.emplace_back(k, mass);
      skip_ws();
      if (i < text.size() && text[i] == ',') {
        ++i;
        continue;
      }
      if (i < text.size() && text[i] == '}') {
        ++i;
        break;
      }
      fail("expected ',' or '}' after mass");
    }
    skip_ws();
    if (i != text.size()) throw PmfParseError(i, "trailing characters after '}'");
    try {
      return finite(std::move(atoms));
    } catch (const std::invalid_argument& e) {
      throw PmfParseError(0, e.what());
    }
  }

  std::string to_string() const {
    char buf[64];
    if (is_fractional_linear()) {
      std::snprintf(buf, sizeof buf, "fl(m=%.17g)", fl_m_);
      return buf;
    }
    std::string out = "{";
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
      if (j) out += ", ";
      std::snprintf(buf, sizeof buf, "%llu:%.17g",
                    static_cast<unsigned long long>(atoms_[j].first), atoms_[j].second);
      out += buf;
    }
    out += "}";
    return out;
  }

 private:
  void require_finite(const char* what) const {
    if (is_fractional_linear())
      throw std::logic_error(std::string(what) + ": fractional-linear pmf has infinite support");
  }

  static double parse_number(std::string_view text, std::size_t& i) {
    const std::size_t start = i;
    std::string tok;
    while (i < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.' ||
            text[i] == 'e' || text[i] == 'E' || text[i] == '+' || text[i] == '-')) {
      tok += text[i];
      ++i;
    }
    if (tok.empty()) throw PmfParseError(start, "expected number");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw PmfParseError(start, "bad number '" + tok + "'");
    }
    if (used != tok.size()) throw PmfParseError(start + used, "bad number '" + tok + "'");
    return v;
  }

  std::vector<Atom> atoms_;  // finite representation, sorted by value
  double fl_m_ = 0.0;        // > 1 selects the fractional-linear family
};

inline double pgf_eval(const Pmf& pmf, double s) { return pmf.pgf(s); }

inline Moments moments(const Pmf& pmf) { return {pmf.mean(), pmf.variance()}; }

}  // namespace branchtail
