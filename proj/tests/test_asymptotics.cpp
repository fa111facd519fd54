#include <doctest.h>

#include <cmath>

#include "branchtail/asymptotics.hpp"
#include "branchtail/rng.hpp"

using namespace branchtail;

namespace {

OffspringSpec off(const char* lit) { return OffspringSpec::from_pmf(Pmf::parse(lit)); }
ImmigrationSpec imm(const char* lit) { return ImmigrationSpec::from_pmf(Pmf::parse(lit)); }

}  // namespace

TEST_CASE("classification of the four immigration cases") {
  const OffspringSpec o = off("{1:0.5, 2:0.5}");

  const ImmigrationSpec ia = imm("{0:0.5, 1:0.5}");
  const RegimeReport a = classify(o, &ia, Variant::curlyW);
  CHECK(a.regime == Regime::CaseA);
  CHECK(a.power_exponent->value() ==
        doctest::Approx(std::log(2.0) / std::log(1.5)).epsilon(1e-12));

  const ImmigrationSpec ib = imm("{1:1.0}");
  const RegimeReport b = classify(o, &ib, Variant::curlyW);
  CHECK(b.regime == Regime::CaseB);
  CHECK(*b.logsq_coefficient ==
        doctest::Approx(std::log(2.0) / (2.0 * std::log(1.5) * std::log(1.5)))
            .epsilon(1e-12));
  CHECK(*b.logsq_coefficient == doctest::Approx(2.1082).epsilon(1e-4));

  const OffspringSpec oc = off("{2:0.5, 3:0.5}");
  const RegimeReport c = classify(oc, &ib, Variant::curlyW);
  CHECK(c.regime == Regime::CaseC);
  CHECK(*c.beta == doctest::Approx(std::log(2.0) / std::log(2.5)).epsilon(1e-12));
  CHECK(*c.stretched_exponent == doctest::Approx(3.1063).epsilon(1e-4));

  const OffspringSpec od = off("{0:0.25, 2:0.75}");
  const RegimeReport d = classify(od, &ib, Variant::curlyW);
  CHECK(d.regime == Regime::CaseD);
  CHECK(d.rho == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(*d.h_rho == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(d.power_exponent->value() ==
        doctest::Approx(std::log(3.0) / std::log(1.5)).epsilon(1e-12));
  CHECK(d.tau.has_value());
}

TEST_CASE("classification of the no-immigration and single-ancestor variants") {
  const RegimeReport dub_a = classify(off("fl(m=2)"), nullptr, Variant::W_only);
  CHECK(dub_a.regime == Regime::DubucA);
  CHECK(dub_a.power_exponent->value() == doctest::Approx(1.0).epsilon(1e-12));

  const RegimeReport dub_b = classify(off("{2:0.5, 3:0.5}"), nullptr, Variant::W_only);
  CHECK(dub_b.regime == Regime::DubucB);
  CHECK(*dub_b.beta == doctest::Approx(std::log(2.0) / std::log(2.5)).epsilon(1e-12));

  const OffspringSpec o = off("{1:0.5, 2:0.5}");
  const ImmigrationSpec ia = imm("{0:0.5, 1:0.5}");
  const RegimeReport t3a = classify(o, &ia, Variant::tildeW);
  CHECK(t3a.regime == Regime::Thm3A);
  CHECK(t3a.power_exponent->value() ==
        doctest::Approx(std::fabs(std::log(0.25)) / std::log(1.5)).epsilon(1e-12));

  const ImmigrationSpec ib = imm("{1:1.0}");
  const RegimeReport t3b = classify(o, &ib, Variant::tildeW);
  CHECK(t3b.regime == Regime::Thm3B);
  CHECK(*t3b.logsq_coefficient == doctest::Approx(2.1082).epsilon(1e-4));

  const RegimeReport t3c = classify(off("{2:0.5, 3:0.5}"), &ib, Variant::tildeW);
  CHECK(t3c.regime == Regime::Thm3C);

  const RegimeReport t3d = classify(off("{0:0.25, 2:0.75}"), &ib, Variant::tildeW);
  CHECK(t3d.regime == Regime::Thm3D);
  CHECK(t3d.power_exponent->value() ==
        doctest::Approx(std::log(3.0) / std::log(1.5)).epsilon(1e-12));
}

TEST_CASE("degenerate and reduction boundaries at q0 = 1") {
  const OffspringSpec o = off("{1:0.5, 2:0.5}");
  const ImmigrationSpec none = imm("{0:1.0}");

  const RegimeReport deg = classify(o, &none, Variant::curlyW);
  CHECK(deg.regime == Regime::Degenerate);
  CHECK_FALSE(deg.warnings.empty());

  // tildeW with q0 = 1 must coincide with the W-only classification
  const RegimeReport tw = classify(o, &none, Variant::tildeW);
  const RegimeReport wo = classify(o, nullptr, Variant::W_only);
  CHECK(tw.regime == wo.regime);
  CHECK(tw.variant == Variant::tildeW);
  CHECK(tw.power_exponent->value() ==
        doctest::Approx(wo.power_exponent->value()).epsilon(1e-15));

  CHECK_THROWS_AS((void)classify(o, nullptr, Variant::curlyW), std::invalid_argument);
}

TEST_CASE("deterministic offspring draws a warning, deterministic immigration does not") {
  const ImmigrationSpec det_imm = imm("{1:1.0}");
  const RegimeReport warned = classify(off("{2:1.0}"), &det_imm, Variant::curlyW);
  bool found = false;
  for (const std::string& w : warned.warnings)
    if (w.find("deterministic") != std::string::npos) found = true;
  CHECK(found);

  const RegimeReport clean = classify(off("{1:0.5, 2:0.5}"), &det_imm, Variant::curlyW);
  for (const std::string& w : clean.warnings)
    CHECK(w.find("deterministic") == std::string::npos);
}

TEST_CASE("single-ancestor exponent is the sum of its two parts") {
  Stream rng(0x11u, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const double p1 = 0.05 + 0.9 * rng.next_unit();
    const double q0 = 0.05 + 0.9 * rng.next_unit();
    const OffspringSpec o =
        OffspringSpec::from_pmf(Pmf::finite({{1, p1}, {3, 1.0 - p1}}));
    const ImmigrationSpec i =
        ImmigrationSpec::from_pmf(Pmf::finite({{0, q0}, {1, 1.0 - q0}}));
    const double lhs = classify(o, &i, Variant::tildeW).power_exponent->value();
    const double rhs = classify(o, nullptr, Variant::W_only).power_exponent->value() +
                       classify(o, &i, Variant::curlyW).power_exponent->value();
    CHECK(std::fabs(lhs - rhs) <= 1e-12);
    // against the product form |log(p1 q0)|
    CHECK(std::fabs(lhs - std::fabs(std::log(p1 * q0)) / std::log(o.m)) <= 1e-12);
  }
}

TEST_CASE("minimal tree quantities") {
  const OffspringSpec o = off("{2:0.6, 3:0.4}");
  const ImmigrationSpec i = imm("{1:0.7, 2:0.3}");

  const MinimalTree t0 = minimal_tree(o, i, 0);
  CHECK(t0.b_n == 1);
  CHECK(t0.B_n == 0);
  CHECK(t0.prob == doctest::Approx(0.7).epsilon(1e-15));

  const MinimalTree t1 = minimal_tree(o, i, 1);
  CHECK(t1.b_n == 3);
  CHECK(t1.B_n == 1);
  CHECK(t1.prob == doctest::Approx(0.6 * 0.49).epsilon(1e-14));

  const MinimalTree t2 = minimal_tree(o, i, 2);
  CHECK(t2.b_n == 7);
  CHECK(t2.B_n == 4);

  CHECK_THROWS_AS((void)minimal_tree(off("{0:0.25, 2:0.75}"), i, 1), RegimeMismatchError);
  CHECK_THROWS_AS((void)minimal_tree(o, imm("{0:0.5, 1:0.5}"), 1), RegimeMismatchError);
  CHECK_THROWS_AS((void)minimal_tree(off("{1:0.5, 2:0.5}"), i, 1), RegimeMismatchError);
}

TEST_CASE("minimal tree closed forms satisfy the recurrences up to n = 30") {
  for (std::uint64_t g : {2ull, 3ull}) {
    for (std::uint64_t K : {1ull, 2ull}) {
      std::vector<Pmf::Atom> oa{{g, 0.6}, {g + 1, 0.4}};
      std::vector<Pmf::Atom> ia{{K, 0.7}, {K + 1, 0.3}};
      const OffspringSpec o = OffspringSpec::from_pmf(Pmf::finite(oa));
      const ImmigrationSpec i = ImmigrationSpec::from_pmf(Pmf::finite(ia));
      std::uint64_t b_prev = 0, B_prev = 0;
      for (std::uint32_t n = 0; n <= 30; ++n) {
        const MinimalTree t = minimal_tree(o, i, n);
        if (n == 0) {
          CHECK(t.b_n == K);
          CHECK(t.B_n == 0);
        } else {
          CHECK(t.b_n == g * b_prev + K);
          CHECK(t.B_n == B_prev + b_prev);
        }
        b_prev = t.b_n;
        B_prev = t.B_n;
      }
    }
  }
}

TEST_CASE("cutoff index on worked examples") {
  CHECK(cutoff_index(0.125, 2.0) == 3);
  CHECK(cutoff_index(0.1, 1.5) == 6);
  CHECK(cutoff_index_gamma(0.1, 2.5, 2.0) == 11);
  CHECK_THROWS_AS((void)cutoff_index_gamma(0.1, 2.0, 2.0), std::domain_error);
  CHECK_THROWS_AS((void)cutoff_index(1.5, 2.0), std::domain_error);
  CHECK_THROWS_AS((void)cutoff_index(0.5, 0.9), std::domain_error);
}

TEST_CASE("cutoff index sandwich holds over random inputs") {
  Stream rng(0xc0ffeeu, 2);
  for (int trial = 0; trial < 10000; ++trial) {
    const double eps = std::exp(-27.0 * rng.next_unit_pos());
    const double m = 1.01 + 9.0 * rng.next_unit();
    const long long k = cutoff_index(eps, m);
    const double log_eps = std::log(eps);
    const double tol = 1e-9 * std::fabs(log_eps);
    CHECK(-double(k) * std::log(m) <= log_eps + tol);          // m^-k <= eps
    CHECK(log_eps < -double(k - 1) * std::log(m) + tol);       // eps < m^-(k-1)
  }
}

TEST_CASE("truncation level for the immigration tail") {
  CHECK(truncation_level(imm("{1:1.0}"), 0.7) == 0);
  CHECK(truncation_level(imm("{3:1.0}"), 0.5) == 2);
  CHECK(truncation_level(imm("{1:0.5, 8:0.5}"), 1.0) == 1);
  CHECK_THROWS_AS((void)truncation_level(imm("{1:1.0}"), 0.0), std::domain_error);
  const ImmigrationSpec fl_imm = ImmigrationSpec::from_pmf(Pmf::fractional_linear(2.0));
  CHECK_THROWS_AS((void)truncation_level(fl_imm, 0.5), UnsupportedRepresentationError);
}

TEST_CASE("regime report serializes to a key-value block") {
  const OffspringSpec o = off("{1:0.5, 2:0.5}");
  const ImmigrationSpec ia = imm("{0:0.5, 1:0.5}");
  const std::string text = classify(o, &ia, Variant::curlyW).to_text();
  CHECK(text.find("case = A") != std::string::npos);
  CHECK(text.find("power_exponent = 1.7095112913514") != std::string::npos);
  CHECK(text.find("variant = curlyW") != std::string::npos);
}
