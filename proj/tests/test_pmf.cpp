#include <doctest.h>

#include <cmath>

#include "branchtail/pmf.hpp"
#include "branchtail/rng.hpp"

using namespace branchtail;

TEST_CASE("pgf values") {
  const Pmf p12 = Pmf::parse("{1:0.5, 2:0.5}");
  CHECK(p12.pgf(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p12.pgf(0.5) == doctest::Approx(0.375).epsilon(1e-14));

  const Pmf p02 = Pmf::parse("{0:0.25, 2:0.75}");
  CHECK(p02.pgf(0.0) == doctest::Approx(0.25).epsilon(1e-14));

  CHECK_THROWS_AS((void)p12.pgf(1.5), std::domain_error);
  CHECK_THROWS_AS((void)p12.pgf(-0.1), std::domain_error);
}

TEST_CASE("moments") {
  const Moments a = moments(Pmf::parse("{1:0.5, 2:0.5}"));
  CHECK(a.mean == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(a.variance == doctest::Approx(0.25).epsilon(1e-14));

  const Moments b = moments(Pmf::parse("{2:1.0}"));
  CHECK(b.mean == doctest::Approx(2.0));
  CHECK(b.variance == doctest::Approx(0.0));

  const Moments c = moments(Pmf::fractional_linear(2.0));
  CHECK(c.mean == doctest::Approx(2.0));
  CHECK(c.variance == doctest::Approx(2.0));
}

TEST_CASE("pgf normalization and derivative match moments on random laws") {
  Stream rng(0xfeedu, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Pmf::Atom> atoms;
    double total = 0.0;
    const int support = 2 + int(rng.next_u64() % 5);
    for (int k = 0; k < support; ++k) {
      const double w = rng.next_unit_pos();
      atoms.emplace_back(std::uint64_t(k), w);
      total += w;
    }
    for (auto& a : atoms) a.second /= total;
    const Pmf pmf = Pmf::finite(atoms);
    CHECK(std::fabs(pmf.pgf(1.0) - 1.0) < 1e-12);

    // central difference kept inside [0,1]: (f(1) - f(1-2h))/2h = f'(1-h) = mean + O(h)
    const double h = 1e-6;
    const double deriv = (pmf.pgf(1.0) - pmf.pgf(1.0 - 2 * h)) / (2 * h);
    CHECK(std::fabs(deriv - pmf.mean()) < 1e-4);
  }
  const Pmf fl = Pmf::fractional_linear(3.0);
  CHECK(std::fabs(fl.pgf(1.0) - 1.0) < 1e-12);
  const double h = 1e-6;
  CHECK(std::fabs((fl.pgf(1.0) - fl.pgf(1.0 - 2 * h)) / (2 * h) - 3.0) < 1e-4);
}

TEST_CASE("fractional-linear closed forms") {
  const Pmf fl = Pmf::fractional_linear(2.0);
  CHECK(fl.mass_at(0) == 0.0);
  CHECK(fl.mass_at(1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(fl.mass_at(3) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(fl.min_support() == 1);
  double series = 0.0;
  const double s = 0.7;
  for (int k = 1; k < 200; ++k) series += fl.mass_at(std::uint64_t(k)) * std::pow(s, k);
  CHECK(fl.pgf(s) == doctest::Approx(series).epsilon(1e-12));
  CHECK_THROWS_AS((void)Pmf::fractional_linear(1.0), std::invalid_argument);
}

TEST_CASE("log-domain pgf agrees with the direct one and survives deep arguments") {
  Stream rng(0xabcdu, 9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Pmf::Atom> atoms;
    double total = 0.0;
    const std::uint64_t kmin = rng.next_u64() % 3;
    for (std::uint64_t k = kmin; k < kmin + 3; ++k) {
      const double w = rng.next_unit_pos();
      atoms.emplace_back(k, w);
      total += w;
    }
    for (auto& a : atoms) a.second /= total;
    const Pmf pmf = Pmf::finite(atoms);
    const double L = -30.0 * rng.next_unit();
    const double direct = std::log(pmf.pgf(std::exp(L)));
    CHECK(pmf.log_pgf_of_log(L) == doctest::Approx(direct).epsilon(1e-11));
  }
  // double-exponentially small territory: only the minimal term survives
  const Pmf p23 = Pmf::parse("{2:0.5, 3:0.5}");
  const double deep = p23.log_pgf_of_log(-1e8);
  CHECK(deep == doctest::Approx(2.0 * -1e8 + std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("literal grammar round trips and rejects malformed input") {
  const Pmf p = Pmf::parse(" { 0 : 0.25 , 2 : 0.75 } ");
  CHECK(p.mass_at(0) == doctest::Approx(0.25));
  CHECK(p.mass_at(2) == doctest::Approx(0.75));
  const Pmf q = Pmf::parse(Pmf::parse("{0:0.25, 2:0.75}").to_string());
  CHECK(q.mass_at(2) == doctest::Approx(0.75).epsilon(1e-16));

  const Pmf fl = Pmf::parse("fl(m=2.5)");
  CHECK(fl.is_fractional_linear());
  CHECK(fl.fl_mean() == doctest::Approx(2.5));
  CHECK(Pmf::parse(fl.to_string()).fl_mean() == doctest::Approx(2.5).epsilon(1e-16));

  CHECK_THROWS_AS((void)Pmf::parse("{0:0.25 2:0.75}"), PmfParseError);  // missing comma
  CHECK_THROWS_AS((void)Pmf::parse("{0:0.25,"), PmfParseError);
  CHECK_THROWS_AS((void)Pmf::parse("{a:0.5}"), PmfParseError);
  CHECK_THROWS_AS((void)Pmf::parse("{1:0.5}{"), PmfParseError);
  CHECK_THROWS_AS((void)Pmf::parse("fl(m=0.5)"), PmfParseError);
  CHECK_THROWS_AS((void)Pmf::parse("fl(k=2)"), PmfParseError);
  CHECK_THROWS_AS((void)Pmf::parse(""), PmfParseError);
  CHECK_THROWS_AS((void)Pmf::parse("{1:0.5, 2:0.6}"), PmfParseError);  // sums to 1.1
  CHECK_THROWS_AS((void)Pmf::parse("{1:0.5, 1:0.5}"), PmfParseError);  // duplicate key
}

TEST_CASE("validation rejects bad masses") {
  CHECK_THROWS_AS((void)Pmf::finite({{0, 0.5}, {1, 0.6}}), std::invalid_argument);
  CHECK_THROWS_AS((void)Pmf::finite({{0, -0.1}, {1, 1.1}}), std::invalid_argument);
  CHECK_THROWS_AS((void)Pmf::finite({}), std::invalid_argument);
  CHECK(Pmf::parse("{3:1.0}").is_deterministic());
  CHECK_FALSE(Pmf::parse("{1:0.5, 2:0.5}").is_deterministic());
}
