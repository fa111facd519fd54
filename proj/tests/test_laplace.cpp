#include <doctest.h>

#include <cmath>
#include <numeric>

#include "branchtail/laplace.hpp"
#include "branchtail/simulate.hpp"

using namespace branchtail;

namespace {

const OffspringSpec fl2 = OffspringSpec::from_pmf(Pmf::fractional_linear(2.0));
const OffspringSpec off15 = OffspringSpec::from_pmf(Pmf::parse("{1:0.5, 2:0.5}"));
const OffspringSpec off25 = OffspringSpec::from_pmf(Pmf::parse("{2:0.5, 3:0.5}"));
const OffspringSpec offd = OffspringSpec::from_pmf(Pmf::parse("{0:0.25, 2:0.75}"));
const ImmigrationSpec imm1 = ImmigrationSpec::from_pmf(Pmf::parse("{1:1.0}"));

}  // namespace

TEST_CASE("exponential oracle: fractional-linear m=2 transform is 1/(1+lambda)") {
  for (double lam : {1e-6, 0.25, 1.0, 7.0, 100.0, 1e6, 1e12})
    CHECK(log_phi_W(fl2, lam) == doctest::Approx(-std::log1p(lam)).epsilon(1e-8));
}

TEST_CASE("transform limits") {
  CHECK(log_phi_W(off15, 1e-8) <= 0.0);
  CHECK(log_phi_W(off15, 1e-8) >= -1.001e-8);

  // W identically 1
  const OffspringSpec det2 = OffspringSpec::from_pmf(Pmf::parse("{2:1.0}"));
  for (double lam : {1.0, 10.0, 1000.0})
    CHECK(log_phi_W(det2, lam) == doctest::Approx(-lam).epsilon(1e-8));

  // atom case: phi(inf) = rho, so log phi is floored at log(rho)
  CHECK(log_phi_W(offd, 1e12) >= std::log(1.0 / 3.0) - 1e-9);
  CHECK(log_phi_W(offd, 1e12) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-6));
}

TEST_CASE("immigration transform: convergent product oracle and degenerate laws") {
  // fl(2) + Y==1 at lambda=1: product of 1/(1+2^-i)
  double oracle = 0.0;
  for (int i = 0; i < 120; ++i) oracle += -std::log1p(std::pow(2.0, -i));
  CHECK(log_phi_curlyW(fl2, imm1, 1.0) == doctest::Approx(oracle).epsilon(1e-8));
  CHECK(std::exp(oracle) == doctest::Approx(0.2097).epsilon(1e-3));

  CHECK(log_phi_curlyW(off15, imm1, 1e-9) >= -1e-6);

  const ImmigrationSpec none = ImmigrationSpec::from_pmf(Pmf::parse("{0:1.0}"));
  CHECK(log_phi_curlyW(off15, none, 1.0) == 0.0);
  CHECK(log_phi_curlyW(off15, none, 1e8) == 0.0);

  // q0 = 1 also collapses the tildeW transform onto phi alone
  for (double lam : {0.5, 3.0, 1e4})
    CHECK(log_phi_tildeW(off15, none, lam) == log_phi_W(off15, lam));
}

TEST_CASE("functional equation residual is tiny across offspring laws") {
  for (const OffspringSpec* off : {&fl2, &off15, &off25, &offd}) {
    for (double lam : log_spaced_grid(1e-2, 1e12, 57)) {
      const double lhs = log_phi_W(*off, lam);
      const double rhs = off->pmf.log_pgf_of_log(log_phi_W(*off, lam / off->m));
      CHECK(std::fabs(lhs - rhs) < 1e-10);
    }
  }
}

TEST_CASE("curves are monotone, log-convex in lambda, and obey the crude mean bound") {
  const LaplaceCurve c = phi_W_curve(off15, log_spaced_grid(1e-3, 1e3, 61));
  CHECK(c.log_values.front() >= -2.0 * c.lambdas.front());  // phi >= 1 - lambda E W
  for (std::size_t i = 1; i < c.log_values.size(); ++i)
    CHECK(c.log_values[i] <= c.log_values[i - 1] + 1e-15);
  for (std::size_t i = 2; i < c.log_values.size(); ++i) {
    const double s1 = (c.log_values[i - 1] - c.log_values[i - 2]) /
                      (c.lambdas[i - 1] - c.lambdas[i - 2]);
    const double s2 =
        (c.log_values[i] - c.log_values[i - 1]) / (c.lambdas[i] - c.lambdas[i - 1]);
    CHECK(s2 >= s1 - 1e-9 * std::fabs(s1));
  }
}

TEST_CASE("base point robustness: halving the base moves nothing above 1e-8") {
  // relative once |log phi| exceeds 1: in the gamma >= 2 regime log phi
  // reaches ~1e9, where 1e-8 absolute is smaller than the ulp of the value
  PhiOptions a, b;
  a.base_lambda = 1e-5;
  b.base_lambda = 5e-6;
  for (const OffspringSpec* off : {&off15, &off25}) {
    for (double lam : log_spaced_grid(1e-2, 1e12, 29)) {
      const double va = log_phi_W(*off, lam, a);
      const double vb = log_phi_W(*off, lam, b);
      CHECK(std::fabs(va - vb) < 1e-8 * std::max(1.0, std::fabs(va)));
    }
  }
}

TEST_CASE("transform matches simulation at moderate lambda") {
  SimConfig cfg;
  cfg.generations = 20;
  cfg.replicates = 20000;
  cfg.master_seed = 0xd1ce;
  const std::vector<double> w = sample_W(off15, cfg);
  for (double lam : {0.5, 1.0, 2.0}) {
    double mean = 0.0, m2 = 0.0;
    for (double v : w) {
      const double e = std::exp(-lam * v);
      mean += e;
      m2 += e * e;
    }
    mean /= double(w.size());
    m2 /= double(w.size());
    const double se = std::sqrt((m2 - mean * mean) / double(w.size()));
    CHECK(std::fabs(mean - std::exp(log_phi_W(off15, lam))) <= 3.0 * se);
  }
}

TEST_CASE("tauberian conversions") {
  const double beta = std::log(2.0) / std::log(2.5);
  const TauberianRate a = tauberian_convert(beta / (1.0 - beta), 0.0);
  CHECK(a.lt_alpha == doctest::Approx(beta).epsilon(1e-12));
  CHECK(a.lt_theta == 0.0);

  const TauberianRate b = tauberian_convert(0.0, 2.0);
  CHECK(b.lt_alpha == 0.0);
  CHECK(b.lt_theta == doctest::Approx(2.0).epsilon(1e-15));

  const TauberianRate c = tauberian_convert(1.0, 0.0);
  CHECK(c.lt_alpha == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS((void)tauberian_convert(0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS((void)tauberian_convert(0.0, -1.0), std::domain_error);
  CHECK_THROWS_AS((void)tauberian_convert(-0.5, 1.0), std::domain_error);

  // round trip: (alpha, theta) -> transform side -> back
  Stream rng(0xaau, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const double alpha = 3.0 * rng.next_unit_pos();
    const double theta = 4.0 * rng.next_unit() - 2.0;
    const TauberianRate r = tauberian_convert(alpha, theta);
    const double alpha_back = r.lt_alpha / (1.0 - r.lt_alpha);
    const double theta_back = r.lt_theta / (1.0 - r.lt_alpha);
    CHECK(std::fabs(alpha_back - alpha) <= 1e-12 * std::max(1.0, alpha));
    CHECK(std::fabs(theta_back - theta) <= 1e-12 * std::max(1.0, std::fabs(theta)));
  }
}

TEST_CASE("rate fits recover the three decay families") {
  const LaplaceCurve power = phi_W_curve(fl2, log_spaced_grid(1e2, 1e8, 25));
  const LtFit fp = fit_lt_rate(power, LtModel::power);
  CHECK(fp.exponent == doctest::Approx(-1.0).epsilon(0.02));
  CHECK(fp.r2 > 0.999);

  // synthetic quadratic-in-log curve with known coefficient
  LaplaceCurve synth;
  synth.lambdas = log_spaced_grid(1e4, 1e12, 33);
  for (double lam : synth.lambdas) {
    const double x = std::log(lam);
    synth.log_values.push_back(-2.1 * x * x + 0.3 * x - 0.1);
    synth.depths.push_back(0);
    synth.terms.push_back(0);
  }
  const LtFit fq = fit_lt_rate(synth, LtModel::logsq);
  CHECK(fq.coefficient == doctest::Approx(2.1).epsilon(1e-9));

  const LaplaceCurve stretched = phi_W_curve(off25, log_spaced_grid(1e4, 1e10, 25));
  const LtFit fs = fit_lt_rate(stretched, LtModel::stretched);
  CHECK(fs.exponent ==
        doctest::Approx(std::log(2.0) / std::log(2.5)).epsilon(0.05));

  CHECK_THROWS_AS((void)fit_lt_rate(phi_W_curve(fl2, log_spaced_grid(1.0, 10.0, 5)),
                                    LtModel::power),
                  std::invalid_argument);
  LaplaceCurve zeros;
  zeros.lambdas = log_spaced_grid(1.0, 1e4, 9);
  zeros.log_values.assign(9, 0.0);
  zeros.depths.assign(9, 0);
  zeros.terms.assign(9, 0);
  CHECK_THROWS_AS((void)fit_lt_rate(zeros, LtModel::power), std::invalid_argument);
}

TEST_CASE("depth cap refuses absurd recursions") {
  PhiOptions opt;
  opt.depth_cap = 3;
  CHECK_THROWS_AS((void)log_phi_W(off15, 1e6, opt), NumericalError);
  CHECK_THROWS_AS((void)log_phi_W(off15, -1.0), std::domain_error);
}
