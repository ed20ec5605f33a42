#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlap/errors.hpp"
#include "mlap/free_entropy.hpp"
#include "oracles.hpp"

using namespace mlap;

TEST_CASE("semicircle density") {
  for (double s2 : {0.5, 1.0, 2.0}) {
    const SpectralDensity d = semicircle_density(s2);
    CHECK(d.normalization() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.moment(2) == doctest::Approx(s2).epsilon(1e-12));
    CHECK(d.moment(4) == doctest::Approx(2.0 * s2 * s2).epsilon(1e-12));
    CHECK(d.fisher() == doctest::Approx(1.0 / s2).epsilon(1e-10));
    const double x = 0.3;
    const auto it = std::lower_bound(d.grid.begin(), d.grid.end(), x);
    if (it != d.grid.end()) {
      const std::size_t i = static_cast<std::size_t>(it - d.grid.begin());
      CHECK(d.values[i] == doctest::Approx(oracle::semicircle_pdf(d.grid[i], s2)).epsilon(1e-12));
    }
  }
}

TEST_CASE("quartic equilibrium density") {
  const SpectralDensity d = quartic_density(1.0, 0.25);
  d.check(1e-10);
  // The equilibrium measure satisfies the Schwinger-Dyson relation
  // E[x W'(x)] = 1 for W = alpha x^2/2 + beta x^4.
  CHECK(d.moment(2) + 4.0 * 0.25 * d.moment(4) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(quartic_density(1.0, 0.0).fisher() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("free convolution with a semicircle") {
  const SpectralDensity s = free_convolve_semicircle(semicircle_density(0.5), 0.5);
  CHECK(s.normalization() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.fisher() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.left == doctest::Approx(-2.0).epsilon(1e-4));

  const SpectralDensity q = quartic_density(2.0, 0.1);
  const SpectralDensity qt = free_convolve_semicircle(q, 1.0);
  CHECK(qt.moment(2) == doctest::Approx(q.moment(2) + 1.0).epsilon(1e-6));
}

TEST_CASE("Fisher flow of a semicircle is 1 / (sigma2 + t)") {
  RngStream rng(1, 0);
  const std::vector<double> ts{0.0, 0.5, 1.0, 2.0, 4.0};
  const FlowReport r = fisher_semicircular_flow(semicircle_density(0.5), ts, {}, rng);
  for (std::size_t i = 0; i < ts.size(); ++i)
    CHECK(r.points[i].fisher.value == doctest::Approx(1.0 / (0.5 + ts[i])).epsilon(1e-8));
  CHECK(r.monotone);
}

TEST_CASE("matrix route agrees with the density route") {
  RngStream rng(2, 0);
  FlowOptions o;
  o.n = 16;
  o.samples = 200;
  o.threads = 1;
  const std::vector<double> ts{0.0, 1.0};
  const FlowReport r = fisher_semicircular_flow(quadratic_spec(0.5), ts, o, rng);
  for (const auto& p : r.points) CHECK(std::abs(p.residual) <= 3.0 * p.matrix.std_error + 0.02);
}

TEST_CASE("chi_star of semicircles") {
  for (double s2 : {0.5, 1.0, 2.0}) {
    const double chi = chi_star([s2](double t) { return 1.0 / (s2 + t); }, 1);
    const double energy = oracle::log_energy([s2](double x) { return oracle::semicircle_pdf(x, s2); }, std::sqrt(s2));
    CHECK(chi == doctest::Approx(oracle::chi_from_log_energy(energy)).epsilon(1e-8));
    CHECK(chi == doctest::Approx(0.5 * std::log(2.0 * oracle::kPi * std::exp(1.0) * s2)).epsilon(1e-8));
  }
  CHECK(chi_constant() == doctest::Approx(0.5 * std::log(2.0 * oracle::kPi)).epsilon(1e-8));
}

TEST_CASE("chi_star from a tabulated flow matches the log energy") {
  RngStream rng(3, 0);
  const SpectralDensity q = quartic_density(2.0, 0.2);
  std::vector<double> ts{0.0};
  for (double t = 0.01; t < 80.0; t *= 1.15) ts.push_back(t);
  const FlowReport r = fisher_semicircular_flow(q, ts, {}, rng);
  const double chi = chi_star(r.points, 1);
  const double r2 = oracle::quartic_edge2(2.0, 0.2);
  CHECK(q.right == doctest::Approx(std::sqrt(r2)).epsilon(1e-6));
  const double energy =
      oracle::log_energy([](double x) { return oracle::quartic_pdf(x, 2.0, 0.2); }, 0.5 * std::sqrt(r2));
  CHECK(chi == doctest::Approx(oracle::chi_from_log_energy(energy)).epsilon(1e-4));
}

TEST_CASE("chi_star rejects unconverged flows") {
  std::vector<FlowPoint> flow;
  for (double t : {0.0, 0.5, 1.0}) {
    FlowPoint p;
    p.t = t;
    p.fisher.value = 1.0 / (1.0 + t) + 0.5 * t * t;
    flow.push_back(p);
  }
  CHECK_THROWS_AS(chi_star(flow, 1), ConfigError);
}

TEST_CASE("chi relation on the quadratic potential") {
  for (double c : {0.25, 0.5}) {
    const double chi_g = c / (1.0 + 2.0 * c) - 0.5 * std::log(1.0 + 2.0 * c);
    const double m2 = 1.0 / (1.0 + 2.0 * c);
    const double chi = chi_from_chi_g(chi_g, m2, 1);
    const double direct = chi_star([m2](double t) { return 1.0 / (m2 + t); }, 1);
    CHECK(chi == doctest::Approx(direct).epsilon(1e-8));
  }
}

TEST_CASE("controlled estimate of chi^G") {
  const double c = 0.5;
  ChiBudget b;
  b.paths = 32;
  b.steps = 50;
  b.inner = 16;
  b.threads = 1;
  RngStream rng(4, 0);
  const ChiControlResult r = chi_microstates_control(quadratic_spec(c), 16, 1, b, rng);
  const double expect = c / (1.0 + 2.0 * c) - 0.5 * std::log(1.0 + 2.0 * c);
  CHECK(std::abs(r.chi_g.value - expect) <= 3.0 * r.chi_g.std_error + 0.05 * std::abs(expect));
  CHECK_THROWS_AS(chi_microstates_control(word_spec(-0.5, {0.0, 0.0}, "X1^4"), 8, 1, b, rng), ConfigError);
}

TEST_CASE("conjugate variable residuals") {
  const GibbsEnsemble ens(quadratic_spec(0.5), 16, 1);
  MalaOptions o;
  o.samples = 300;
  o.burn_in = 300;
  RngStream rng(5, 0);
  const MalaResult r = ens.sample(o, rng);
  const std::vector<NCPolynomial> battery{parse_polynomial("1"), parse_polynomial("X1"), parse_polynomial("X1^2")};
  const auto res = conjugate_variable_residual(r.samples, ens.spec(), battery, LetterRef{0, 0});
  for (const auto& e : res) CHECK(std::abs(e.value) <= 3.0 * e.std_error + 1e-3);
  const auto wrong = conjugate_variable_residual(r.samples, ens.spec(), battery, LetterRef{0, 0}, false);
  CHECK(std::abs(wrong[1].value) > 3.0 * wrong[1].std_error);
}
