#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlap/errors.hpp"
#include "mlap/gibbs.hpp"
#include "oracles.hpp"

using namespace mlap;

TEST_CASE("score matches finite differences of the log density") {
  const PotentialSpec spec = word_spec(0.5, {0.2, 0.0}, "X1^4", 1.0, {0.5, 1.0});
  const GibbsEnsemble ens(spec, 3, 1);
  RngStream rng(1, 0);
  const SlotState x = ens.prior_draw(rng);
  const SlotState xi = ens.score(x);
  SlotState h{sample_increment(3, 1, 1.0, rng), sample_increment(3, 1, 1.0, rng)};
  double pairing = 0.0;
  for (int s = 0; s < 2; ++s) pairing += 3.0 * hs_inner(xi[s], h[s]);  // Re Tr
  const double eps = 1e-6;
  SlotState xp = x, xm = x;
  for (int s = 0; s < 2; ++s) {
    xp[s].axpy(eps, h[s]);
    xm[s].axpy(-eps, h[s]);
  }
  const double fd = (ens.log_density(xp) - ens.log_density(xm)) / (2.0 * eps);
  CHECK(std::abs(pairing - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
}

TEST_CASE("MALA detailed balance ratio is antisymmetric") {
  const GibbsEnsemble ens(word_spec(0.5, {0.2, 0.0}, "X1^4"), 4, 1);
  RngStream rng(2, 0);
  const SlotState x = ens.prior_draw(rng), y = ens.prior_draw(rng);
  CHECK(ens.mala_log_ratio(x, y, 0.1) == doctest::Approx(-ens.mala_log_ratio(y, x, 0.1)).epsilon(1e-10));
}

TEST_CASE("Gaussian ensemble moments") {
  const double c = 0.5;
  const GibbsEnsemble ens(quadratic_spec(c), 16, 1);
  MalaOptions o;
  o.samples = 300;
  o.burn_in = 300;
  RngStream rng(3, 0);
  const ChainsResult r = mala_chains(ens, o, 2, rng, 1);
  CHECK(r.r_hat < 1.1);
  std::vector<double> m2;
  for (const auto& s : r.pooled) m2.push_back(hs_norm2(s[0]));
  ValueEstimate e = mean_estimate(m2);
  double ess = 0.0;
  for (const auto& ch : r.chains) ess += ch.ess;
  e.std_error *= std::sqrt(static_cast<double>(m2.size()) / std::max(ess, 1.0));
  CHECK(std::abs(e.value - 1.0 / (1.0 + 2.0 * c)) <= 3.0 * e.std_error + 1e-3);
}

TEST_CASE("Schwinger-Dyson residuals vanish on the Gaussian ensemble") {
  const GibbsEnsemble ens(quadratic_spec(0.5), 16, 1);
  MalaOptions o;
  o.samples = 300;
  o.burn_in = 300;
  RngStream rng(4, 0);
  const ChainsResult r = mala_chains(ens, o, 2, rng, 1);
  for (const char* p : {"1", "X1", "X1^2", "X1^3"}) {
    const ValueEstimate e = sd_residual(ens, r.pooled, parse_polynomial(p), LetterRef{0, 0});
    CAPTURE(p);
    CHECK(std::abs(e.value) <= 3.0 * e.std_error + 1e-3);
  }
}

TEST_CASE("nonconvex specs are flagged") {
  PotentialSpec spec = word_spec(-0.1, {0.3, 0.0}, "X1^4");
  const GibbsEnsemble ens(spec, 4, 1);
  CHECK(ens.nonconvex());
}

TEST_CASE("concentration statistics") {
  const GibbsEnsemble ens(quadratic_spec(0.5), 8, 1);
  MalaOptions o;
  o.samples = 200;
  o.burn_in = 200;
  RngStream rng(5, 0);
  const MalaResult r = ens.sample(o, rng);
  const ConcentrationReport c = concentration_stats(r.samples, parse_polynomial("X1^2"));
  CHECK(c.samples == r.samples.size());
  CHECK(c.variance >= 0.0);
  CHECK(c.max_operator_norm >= c.mean_operator_norm);
  CHECK(c.mean == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("Catalan moments at large N") {
  const GibbsEnsemble ens(quadratic_spec(0.0 + 1e-9), 32, 1);
  MalaOptions o;
  o.samples = 150;
  o.burn_in = 200;
  RngStream rng(6, 0);
  const MalaResult r = ens.sample(o, rng);
  std::vector<double> m4;
  for (const auto& s : r.samples) {
    const Matrix x2 = s[0][0] * s[0][0];
    m4.push_back(tau_product_re(x2, x2));
  }
  CHECK(mean_estimate(m4).value == doctest::Approx(oracle::gue_fourth_moment(32)).epsilon(0.05));
}
