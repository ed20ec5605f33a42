#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mlap/errors.hpp"
#include "mlap/potentials.hpp"

using namespace mlap;

namespace {

HermitianTuple scaled_to(const HermitianTuple& x, double target) {
  return std::sqrt(target / hs_norm2(x)) * x;
}

PotentialSpec pure_quadratic() {
  PotentialSpec s;
  s.times = {1.0};
  s.p = 2.0;
  s.components = {PotentialComponent{0.0, 1.0, {0.0, 0.0}, {}}};
  return s;
}

}  // namespace

TEST_CASE("eval_potential examples") {
  RngStream rng(1, 0);
  const PotentialSpec s = pure_quadratic();
  const std::vector<HermitianTuple> zero{HermitianTuple(4, 1)};
  CHECK(eval_potential(s, zero) == 0.0);

  const std::vector<HermitianTuple> half{scaled_to(sample_normalized_increment(4, 1, 1.0, rng), 0.5)};
  CHECK(eval_potential(s, half) == doctest::Approx(0.5).epsilon(1e-12));

  PotentialSpec two = s;
  two.components.push_back(two.components.front());
  CHECK(eval_potential(two, half) == doctest::Approx(std::sqrt(2.0) * 0.5).epsilon(1e-12));

  const std::vector<HermitianTuple> too_many{half[0], half[0]};
  CHECK_THROWS_AS(eval_potential(s, too_many), ConfigError);
}

TEST_CASE("gradient examples") {
  RngStream rng(2, 0);
  const std::vector<HermitianTuple> x{sample_normalized_increment(5, 2, 1.0, rng)};
  const auto g = gradient_potential(quadratic_spec(1.0), x);
  CHECK((g[0] - 2.0 * x[0]).is_hermitian());
  for (int k = 0; k < 2; ++k) CHECK((g[0][k] - 2.0 * x[0][k]).norm() <= 1e-12);

  const auto per = gradient_potential(quadratic_spec(1.0), x, {}, GradientScale::PerCoordinate);
  CHECK((per[0][0] - std::sqrt(5.0) * g[0][0]).norm() <= 1e-12);

  const PotentialSpec plain = word_spec(1.0, {0.2, 0.0}, "X1 X2 X1 X2");
  RngStream urng(3, 0);
  const UnitaryTuple u({cayley(sample_normalized_increment(5, 1, 1.0, urng)[0])});
  const auto g1 = gradient_potential(plain, x);
  const auto g2 = gradient_potential(plain, x, u);
  for (int k = 0; k < 2; ++k) CHECK((g1[0][k] - g2[0][k]).norm() <= 1e-14);
}

TEST_CASE("gradient matches finite differences on Cayley and extern words") {
  RngStream rng(4, 0);
  const UnitaryTuple u({cayley(sample_normalized_increment(4, 1, 1.0, rng)[0])});
  PotentialSpec spec = word_spec(0.8, {0.3, -0.2}, "X1 u2 X1 v1 u1^-1", 2.0, {0.5, 1.0});
  spec.components.push_back(PotentialComponent{1.5, 0.6, {0.1, 0.4}, parse_polynomial("u1@2 X2@1 X2@2")});
  spec.p = 3.0;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<HermitianTuple> x{sample_normalized_increment(4, 2, 0.5, rng),
                                        sample_normalized_increment(4, 2, 1.0, rng)};
    const std::vector<HermitianTuple> h{sample_normalized_increment(4, 2, 1.0, rng),
                                        sample_normalized_increment(4, 2, 1.0, rng)};
    const auto g = gradient_potential(spec, x, u);
    double pairing = 0.0;
    for (int s = 0; s < 2; ++s) pairing += hs_inner(g[s], h[s]);
    const double eps = 1e-5;
    std::vector<HermitianTuple> xp = x, xm = x;
    for (int s = 0; s < 2; ++s) {
      xp[s].axpy(eps, h[s]);
      xm[s].axpy(-eps, h[s]);
    }
    const double fd = (eval_potential(spec, xp, u) - eval_potential(spec, xm, u)) / (2.0 * eps);
    worst = std::max(worst, std::abs(pairing - fd) / std::max(1.0, std::abs(fd)));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("bridge potential") {
  RngStream rng(5, 0);
  const std::vector<double> one{1.0};
  const std::vector<HermitianTuple> zero{HermitianTuple(3, 1)};
  CHECK(eval_bridge_potential(one, zero) == 0.0);

  const HermitianTuple x = scaled_to(sample_normalized_increment(3, 1, 1.0, rng), 1.0);
  const std::vector<HermitianTuple> single{x};
  CHECK(eval_bridge_potential(one, single) == doctest::Approx(0.5).epsilon(1e-12));

  const std::vector<double> two{0.5, 1.0};
  const std::vector<HermitianTuple> pair{x, x};
  CHECK(eval_bridge_potential(two, pair) == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<double> bad{1.0, 0.5};
  CHECK_THROWS_AS(eval_bridge_potential(bad, pair), ConfigError);

  const std::vector<double> three{0.2, 0.5, 1.0};
  const std::vector<HermitianTuple> xs{sample_normalized_increment(3, 2, 1.0, rng),
                                       sample_normalized_increment(3, 2, 1.0, rng),
                                       sample_normalized_increment(3, 2, 1.0, rng)};
  const std::vector<HermitianTuple> h{sample_normalized_increment(3, 2, 1.0, rng),
                                      sample_normalized_increment(3, 2, 1.0, rng),
                                      sample_normalized_increment(3, 2, 1.0, rng)};
  const auto g = bridge_gradient(three, xs);
  double pairing = 0.0;
  for (int s = 0; s < 3; ++s) pairing += hs_inner(g[s], h[s]);
  const double eps = 1e-5;
  std::vector<HermitianTuple> xp = xs, xm = xs;
  for (int s = 0; s < 3; ++s) {
    xp[s].axpy(eps, h[s]);
    xm[s].axpy(-eps, h[s]);
  }
  const double fd = (eval_bridge_potential(three, xp) - eval_bridge_potential(three, xm)) / (2.0 * eps);
  CHECK(std::abs(pairing - fd) <= 1e-7 * std::max(1.0, std::abs(fd)));
}

TEST_CASE("json round trip is exact") {
  PotentialSpec s = word_spec(0.3, {0.125, -1.0 / 3.0}, "X1 u2 X1 u2^-1", 1.1, {0.25, 1.0});
  s.p = std::numeric_limits<double>::infinity();
  s.offset = 0.1;
  const nlohmann::json j = spec_to_json(s);
  const PotentialSpec back = spec_from_json(nlohmann::json::parse(j.dump()));
  CHECK(spec_to_json(back).dump() == j.dump());
  CHECK(back.components[0].lambda.imag() == s.components[0].lambda.imag());
  CHECK(std::isinf(back.p));
}

TEST_CASE("invalid specs name the field") {
  nlohmann::json j = spec_to_json(quadratic_spec(0.5));
  j["p"] = 1.5;
  try {
    spec_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "p");
  }
  nlohmann::json k = spec_to_json(quadratic_spec(0.5));
  k["times"] = {0.5, 0.25};
  CHECK_THROWS_AS(spec_from_json(k), ConfigError);
}

TEST_CASE("convexity and regularity probes") {
  RngStream rng(6, 0);
  const PotentialSpec s = word_spec(1.0, {0.05, 0.0}, "X1 X2 X1 X2");
  CHECK(s.convex_mode());
  CHECK(convexity_probe(s, 4, 2, 500, rng) <= 1e-9);

  std::vector<double> second;
  for (int n : {4, 8, 16}) {
    const RegularityReport r = regularity_constants(s, n, 2, 100, rng);
    CHECK(std::isfinite(r.subquadratic));
    CHECK(std::isfinite(r.lipschitz));
    second.push_back(r.second_difference);
  }
  CHECK(second[2] <= 3.0 * second[0] + 1e-9);
}

TEST_CASE("lower bound enforcement") {
  RngStream rng(7, 0);
  PotentialSpec s = word_spec(0.5, {0.0, 0.0}, "X1", 0.0);
  const LowerBoundReport r = enforce_lower_bound(s, 4, 1, 16, rng);
  CHECK(r.shifted);
  CHECK(!r.warning.empty());
  CHECK(s.components[0].offset >= 1.0);
}
