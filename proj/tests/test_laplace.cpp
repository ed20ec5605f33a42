#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlap/errors.hpp"
#include "mlap/laplace.hpp"
#include "oracles.hpp"

using namespace mlap;

TEST_CASE("direct Laplace functional of a quadratic") {
  for (double c : {0.25, 0.5, 1.0}) {
    LhsOptions o;
    o.samples = 4000;
    RngStream rng(1, 0);
    const LhsResult r = lhs_log_laplace(quadratic_spec(c), 6, 1, o, rng);
    CAPTURE(c);
    CHECK(std::abs(r.estimate.value - oracle::quadratic_laplace(c, 1)) <= 3.0 * r.estimate.std_error + 1e-9);
    CHECK(r.estimate.value == doctest::Approx(0.5 * std::log(1.0 + 2.0 * c)).epsilon(1e-3));
  }
}

TEST_CASE("scale tuning reduces the error over plain Monte Carlo") {
  LhsOptions plain;
  plain.samples = 2000;
  plain.tune_scale = false;
  LhsOptions tuned = plain;
  tuned.tune_scale = true;
  RngStream a(2, 0), b(2, 0);
  const PotentialSpec spec = quadratic_spec(1.0);
  const LhsResult rp = lhs_log_laplace(spec, 8, 1, plain, a);
  const LhsResult rt = lhs_log_laplace(spec, 8, 1, tuned, b);
  CHECK(rt.estimate.std_error <= rp.estimate.std_error);
  CHECK(rt.scale < 1.0);
}

TEST_CASE("multi-slot Gaussian potential") {
  // g = c tau(X(1/2)^2) + c tau(X(1)^2) is Gaussian; the exact answer is
  // 1/2 log det(I + 2c Sigma) with Sigma the covariance of (W_1/2, W_1).
  const double c = 0.5;
  PotentialSpec spec = quadratic_spec(c);
  spec.times = {0.5, 1.0};
  LhsOptions o;
  o.samples = 4000;
  RngStream rng(3, 0);
  const LhsResult r = lhs_log_laplace(spec, 6, 1, o, rng);
  Eigen::Matrix2d sigma;
  sigma << 0.5, 0.5, 0.5, 1.0;
  const double expect = 0.5 * std::log((Eigen::Matrix2d::Identity() + 2.0 * c * sigma).determinant());
  CHECK(std::abs(r.estimate.value - expect) <= 3.0 * r.estimate.std_error + 1e-9);
}

TEST_CASE("controlled cost matches the Gaussian oracle") {
  const double c = 0.5;
  RhsOptions o;
  o.paths = 64;
  o.steps = 100;
  o.inner = 32;
  o.threads = 1;
  RngStream rng(4, 0);
  const RhsResult r = rhs_control_cost(quadratic_spec(c), 8, 1, o, rng);
  const double expect = oracle::quadratic_laplace(c, 1);
  CHECK(std::abs(r.total.value - expect) <= 3.0 * r.total.std_error + 0.01);
  CHECK(std::abs(r.control.value - oracle::quadratic_control_cost(c)) <= 3.0 * r.control.std_error + 0.01);
  CHECK(r.endpoint_m2.size() == o.paths);
}

TEST_CASE("perturbed drifts cost more") {
  const double c = 0.5;
  RhsOptions o;
  o.paths = 32;
  o.steps = 50;
  o.inner = 16;
  o.threads = 1;
  RngStream a(5, 0), b(5, 0);
  const RhsResult r0 = rhs_control_cost(quadratic_spec(c), 6, 1, o, a);
  o.perturbation = 0.5;
  const RhsResult r1 = rhs_control_cost(quadratic_spec(c), 6, 1, o, b);
  CHECK(r1.total.value > r0.total.value);
}

TEST_CASE("convergence in N") {
  LhsOptions lhs;
  lhs.samples = 2000;
  RhsOptions rhs;
  rhs.paths = 32;
  rhs.steps = 50;
  rhs.inner = 16;
  rhs.threads = 1;
  RngStream rng(6, 0);
  const LaplaceReport rep = n_convergence(quadratic_spec(0.5), {4, 8}, 1, lhs, rhs, rng);
  CHECK(rep.rows.size() == 2);
  for (const auto& row : rep.rows) CHECK(row.pass);
  CHECK(!rep.drift_detected);
  CHECK(rep.extrapolated == doctest::Approx(0.5 * std::log(2.0)).epsilon(0.05));
}

TEST_CASE("bad sizes are rejected") {
  RngStream rng(7, 0);
  CHECK_THROWS_AS(lhs_log_laplace(quadratic_spec(0.5), 0, 1, {}, rng), ConfigError);
}
