#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mlap/errors.hpp"
#include "mlap/estimate.hpp"
#include "mlap/sde.hpp"
#include "oracles.hpp"

using namespace mlap;

namespace {

DriftField zero_field() {
  DriftField f;
  f.fn = [](double, std::span<const double>, std::span<const HermitianTuple> s) {
    return HermitianTuple(s.back().n(), s.back().m());
  };
  f.lipschitz = 0.0;
  f.monotone = true;
  return f;
}

DriftField linear_field(double k) {
  DriftField f;
  f.fn = [k](double, std::span<const double>, std::span<const HermitianTuple> s) { return k * s.back(); };
  f.lipschitz = std::abs(k);
  f.monotone = k <= 0.0;
  return f;
}

}  // namespace

TEST_CASE("grid contains the requested times") {
  const std::vector<double> inc{0.3, 0.55};
  const auto g = uniform_grid(1.0, 10, inc);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK(std::find(g.begin(), g.end(), 0.3) != g.end());
  CHECK(std::find(g.begin(), g.end(), 0.55) != g.end());
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
}

TEST_CASE("zero drift reproduces the Brownian path") {
  RngStream rng(1, 0);
  const auto grid = uniform_grid(1.0, 20);
  const auto inc = sample_path_increments(4, 2, grid, rng);
  const HermitianTuple x0(4, 2);
  const ControlledPath p = euler_maruyama(zero_field(), x0, grid, inc);
  HermitianTuple w = x0;
  for (std::size_t i = 0; i < inc.size(); ++i) {
    w += inc[i];
    CHECK(hs_norm2(p.states[i + 1] - w) <= 1e-28);
  }
  CHECK(hs_norm2(p.states.front()) == 0.0);
}

TEST_CASE("OU second moment") {
  const auto grid = uniform_grid(1.0, 200);
  RngStream rng(2, 0);
  std::vector<double> m2;
  for (int p = 0; p < 400; ++p) {
    RngStream r = rng.substream(static_cast<std::uint64_t>(p));
    const ControlledPath path = euler_maruyama(linear_field(-1.0), HermitianTuple(6, 1), grid, r);
    m2.push_back(hs_norm2(path.states.back()));
  }
  const ValueEstimate e = mean_estimate(m2);
  const double dt = 1.0 / 200;
  CHECK(std::abs(e.value - oracle::ou_second_moment(1.0)) <= 3.0 * e.std_error + dt);
}

TEST_CASE("OU strong error is first order") {
  const double T = 1.0;
  const int fine = 1024;
  const auto grid_fine = uniform_grid(T, fine);
  std::vector<double> errs, dts;
  for (int factor : {8, 16, 32}) {
    double err = 0.0;
    for (int p = 0; p < 20; ++p) {
      RngStream r(3, static_cast<std::uint64_t>(p));
      const auto inc = sample_path_increments(3, 1, grid_fine, r);
      // Exact OU transition driven by the same noise: the fine exponential scheme.
      HermitianTuple exact(3, 1);
      const double h = T / fine;
      for (const auto& d : inc) exact = std::exp(-h) * exact + d;
      const auto coarse = coarsen_increments(inc, factor);
      const auto grid = uniform_grid(T, fine / factor);
      const ControlledPath path = euler_maruyama(linear_field(-1.0), HermitianTuple(3, 1), grid, coarse);
      err += std::sqrt(hs_norm2(path.states.back() - exact));
    }
    errs.push_back(err / 20);
    dts.push_back(static_cast<double>(factor) / fine);
  }
  CHECK(loglog_fit(dts, errs).slope == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("explosion aborts") {
  const auto grid = uniform_grid(1.0, 10);
  RngStream rng(4, 0);
  DriftField wild = linear_field(1e4);
  wild.lipschitz = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(euler_maruyama(wild, HermitianTuple::identity(2, 1), grid, rng), NumericalError);
  CHECK_THROWS_AS(euler_maruyama(linear_field(1e4), HermitianTuple::identity(2, 1), grid, rng), ConfigError);
}

TEST_CASE("Yosida scheme converges to the gradient scheme") {
  const double c = 0.5;
  const PotentialSpec spec = quadratic_spec(c);
  const int n = 3, m = 1;
  const auto grid = uniform_grid(1.0, 50);
  RngStream rng(5, 0);
  const auto inc = sample_path_increments(n, m, grid, rng);
  const ConvexFn g = potential_convex_fn(spec, n, m);
  const ConvexFamily fam = [&](double) { return g; };
  const HermitianTuple x0 = HermitianTuple::identity(n, m);
  const ControlledPath exact = euler_maruyama(linear_field(-2.0 * c), x0, grid, inc);
  double prev = 1e300;
  for (double lambda : {0.1, 0.01, 0.001}) {
    const ControlledPath p = euler_yosida(fam, lambda, x0, grid, inc);
    const double d = hs_norm2(p.states.back() - exact.states.back());
    CHECK(d <= prev);
    prev = d;
  }
  CHECK(prev <= 1e-5);
}

TEST_CASE("Yosida paths are Cauchy in lambda") {
  const auto grid = uniform_grid(1.0, 100);
  RngStream rng(6, 0);
  const auto inc = sample_path_increments(1, 3, grid, rng);
  const ConvexFamily fam = [](double) { return l1_fn(); };
  const HermitianTuple x0 = HermitianTuple::identity(1, 3);
  const ControlledPath a = euler_yosida(fam, 0.1, x0, grid, inc);
  const ControlledPath b = euler_yosida(fam, 0.05, x0, grid, inc);
  double sup = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i) sup = std::max(sup, hs_norm2(a.states[i] - b.states[i]));
  const double k = sup / (0.1 + 0.05);
  CHECK(std::isfinite(k));
  CHECK(k <= 1.0);
}

TEST_CASE("Langevin stationary second moments") {
  LangevinOptions o;
  o.horizon = 6.0;
  o.dt = 0.02;
  for (double c : {0.0, 0.5}) {
    std::vector<double> m2;
    PotentialSpec spec = quadratic_spec(c);
    if (c == 0.0) spec.components[0].quad = 0.0;
    for (int p = 0; p < 40; ++p) {
      RngStream r(7, static_cast<std::uint64_t>(p));
      m2.push_back(hs_norm2(langevin_stationary(spec, HermitianTuple(16, 1), o, r).state));
    }
    const ValueEstimate e = mean_estimate(m2);
    CHECK(std::abs(e.value - 1.0 / (1.0 + 2.0 * c)) <= 3.0 * e.std_error + 0.01);
  }
}

TEST_CASE("Langevin coupling contracts") {
  LangevinOptions o;
  o.horizon = 4.0;
  o.dt = 0.01;
  RngStream rng(8, 0);
  const PotentialSpec spec = word_spec(0.5, {0.1, 0.0}, "X1^4");
  const HermitianTuple x = sample_normalized_increment(6, 1, 1.0, rng);
  const HermitianTuple y = sample_normalized_increment(6, 1, 4.0, rng);
  const CouplingReport r = langevin_coupling(spec, x, y, o, rng);
  CHECK(r.initial > 0.0);
  CHECK(r.worst_ratio <= 1.0 + 1e-9);
}

TEST_CASE("Picard iteration") {
  RngStream rng(9, 0);
  PicardOptions o;
  o.paths = 200;
  PotentialSpec zero = quadratic_spec(0.5);
  zero.components[0].quad = 0.0;
  const PicardReport r0 = picard_fbsde(zero, HermitianTuple(3, 1), o, rng);
  CHECK(r0.converged);
  CHECK(r0.iterations <= 1);

  const double c = 0.5;
  const PicardReport r = picard_fbsde(quadratic_spec(c, o.horizon), HermitianTuple::identity(3, 1), o, rng);
  CHECK(r.converged);
  CHECK(r.decay_ratio < 1.0);
  // Feedback at time t is 2c y / (1 + 2c (T - t)); the start node is deterministic.
  const std::size_t mid = static_cast<std::size_t>(o.steps / 2);
  const double t = o.horizon * mid / o.steps;
  const double slope = r.coefficients[mid][0][1];
  CHECK(slope == doctest::Approx(2.0 * c / (1.0 + 2.0 * c * (o.horizon - t))).epsilon(0.1));
}
