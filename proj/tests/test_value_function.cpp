#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlap/errors.hpp"
#include "mlap/value_function.hpp"
#include "oracles.hpp"

using namespace mlap;

namespace {

PotentialSpec zero_spec() {
  PotentialSpec s;
  s.times = {1.0};
  s.components = {PotentialComponent{0.0, 0.0, {0.0, 0.0}, {}}};
  return s;
}

const std::vector<HermitianTuple> kNoHistory;

double tuple_distance(const HermitianTuple& a, const HermitianTuple& b) { return std::sqrt(hs_norm2(a - b)); }

}  // namespace

TEST_CASE("zero potential has zero value and drift") {
  ValueQuery q;
  q.spec = zero_spec();
  q.t = 0.3;
  RngStream rng(1, 0);
  q.x = sample_normalized_increment(4, 1, 1.0, rng);
  const ValueEstimate v = value_h(q, rng);
  CHECK(std::abs(v.value) <= 1e-14);
  CHECK(hs_norm2(drift_logratio(q, rng).drift) <= 1e-28);
  CHECK(hs_norm2(drift_gradexp(q, rng).drift) <= 1e-28);
}

TEST_CASE("quadratic value matches the Gaussian oracle") {
  const double c = 0.5;
  ValueQuery q;
  q.spec = quadratic_spec(c);
  q.samples = 512;
  RngStream rng(2, 0);
  q.t = 0.0;
  q.x = HermitianTuple(6, 1);
  const ValueEstimate v0 = value_h(q, rng);
  CHECK(std::abs(v0.value - 0.5 * std::log(2.0)) <= 3.0 * v0.std_error + 1e-10);
  CHECK(v0.value == doctest::Approx(0.34657).epsilon(1e-4));

  for (double t : {0.25, 0.6, 0.9}) {
    q.t = t;
    q.x = sample_normalized_increment(6, 1, t, rng);
    const ValueEstimate v = value_h(q, rng);
    const double expect = oracle::quadratic_value(c, t, hs_norm2(q.x), 1);
    CHECK(std::abs(v.value - expect) <= 3.0 * v.std_error + 1e-10);
  }
}

TEST_CASE("quadratic drift") {
  const double c = 0.5;
  ValueQuery q;
  q.spec = quadratic_spec(c);
  RngStream rng(3, 0);
  q.t = 0.0;
  q.x = HermitianTuple(5, 2);
  CHECK(hs_norm2(drift_logratio(q, rng).drift) <= 1e-20);

  q.x = sample_normalized_increment(5, 2, 1.0, rng);
  const DriftEstimate d = drift_logratio(q, rng);
  CHECK(tuple_distance(d.drift, -0.5 * q.x) <= 3.0 * d.std_error + 1e-10);

  q.t = 0.5;
  const DriftEstimate d2 = drift_gradexp(q, rng);
  const double coef = oracle::quadratic_drift_coef(c, 0.5);
  CHECK(tuple_distance(d2.drift, coef * q.x) <= 3.0 * d2.std_error + 1e-8);
}

TEST_CASE("drift matches finite differences of the value") {
  const PotentialSpec spec = word_spec(0.5, {0.2, 0.0}, "X1^4");
  ValueFunction vf(spec, {}, ValueOptions{2048});
  RngStream base(4, 0);
  const HermitianTuple x = sample_normalized_increment(4, 1, 0.5, base);
  const HermitianTuple h = sample_normalized_increment(4, 1, 1.0, base);
  const double eps = 1e-4;
  RngStream r1 = base.substream(1), r2 = base.substream(1), r3 = base.substream(2);
  const ValueEstimate vp = vf.value(0.5, kNoHistory, x + eps * h, r1);
  const ValueEstimate vm = vf.value(0.5, kNoHistory, x - eps * h, r2);
  const double fd = (vp.value - vm.value) / (2.0 * eps);
  const DriftEstimate d = vf.drift(0.5, kNoHistory, x, r3);
  const double pairing = -hs_inner(d.drift, h);
  const double se = d.std_error * std::sqrt(hs_norm2(h));
  CHECK(std::abs(pairing - fd) <= 3.0 * se + 1e-3 * std::abs(fd) + 1e-6);
}

TEST_CASE("ratio and Gibbs-weighted drift estimators agree") {
  const PotentialSpec spec = word_spec(0.4, {0.15, 0.0}, "X1^4", 1.0, {0.5, 1.0});
  ValueFunction vf(spec, {}, ValueOptions{512});
  RngStream rng(5, 0);
  int failures = 0;
  for (int i = 0; i < 50; ++i) {
    const double t = 0.55 + 0.4 * rng.uniform();
    const std::vector<HermitianTuple> hist{sample_normalized_increment(3, 1, 0.5, rng)};
    const HermitianTuple x = hist[0] + sample_normalized_increment(3, 1, t - 0.5, rng);
    RngStream a = rng.substream(2 * i), b = rng.substream(2 * i + 1);
    const DriftEstimate d1 = vf.drift(t, hist, x, a);
    const DriftEstimate d2 = vf.drift_gradexp(t, hist, x, b);
    const double se = std::hypot(d1.std_error, d2.std_error);
    if (tuple_distance(d1.drift, d2.drift) > 3.0 * se + 1e-10) ++failures;
  }
  CHECK(failures <= 3);
}

TEST_CASE("semigroup composition") {
  const PotentialSpec spec = word_spec(0.5, {0.1, 0.0}, "X1^4");
  ValueFunction vf(spec, {}, ValueOptions{256});
  RngStream rng(6, 0);
  const HermitianTuple x = sample_normalized_increment(3, 1, 0.3, rng);
  RngStream a = rng.substream(1), b = rng.substream(2);
  const ValueEstimate direct = vf.value(0.3, kNoHistory, x, a);
  const ValueEstimate composed = semigroup_value(vf, 0.3, 0.3, kNoHistory, x, 256, b);
  CHECK(within_sigma(direct, composed, 3.0, 1e-3));
}

TEST_CASE("value is convex in x") {
  const PotentialSpec spec = word_spec(0.5, {0.1, 0.0}, "X1^4");
  ValueFunction vf(spec, {}, ValueOptions{1024});
  RngStream rng(7, 0);
  const HermitianTuple x = sample_normalized_increment(3, 1, 0.4, rng);
  const HermitianTuple y = sample_normalized_increment(3, 1, 0.4, rng);
  auto at = [&](const HermitianTuple& z) {
    RngStream r = rng.substream(99);
    return vf.value(0.4, kNoHistory, z, r).value;
  };
  CHECK(at(0.5 * (x + y)) <= 0.5 * (at(x) + at(y)) + 1e-3);
}

TEST_CASE("time regularity of the quadratic value has exponent one half or better") {
  const double c = 0.5;
  RngStream rng(8, 0);
  const HermitianTuple x = sample_normalized_increment(4, 1, 1.0, rng);
  ValueFunction vf(quadratic_spec(c));
  std::vector<double> ss, diffs;
  RngStream r0 = rng.substream(0);
  const double h0 = vf.value(0.2, kNoHistory, x, r0).value;
  for (double s : {0.01, 0.04, 0.16}) {
    RngStream r = rng.substream(1);
    ss.push_back(s);
    diffs.push_back(std::abs(vf.value(0.2 + s, kNoHistory, x, r).value - h0));
  }
  CHECK(loglog_fit(ss, diffs).slope >= 0.45);
}

TEST_CASE("invalid queries") {
  ValueQuery q;
  q.spec = quadratic_spec(0.5, 0.5);
  q.t = 0.8;
  q.x = HermitianTuple(3, 1);
  RngStream rng(9, 0);
  CHECK_THROWS_AS(value_h(q, rng), ConfigError);
  q.t = 1.5;
  CHECK_THROWS_AS(value_h(q, rng), ConfigError);
}
