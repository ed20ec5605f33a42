#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlap/errors.hpp"
#include "mlap/nc_poly.hpp"

using namespace mlap;

namespace {

HermitianTuple random_tuple(int n, int m, RngStream& rng) { return sample_normalized_increment(n, m, 1.0, rng); }

NCPolynomial random_poly(int letters, int max_len, int terms, RngStream& rng) {
  std::vector<Term> out;
  for (int k = 0; k < terms; ++k) {
    const int len = static_cast<int>(rng.uniform() * (max_len + 1));
    Word w;
    for (int j = 0; j < len; ++j) {
      const int idx = std::min(letters - 1, static_cast<int>(rng.uniform() * letters));
      w.push_back(Letter{LetterKind::SelfAdjoint, idx, 0, 1});
    }
    out.push_back(Term{Complex(rng.normal(), 0.0), w});
  }
  return NCPolynomial(out);
}

// Tensor term a (x) b evaluated as tau(a) tau(b) by hand.
Complex direct_bitrace(const std::vector<std::pair<Matrix, Matrix>>& parts) {
  Complex s = 0.0;
  for (const auto& [a, b] : parts) s += tau(a) * tau(b);
  return s;
}

}  // namespace

TEST_CASE("parsing and canonical text") {
  CHECK(to_string(parse_polynomial("X1 X1")) == to_string(parse_polynomial("X1^2")));
  const NCPolynomial p = parse_polynomial("2*X2 X1 + X1 - 0.5*X1 + (0,1)*u1 v2^-1");
  CHECK(parse_polynomial(to_string(p)) == p);
  CHECK(parse_polynomial("X1 - X1").is_zero());
  CHECK_THROWS_AS(parse_polynomial("X0"), ConfigError);
  CHECK_THROWS_AS(parse_polynomial("X1^-1"), ConfigError);
  const Letter l = parse_letter("u2@3^-1");
  CHECK(l.kind == LetterKind::Cayley);
  CHECK(l.index == 1);
  CHECK(l.slot == 2);
  CHECK(l.power == -1);
}

TEST_CASE("max degree is enforced") {
  CHECK_THROWS(parse_polynomial("X1^5", 4));
  CHECK(parse_polynomial("X1^4", 4).degree() == 4);
}

TEST_CASE("eval") {
  RngStream rng(1, 0);
  CHECK((eval(parse_polynomial("X1"), HermitianTuple::identity(4, 1)) - Matrix::Identity(4, 4)).norm() == 0.0);

  Matrix d = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) d(i, i) = rng.normal();
  const HermitianTuple commuting(std::vector<Matrix>{d, d * d});
  CHECK(eval(parse_polynomial("X1 X2 - X2 X1"), commuting).norm() <= 1e-14);

  const HermitianTuple zero(3, 1);
  CHECK((eval(parse_polynomial("u1"), zero) + Matrix::Identity(3, 3)).norm() <= 1e-14);

  CHECK_THROWS(eval(parse_polynomial("X3"), HermitianTuple(3, 2)));
}

TEST_CASE("free difference quotient") {
  CHECK(free_difference_quotient(parse_polynomial("X1"), 0) ==
        TensorPolynomial({TensorTerm{1.0, Word{}, Word{}}}));

  const Word x1 = parse_word("X1"), x2 = parse_word("X2");
  CHECK(free_difference_quotient(parse_polynomial("X1^2"), 0) ==
        TensorPolynomial({TensorTerm{1.0, Word{}, x1}, TensorTerm{1.0, x1, Word{}}}));
  CHECK(free_difference_quotient(parse_polynomial("X2 X1 X2"), 0) == TensorPolynomial({TensorTerm{1.0, x2, x2}}));
  CHECK(free_difference_quotient(parse_polynomial("u1 v1 X2"), 0).is_zero());
}

TEST_CASE("Leibniz rule on random polynomials") {
  RngStream rng(17, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const NCPolynomial p = random_poly(2, 2, 3, rng), q = random_poly(2, 2, 3, rng);
    const TensorPolynomial lhs = free_difference_quotient(p * q, 0);
    const TensorPolynomial rhs =
        free_difference_quotient(p, 0).mul_right(q) + free_difference_quotient(q, 0).mul_left(p);
    CHECK(lhs == rhs);
  }
}

TEST_CASE("cyclic gradient") {
  CHECK(cyclic_gradient(parse_polynomial("X1^2"), 0) == parse_polynomial("2*X1"));
  CHECK(cyclic_gradient(parse_polynomial("X1 X2 X1 X2"), 0) == parse_polynomial("2*X2 X1 X2"));
  CHECK(cyclic_gradient(parse_polynomial("X1 X2") + parse_polynomial("X1"), 1) == parse_polynomial("X1"));
}

TEST_CASE("cyclic gradient matches finite differences") {
  RngStream rng(23, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const NCPolynomial p = random_poly(2, 4, 4, rng);
    const HermitianTuple x = random_tuple(4, 2, rng);
    const HermitianTuple h = random_tuple(4, 2, rng);
    const Matrix g = eval(cyclic_gradient(p, 0), x);
    const double pairing = tau_product_re(g, h[0]);
    const double eps = 1e-5;
    HermitianTuple xp = x, xm = x;
    xp[0] += eps * h[0];
    xm[0] -= eps * h[0];
    const double fd = (std::real(tau(eval(p, xp))) - std::real(tau(eval(p, xm)))) / (2.0 * eps);
    worst = std::max(worst, std::abs(pairing - fd) / std::max(1.0, std::abs(fd)));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("bitrace") {
  RngStream rng(5, 0);
  const HermitianTuple x = random_tuple(6, 1, rng);
  CHECK(std::abs(bitrace(TensorPolynomial({TensorTerm{1.0, Word{}, Word{}}}), x) - Complex(1.0)) <= 1e-15);

  HermitianTuple traceless = x;
  traceless[0] -= tau(x[0]) * Matrix::Identity(6, 6);
  CHECK(std::abs(bitrace(TensorPolynomial({TensorTerm{1.0, parse_word("X1"), Word{}}}), traceless)) <= 1e-14);

  const Matrix id = Matrix::Identity(6, 6), a = x[0], a2 = a * a;
  const Complex expect = direct_bitrace({{id, a2}, {a, a}, {a2, id}});
  CHECK(std::abs(bitrace(free_difference_quotient(parse_polynomial("X1^3"), 0), x) - expect) <= 1e-12);
  CHECK(std::abs(expect - (2.0 * tau(a2) + tau(a) * tau(a))) <= 1e-12);
}

TEST_CASE("trace is invariant under cyclic rotation") {
  RngStream rng(8, 0);
  const HermitianTuple x = random_tuple(5, 3, rng);
  const Complex a = tau(eval(parse_polynomial("X1 X2 X3 X2"), x));
  const Complex b = tau(eval(parse_polynomial("X2 X3 X2 X1"), x));
  CHECK(std::abs(a - b) <= 1e-12);
}
