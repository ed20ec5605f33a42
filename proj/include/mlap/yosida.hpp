#pragma once

#include <functional>
#include <limits>

#include "mlap/matrix_core.hpp"

namespace mlap {

/// Convex function on real coordinates. The gradient is optional; without it
/// the proximal map falls back to derivative-free descent.
struct ConvexFn {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  double lower_bound = -std::numeric_limits<double>::infinity();
  /// Lipschitz constant of the gradient, if known.
  double lipschitz = std::numeric_limits<double>::infinity();

  bool has_gradient() const { return static_cast<bool>(gradient); }
};

struct ProxOptions {
  double tolerance = 1e-8;
  int max_iterations = 20000;
};

struct ProxResult {
  RealCoords point;
  /// ||x - J - lambda grad g(J)|| with a gradient, or the final step size of
  /// the derivative-free search otherwise.
  double residual = 0.0;
  int iterations = 0;
};

/// argmin_y ||x - y||^2 / (2 lambda) + g(y). Throws NumericalError when the
/// residual tolerance is not reached. `warm` is an optional starting point.
ProxResult prox_solve(const ConvexFn& g, double lambda, const RealCoords& x, const ProxOptions& opts = {},
                      const RealCoords* warm = nullptr);

RealCoords prox(const ConvexFn& g, double lambda, const RealCoords& x);

/// g_lambda(x) = inf_y ||x - y||^2 / (2 lambda) + g(y).
double envelope(const ConvexFn& g, double lambda, const RealCoords& x);

/// A_lambda(x) = (x - J_lambda(x)) / lambda.
RealCoords yosida_gradient(const ConvexFn& g, double lambda, const RealCoords& x,
                           const RealCoords* warm = nullptr);

/// Closed-form test functions.
ConvexFn half_square_fn();  // 1/2 ||y||^2
ConvexFn l1_fn();           // sum |y_i|, no gradient
ConvexFn logcosh_fn();      // sum log cosh(y_i) + 1/4 ||y||^4

struct YosidaSuiteReport {
  /// Max absolute errors against closed forms on random points: prox of l1
  /// (soft threshold), envelope of l1 (Huber), prox of 1/2 ||y||^2.
  double soft_threshold_error = 0.0;
  double huber_error = 0.0;
  double half_square_error = 0.0;
  /// max ||J x - J y|| / ||x - y|| over the random pairs.
  double worst_contraction = 0.0;
  /// max lambda ||A x - A y|| / ||x - y|| over the random pairs.
  double worst_lipschitz = 0.0;
  /// Largest increase of g_lambda(x) along an increasing lambda ladder.
  double worst_envelope_increase = 0.0;
  int pairs = 0;
};

/// Random-pair property checks on l1 and logcosh in dimension `dim`.
YosidaSuiteReport yosida_suite(int pairs, int dim, double lambda, RngStream& rng);

}  // namespace mlap
