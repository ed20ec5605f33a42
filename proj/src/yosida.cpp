#include "mlap/yosida.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "mlap/errors.hpp"

namespace mlap {

namespace {

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive", "lambda");
}

ProxResult prox_gradient(const ConvexFn& g, double lambda, const Vector& x, const ProxOptions& opts,
                         const Vector& start) {
  auto phi = [&](const Vector& y) { return (x - y).squaredNorm() / (2.0 * lambda) + g.value(y); };
  auto grad = [&](const Vector& y) -> Vector { return (y - x) / lambda + g.gradient(y); };
  const double scale = 1.0 + x.norm();
  double step = std::isfinite(g.lipschitz) ? 1.0 / (1.0 / lambda + g.lipschitz) : lambda;

  Vector y = start;
  Vector gy = grad(y);
  double fy = phi(y);
  ProxResult r;
  for (int it = 0; it < opts.max_iterations; ++it) {
    r.residual = lambda * gy.norm();
    r.iterations = it;
    if (r.residual <= opts.tolerance * scale) {
      r.point.values = y;
      return r;
    }
    // Barzilai-Borwein step with Armijo backtracking.
    const double g2 = gy.squaredNorm();
    Vector next, gn;
    double fn = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      next = y - step * gy;
      fn = phi(next);
      if (fn <= fy - 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      gn = grad(next);
      if (std::abs(fn - fy) <= 1e-12 * (1.0 + std::abs(fy)) && gn.norm() < gy.norm()) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    gn = grad(next);
    const Vector sdiff = next - y, gdiff = gn - gy;
    const double curv = sdiff.dot(gdiff);
    step = curv > 0.0 ? std::min(lambda, sdiff.squaredNorm() / curv) : lambda;
    y = std::move(next);
    gy = std::move(gn);
    fy = fn;
  }
  std::ostringstream os;
  os << "prox did not converge after " << r.iterations << " iterations (residual " << r.residual << ")";
  throw NumericalError(os.str());
}

/// Minimizes a 1-D convex function near `center` by bracketing and golden section.
double minimize_1d(const std::function<double(double)>& f, double center, double width, double tol) {
  double a = center - width, b = center, c = center + width;
  double fa = f(a), fb = f(b), fc = f(c);
  for (int k = 0; k < 200 && !(fb <= fa && fb <= fc); ++k) {
    if (fa < fb) {
      c = b;
      fc = fb;
      b = a;
      fb = fa;
      a = b - 2.0 * (c - b);
      fa = f(a);
    } else {
      a = b;
      fa = fb;
      b = c;
      fb = fc;
      c = b + 2.0 * (b - a);
      fc = f(c);
    }
  }
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = a, hi = c;
  double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol * (1.0 + std::abs(b))) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = f(x2);
    }
  }
  const double mid = 0.5 * (lo + hi);
  return f(mid) <= fb ? mid : b;
}

ProxResult prox_derivative_free(const ConvexFn& g, double lambda, const Vector& x, const ProxOptions& opts,
                                const Vector& start) {
  auto phi = [&](const Vector& y) { return (x - y).squaredNorm() / (2.0 * lambda) + g.value(y); };
  Vector y = start;
  const int d = static_cast<int>(y.size());
  ProxResult r;
  double last = phi(y);
  for (int sweep = 0; sweep < opts.max_iterations; ++sweep) {
    double moved = 0.0;
    for (int i = 0; i < d; ++i) {
      auto fi = [&](double v) {
        Vector t = y;
        t[i] = v;
        return phi(t);
      };
      const double width = std::max(1e-3, std::abs(x[i] - y[i]) + lambda);
      const double v = minimize_1d(fi, y[i], width, 1e-13);
      moved = std::max(moved, std::abs(v - y[i]));
      y[i] = v;
    }
    const double now = phi(y);
    r.iterations = sweep + 1;
    r.residual = moved;
    if (moved <= opts.tolerance * 1e-2 || std::abs(last - now) <= 1e-15 * (1.0 + std::abs(now))) {
      r.point.values = y;
      return r;
    }
    last = now;
  }
  r.point.values = y;
  if (r.residual > opts.tolerance) {
    std::ostringstream os;
    os << "derivative-free prox did not converge (last move " << r.residual << ")";
    throw NumericalError(os.str());
  }
  return r;
}

}  // namespace

ProxResult prox_solve(const ConvexFn& g, double lambda, const RealCoords& x, const ProxOptions& opts,
                      const RealCoords* warm) {
  check_lambda(lambda);
  if (!g.value) throw ConfigError("convex function has no evaluator", "g");
  const Vector start = (warm && warm->dim() == x.dim()) ? warm->values : x.values;
  if (g.has_gradient()) return prox_gradient(g, lambda, x.values, opts, start);
  return prox_derivative_free(g, lambda, x.values, opts, start);
}

RealCoords prox(const ConvexFn& g, double lambda, const RealCoords& x) {
  return prox_solve(g, lambda, x).point;
}

double envelope(const ConvexFn& g, double lambda, const RealCoords& x) {
  const RealCoords j = prox(g, lambda, x);
  return (x.values - j.values).squaredNorm() / (2.0 * lambda) + g.value(j.values);
}

RealCoords yosida_gradient(const ConvexFn& g, double lambda, const RealCoords& x, const RealCoords* warm) {
  const RealCoords j = prox_solve(g, lambda, x, {}, warm).point;
  return RealCoords{(x.values - j.values) / lambda};
}

ConvexFn half_square_fn() {
  ConvexFn f;
  f.value = [](const Vector& y) { return 0.5 * y.squaredNorm(); };
  f.gradient = [](const Vector& y) -> Vector { return y; };
  f.lower_bound = 0.0;
  f.lipschitz = 1.0;
  return f;
}

ConvexFn l1_fn() {
  ConvexFn f;
  f.value = [](const Vector& y) { return y.lpNorm<1>(); };
  f.lower_bound = 0.0;
  return f;
}

ConvexFn logcosh_fn() {
  ConvexFn f;
  f.value = [](const Vector& y) {
    double s = 0.0;
    for (double v : y) s += std::abs(v) + std::log1p(std::exp(-2.0 * std::abs(v))) - std::log(2.0);
    return s + 0.25 * y.squaredNorm() * y.squaredNorm();
  };
  f.gradient = [](const Vector& y) -> Vector { return y.array().tanh().matrix() + y.squaredNorm() * y; };
  f.lower_bound = 0.0;
  return f;
}

YosidaSuiteReport yosida_suite(int pairs, int dim, double lambda, RngStream& rng) {
  check_lambda(lambda);
  if (pairs < 1 || dim < 1) throw ConfigError("pairs and dim must be positive", "pairs");
  YosidaSuiteReport r;
  r.pairs = pairs;
  const ConvexFn l1 = l1_fn(), sq = half_square_fn(), lc = logcosh_fn();
  auto draw = [&] {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = 2.0 * rng.normal();
    return RealCoords{v};
  };
  for (int k = 0; k < std::min(pairs, 200); ++k) {
    const RealCoords x = draw();
    const Vector j = prox(l1, lambda, x).values;
    double env = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double v = x.values(i), a = std::abs(v);
      const double soft = std::copysign(std::max(0.0, a - lambda), v);
      r.soft_threshold_error = std::max(r.soft_threshold_error, std::abs(j(i) - soft));
      env += a <= lambda ? v * v / (2.0 * lambda) : a - 0.5 * lambda;
    }
    r.huber_error = std::max(r.huber_error, std::abs(envelope(l1, lambda, x) - env));
    const Vector js = prox(sq, lambda, x).values;
    r.half_square_error = std::max(r.half_square_error, (js - x.values / (1.0 + lambda)).lpNorm<Eigen::Infinity>());
  }
  r.worst_envelope_increase = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < pairs; ++k) {
    const ConvexFn& g = k % 2 == 0 ? lc : l1;
    const RealCoords x = draw(), y = draw();
    const Vector jx = prox(g, lambda, x).values, jy = prox(g, lambda, y).values;
    const double d = (x.values - y.values).norm();
    r.worst_contraction = std::max(r.worst_contraction, (jx - jy).norm() / d);
    const Vector ax = (x.values - jx) / lambda, ay = (y.values - jy) / lambda;
    r.worst_lipschitz = std::max(r.worst_lipschitz, lambda * (ax - ay).norm() / d);
    if (k < 100) {
      double prev = envelope(g, 0.1 * lambda, x);
      for (double f : {0.3, 1.0, 3.0, 10.0}) {
        const double cur = envelope(g, f * lambda, x);
        r.worst_envelope_increase = std::max(r.worst_envelope_increase, cur - prev);
        prev = cur;
      }
    }
  }
  return r;
}

}  // namespace mlap
