#pragma once

// Reference values computed independently of the library code paths.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline constexpr double kPi = std::numbers::pi;

/// C_p = binom(2p, p) / (p + 1).
inline double catalan(int p) {
  double c = 1.0;
  for (int k = 1; k <= p; ++k) c *= static_cast<double>(p + k) / k;
  return c / (p + 1);
}

/// E tau(X^4) for a normalized GUE matrix of size n (Harer-Zagier: 2 + 1/n^2).
inline double gue_fourth_moment(int n) { return 2.0 + 1.0 / (static_cast<double>(n) * n); }

/// -log E exp(-c y^2 / v) for y ~ N(0, v), by trapezoid quadrature in u = y / sqrt(v).
inline double gaussian_log_laplace_1d(double c) {
  const double h = 1e-3;
  double s = 0.0;
  for (double u = -12.0; u <= 12.0; u += h) s += std::exp(-0.5 * u * u - c * u * u);
  s *= h / std::sqrt(2.0 * kPi);
  return -std::log(s);
}

/// -(1/N^2) log E exp(-N^2 (D + c tau(X_t^2))) for an m-tuple at time t: N^2 m
/// independent coordinates with variance t / N^2 each.
inline double quadratic_laplace(double c, int m, double t = 1.0, double d = 0.0) {
  return d + m * gaussian_log_laplace_1d(c * t);
}

/// Value function of the quadratic terminal cost c tau(X(1)^2) at (t, tau(x^2)).
inline double quadratic_value(double c, double t, double tau_x2, int m) {
  const double s = 1.0 + 2.0 * c * (1.0 - t);
  return c * tau_x2 / s + 0.5 * m * std::log(s);
}

/// Optimal drift coefficient: b(t, x) = coef * x.
inline double quadratic_drift_coef(double c, double t) { return -2.0 * c / (1.0 + 2.0 * c * (1.0 - t)); }

/// 1/2 int_0^1 E ||b||^2 dt along the optimally controlled path for c tau(X(1)^2),
/// per matrix: RK4 on the variance ODE v' = 2 k(t) v + 1, v(0) = 0.
inline double quadratic_control_cost(double c) {
  const int steps = 20000;
  const double h = 1.0 / steps;
  auto k = [&](double t) { return quadratic_drift_coef(c, t); };
  auto rhs = [&](double t, double v) { return 2.0 * k(t) * v + 1.0; };
  auto integrand = [&](double t, double v) { return 0.5 * k(t) * k(t) * v; };
  double v = 0.0, cost = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double t = i * h;
    const double k1 = rhs(t, v), k2 = rhs(t + 0.5 * h, v + 0.5 * h * k1);
    const double k3 = rhs(t + 0.5 * h, v + 0.5 * h * k2), k4 = rhs(t + h, v + h * k3);
    const double vn = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double vm = v + 0.5 * h / 2.0 * (k1 + k2);
    cost += h / 6.0 * (integrand(t, v) + 4.0 * integrand(t + 0.5 * h, vm) + integrand(t + h, vn));
    v = vn;
  }
  return cost;
}

/// Log energy int int log|x - y| dmu dmu of a law on [-2r, 2r] given by its
/// density, from log|2cos a - 2cos b| = -sum_k (2/k) cos(ka) cos(kb).
inline double log_energy(const std::function<double(double)>& density, double r, int terms = 200) {
  const int nodes = 4000;
  std::vector<double> a(terms + 1, 0.0);
  for (int j = 0; j < nodes; ++j) {
    const double th = kPi * (j + 0.5) / nodes;
    const double x = 2.0 * r * std::cos(th);
    const double w = density(x) * 2.0 * r * std::sin(th) * kPi / nodes;
    for (int k = 1; k <= terms; ++k) a[k] += w * std::cos(k * th);
  }
  double e = std::log(r);
  for (int k = 1; k <= terms; ++k) e -= 2.0 / k * a[k] * a[k];
  return e;
}

/// Microstates free entropy of a one-matrix law: log energy + 3/4 + log(2 pi) / 2.
inline double chi_from_log_energy(double energy) { return energy + 0.75 + 0.5 * std::log(2.0 * kPi); }

inline double semicircle_pdf(double x, double sigma2) {
  const double v = 4.0 * sigma2 - x * x;
  return v > 0.0 ? std::sqrt(v) / (2.0 * kPi * sigma2) : 0.0;
}

/// Squared edge R^2 of the one-cut equilibrium measure of alpha x^2 / 2 + beta x^4,
/// from the normalization (alpha R^2 / 4 + 3 beta R^4 / 4 = 1).
inline double quartic_edge2(double alpha, double beta) {
  return (-alpha + std::sqrt(alpha * alpha + 48.0 * beta)) / (6.0 * beta);
}

inline double quartic_pdf(double x, double alpha, double beta) {
  const double r2 = quartic_edge2(alpha, beta);
  if (x * x >= r2) return 0.0;
  return (alpha + 2.0 * beta * r2 + 4.0 * beta * x * x) * std::sqrt(r2 - x * x) / (2.0 * kPi);
}

/// Moreau-Yosida closed forms for |x| in one dimension.
inline double soft_threshold(double x, double lambda) {
  return std::copysign(std::max(0.0, std::abs(x) - lambda), x);
}
inline double huber(double x, double lambda) {
  return std::abs(x) <= lambda ? x * x / (2.0 * lambda) : std::abs(x) - 0.5 * lambda;
}

/// Scalar minimizer of |y| + (x - y)^2 / (2 lambda) on a grid.
inline double grid_prox_abs(double x, double lambda) {
  double best = 0.0, best_val = x * x / (2.0 * lambda);
  for (double y = -10.0; y <= 10.0; y += 1e-5) {
    const double v = std::abs(y) + (x - y) * (x - y) / (2.0 * lambda);
    if (v < best_val) {
      best_val = v;
      best = y;
    }
  }
  return best;
}

/// E tau(X_t^2) for dX = -X dt + dH from 0, with E tau(H_t^2) = t: v' = -2v + 1.
inline double ou_second_moment(double t) { return 0.5 * (1.0 - std::exp(-2.0 * t)); }

}  // namespace oracle
