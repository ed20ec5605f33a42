#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mlap/estimate.hpp"
#include "mlap/gibbs.hpp"
#include "mlap/laplace.hpp"
#include "mlap/potentials.hpp"

namespace mlap {

/// Spectral data of a compactly supported one-matrix law with one-cut support
/// [left, right]. Values are tabulated on Chebyshev nodes
/// x = c + r cos(theta), so that integrals against the density are computed
/// by the trapezoid rule in theta.
struct SpectralDensity {
  double left = 0.0;
  double right = 0.0;
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> weights;  // quadrature weights in x
  /// Cauchy transform G(w) = int p(x) / (w - x) dx for Im w > 0, and G'.
  std::function<Complex(Complex)> cauchy;
  std::function<Complex(Complex)> cauchy_derivative;

  double normalization() const;
  double moment(int k) const;
  /// int p^3 scaled: (4 pi^2 / 3) int p(x)^3 dx.
  double fisher() const;
  /// Throws NumericalError unless the values are nonnegative and integrate
  /// to 1 within `tol`.
  void check(double tol = 1e-8) const;
};

/// Tabulates p on `nodes` Chebyshev nodes of [left, right].
SpectralDensity tabulate_density(double left, double right, const std::function<double(double)>& p,
                                 int nodes = 512);

/// Semicircle of variance sigma2 (support [-2 sigma, 2 sigma]).
SpectralDensity semicircle_density(double sigma2, int nodes = 512);

/// Equilibrium measure of exp(-N Tr(alpha x^2 / 2 + beta x^4)), beta >= 0.
SpectralDensity quartic_density(double alpha, double beta, int nodes = 512);

/// Law of the one-slot, one-matrix Gibbs ensemble of `spec` at large N. Only
/// single-component specs whose word is a combination of X1^2 and X1^4 are
/// supported; other specs raise ConfigError.
SpectralDensity equilibrium_density(const PotentialSpec& spec, int nodes = 512);

/// Law of X + sqrt(t) S from subordination: G_t(z) = G(omega(z)) with
/// omega(z) = z - t G_t(z).
SpectralDensity free_convolve_semicircle(const SpectralDensity& mu, double t, int nodes = 512);

struct FlowPoint {
  double t = 0.0;
  /// Density route; the standard error is the normalization defect.
  ValueEstimate fisher;
  /// Matrix route at finite N: squared norm of the L2 projection of the
  /// conjugate variable of X + sqrt(t) S onto polynomials of degree <= 3.
  ValueEstimate matrix;
  /// matrix - fisher.
  double residual = 0.0;
};

struct FlowOptions {
  int nodes = 512;
  /// Matrix cross-check. n = 0 skips it.
  int n = 0;
  int samples = 200;
  MalaOptions mala;
  int threads = 0;
  /// Largest t - t_0 used by the Holder regression.
  double holder_window = 1.0;
};

struct FlowReport {
  std::vector<FlowPoint> points;
  /// Largest increase Phi(t_{i+1}) - Phi(t_i) net of 3 combined standard errors
  /// (<= 0 when the flow is nonincreasing within error bars).
  double worst_increase = 0.0;
  bool monotone = true;
  /// Log-log slope of |Phi(t) - Phi(t_0)| against t - t_0 for t - t_0 <= holder_window.
  double holder_exponent = 0.0;
};

FlowReport fisher_semicircular_flow(const SpectralDensity& mu, std::span<const double> ts, const FlowOptions& opts,
                                    RngStream& rng);
/// Uses equilibrium_density(spec); the matrix route samples the spec's Gibbs
/// ensemble (exactly for quadratic specs, by MALA otherwise).
FlowReport fisher_semicircular_flow(const PotentialSpec& spec, std::span<const double> ts, const FlowOptions& opts,
                                    RngStream& rng);

/// 1/2 int_0^inf (m / (1 + t) - Phi(t)) dt + (m / 2) log(2 pi e). The flow is
/// interpolated with cubic Hermite splines in t; beyond the last point the
/// tail Phi(t) = m / (t + a) is integrated in closed form, a fitted at the
/// last point. Throws ConfigError if the last two points disagree on a by
/// more than 1% (the message recommends a horizon).
double chi_star(std::span<const FlowPoint> flow, int m);
/// Same integral with adaptive Simpson quadrature of a Fisher function on
/// [0, horizon] and the same tail closure.
double chi_star(const std::function<double(double)>& fisher, int m, double horizon = 50.0, double tol = 1e-10);

struct ChiBudget {
  std::size_t paths = 64;
  int steps = 100;
  std::size_t inner = 32;
  double perturbation = 0.0;
  int threads = 0;
};

struct ChiControlResult {
  /// -1/2 int E ||b_t||^2 dt along the controlled bridge.
  ValueEstimate chi_g;
  /// Endpoint sum_k tau(x_k^2).
  ValueEstimate second_moment;
  std::vector<std::string> warnings;
};

/// Controlled-bridge estimate of chi^G for a one-slot spec with every C_i >= 0.
ChiControlResult chi_microstates_control(const PotentialSpec& spec, int n, int m, const ChiBudget& budget,
                                         RngStream& rng, const UnitaryTuple& u = {});

/// Constant C in chi = chi^G + 1/2 sum tau(x^2) + m C, calibrated on the
/// standard semicircle (chi^G = 0, tau(x^2) = 1) through chi_star.
double chi_constant();
double chi_from_chi_g(double chi_g, double second_moment, int m);

/// Residuals E[tau(xi P)] - E[(tau (x) tau)(d_i P)] over a test battery, with
/// candidate xi = X_i + D_i V (the Scaled potential gradient). With
/// include_potential = false the candidate is X_i alone.
std::vector<ValueEstimate> conjugate_variable_residual(std::span<const SlotState> samples, const PotentialSpec& spec,
                                                       std::span<const NCPolynomial> battery, LetterRef letter,
                                                       bool include_potential = true, const UnitaryTuple& u = {});

}  // namespace mlap
