#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mlap/matrix_core.hpp"
#include "mlap/potentials.hpp"
#include "mlap/value_function.hpp"
#include "mlap/yosida.hpp"

namespace mlap {

/// Discrete trajectory: states[k] at grid[k], drifts[k] used on [grid[k], grid[k+1]).
struct ControlledPath {
  std::vector<double> grid;
  std::vector<HermitianTuple> states;
  std::vector<HermitianTuple> drifts;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Drift b(t, past, x): `grid` and `states` hold the path up to and including
/// the current node (states.back() is x).
using DriftFn = std::function<HermitianTuple(double t, std::span<const double> grid,
                                             std::span<const HermitianTuple> states)>;

struct DriftField {
  DriftFn fn;
  double lipschitz = std::numeric_limits<double>::infinity();
  bool monotone = false;
};

/// Uniform grid on [0, T] with `steps` steps, refined so that every time in
/// `include` is a node.
std::vector<double> uniform_grid(double horizon, int steps, std::span<const double> include = {});

/// Normalized Brownian increments for each step of `grid`.
std::vector<HermitianTuple> sample_path_increments(int n, int m, std::span<const double> grid, RngStream& rng);

/// Sums consecutive increments in blocks of `factor`.
std::vector<HermitianTuple> coarsen_increments(std::span<const HermitianTuple> increments, int factor);

/// X_{s+d} = X_s + d b(s, X_s) + dH. Aborts with NumericalError when ||X||_2 exceeds 1e6.
ControlledPath euler_maruyama(const DriftField& field, const HermitianTuple& x0, std::span<const double> grid,
                              RngStream& rng);
ControlledPath euler_maruyama(const DriftField& field, const HermitianTuple& x0, std::span<const double> grid,
                              std::span<const HermitianTuple> increments);

/// Values of the path at the slot times strictly before t (grid nodes when
/// they coincide, linear interpolation otherwise).
std::vector<HermitianTuple> history_at(std::span<const double> slot_times, double t,
                                       std::span<const double> grid, std::span<const HermitianTuple> states);

/// Optimal drift field of the control problem, from the value function.
DriftField value_drift(const ValueFunction& vf, std::uint64_t stream_key);

/// Convex function of the tau coordinates of the state, possibly time dependent.
using ConvexFamily = std::function<ConvexFn(double t)>;

/// Euler scheme with drift -A_lambda(g_t) (Yosida gradient in tau coordinates);
/// prox problems are warm started from the previous step.
ControlledPath euler_yosida(const ConvexFamily& family, double lambda, const HermitianTuple& x0,
                            std::span<const double> grid, std::span<const HermitianTuple> increments);
ControlledPath euler_yosida(const ConvexFamily& family, double lambda, const HermitianTuple& x0,
                            std::span<const double> grid, RngStream& rng);

/// ConvexFn view of a one-slot potential on tau coordinates.
ConvexFn potential_convex_fn(const PotentialSpec& spec, int n, int m);

// ---- Langevin dynamics --------------------------------------------------

struct LangevinOptions {
  double horizon = 5.0;
  double dt = 0.01;
  /// Record tau(X^2) every `record_every` steps (0 disables).
  int record_every = 0;
};

struct LangevinResult {
  HermitianTuple state;
  std::vector<double> times;
  std::vector<double> second_moment;  // sum_k tau(x_k^2) at the recorded times
};

/// dX = -1/2 (X + grad G(X)) dt + dH, whose invariant law has density
/// proportional to exp(-N^2 (1/2 sum tau(X^2) + G)). Integrated with the
/// exponential Euler step for the linear part.
LangevinResult langevin_stationary(const PotentialSpec& spec, const HermitianTuple& x0,
                                   const LangevinOptions& opts, RngStream& rng);

struct CouplingReport {
  std::vector<double> times;
  std::vector<double> distance2;  // ||X_t(x) - X_t(y)||_2^2
  double initial = 0.0;
  /// max_t distance2 / (e^{-t} initial)
  double worst_ratio = 0.0;
};

/// Two Langevin solutions from x and y driven by the same noise.
CouplingReport langevin_coupling(const PotentialSpec& spec, const HermitianTuple& x, const HermitianTuple& y,
                                 const LangevinOptions& opts, RngStream& rng);

// ---- forward-backward Picard iteration ------------------------------------

struct PicardOptions {
  double horizon = 0.25;
  int steps = 20;
  int paths = 200;
  double tolerance = 1e-6;
  int max_iterations = 30;
  /// Polynomial degree of the feedback field per matrix: y -> sum_p beta_p y^p.
  int degree = 3;
};

struct PicardReport {
  int iterations = 0;
  bool converged = false;
  /// sup_s RMS_paths ||Y^{(l)}_s - Y^{(l-1)}_s||_2 for l = 1, 2, ...
  std::vector<double> differences;
  /// Geometric mean of successive difference ratios.
  double decay_ratio = 0.0;
  /// beta[step][matrix][p]: feedback coefficients at each grid time.
  std::vector<std::vector<std::vector<double>>> coefficients;
  ControlledPath path;  // first simulated path of the final iterate
};

/// Iterates Y^{(l)}_s = x + H_s - int_0^s DH^{(l-1)}(v, Y^{(l)}_v) dv with
/// DH^{(l)}(v, y) = E[grad G(Y^{(l)}_T) | Y^{(l)}_v = y] estimated by least
/// squares on the basis {1, y, ..., y^degree}. The noise is shared across
/// iterations. Throws NumericalError when the measured decay ratio is >= 1.
PicardReport picard_fbsde(const PotentialSpec& terminal, const HermitianTuple& x0, const PicardOptions& opts,
                          RngStream& rng);

/// Writes time, matrix index, row, col, re, im rows (every `stride`-th node).
void write_path_csv(const ControlledPath& path, const std::string& file, int stride = 1);

}  // namespace mlap
