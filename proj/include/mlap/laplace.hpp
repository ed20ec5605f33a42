#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mlap/estimate.hpp"
#include "mlap/potentials.hpp"
#include "mlap/value_function.hpp"

namespace mlap {

struct LhsOptions {
  std::size_t samples = 20000;
  /// Tune the increment scale of the Brownian proposal on a pilot sample.
  /// Off means plain Monte Carlo.
  bool tune_scale = true;
  int pilot = 64;
  double spread_warning = 30.0;
};

struct LhsResult {
  ValueEstimate estimate;
  double scale = 1.0;     // proposal increment scale
  double spread = 0.0;    // N^2 * (max f - min f) over the samples
  bool direct_regime = true;  // spread below the warning threshold
};

/// -(1/N^2) log E exp(-N^2 f(W_{t_1}, ..., W_{t_k})) over Hermitian Brownian
/// paths, with an optional scaled-increment importance proposal.
LhsResult lhs_log_laplace(const PotentialSpec& spec, int n, int m, const LhsOptions& opts, RngStream& rng,
                          const UnitaryTuple& u = {});

struct RhsOptions {
  std::size_t paths = 200;
  int steps = 200;
  std::size_t inner = 64;
  /// Adds eps * K to the drift, K a fixed random tuple per path.
  double perturbation = 0.0;
  int threads = 0;
};

struct RhsResult {
  ValueEstimate total;     // E[f(X) + 1/2 int ||b||^2]
  ValueEstimate terminal;  // E[f(X)]
  ValueEstimate control;   // E[1/2 int ||b||^2]
  /// Moments of the path at the last slot: sum_k tau(x^2), sum_k tau(x^4) per path.
  std::vector<double> endpoint_m2;
  std::vector<double> endpoint_m4;
  std::vector<std::string> warnings;
};

/// Simulates the controlled SDE with the optimal drift from the value function
/// (Euler, grid refined to contain the slot times) and averages the cost.
RhsResult rhs_control_cost(const PotentialSpec& spec, int n, int m, const RhsOptions& opts, RngStream& rng,
                           const UnitaryTuple& u = {});

struct LaplaceRow {
  int n = 0;
  ValueEstimate lhs;
  ValueEstimate rhs;
  double gap = 0.0;
  bool pass = false;
  bool direct_regime = true;
};

struct LaplaceReport {
  std::vector<LaplaceRow> rows;
  /// Richardson extrapolation in 1/N^2 from the two largest N (rhs values).
  double extrapolated = 0.0;
  /// Consecutive rhs values differing by more than 3 combined stderr.
  bool drift_detected = false;
};

LaplaceReport n_convergence(const PotentialSpec& spec, const std::vector<int>& ns, int m, const LhsOptions& lhs,
                            const RhsOptions& rhs, RngStream& rng, const UnitaryTuple& u = {});

}  // namespace mlap
