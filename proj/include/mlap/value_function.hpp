#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mlap/estimate.hpp"
#include "mlap/matrix_core.hpp"
#include "mlap/potentials.hpp"

namespace mlap {

/// Monte Carlo drift: a tuple with the standard error of its HS norm.
struct DriftEstimate {
  HermitianTuple drift;
  double std_error = 0.0;
  std::size_t samples = 0;
  double ess = 0.0;
  std::vector<std::string> warnings;
};

enum class Proposal {
  /// Gaussian posterior of the quadratic surrogate of the potential.
  Surrogate,
  /// The Brownian bridge itself (plain tilted Monte Carlo).
  Prior,
};

struct ValueOptions {
  std::size_t samples = 256;
  bool antithetic = true;
  Proposal proposal = Proposal::Surrogate;
  /// Pilot draws used to refit the surrogate curvature (0 disables).
  int pilot = 32;
  /// Warn when the spread of the log importance weights exceeds this (nats).
  double spread_warning = 30.0;
};

/// h_t(history, x) = -(1/N^2) log E exp(-N^2 g(history, x + future increments)),
/// the normalized cost-to-go of the control problem. Slots with t_j < t are
/// passed as history; a slot with t_j == t takes the value x.
class ValueFunction {
 public:
  explicit ValueFunction(PotentialSpec spec, UnitaryTuple u = {}, ValueOptions opts = {});

  const PotentialSpec& spec() const { return spec_; }
  const ValueOptions& options() const { return opts_; }
  ValueOptions& options() { return opts_; }

  /// Number of slots with t_j < t.
  int history_length(double t) const;

  ValueEstimate value(double t, std::span<const HermitianTuple> history, const HermitianTuple& x,
                      RngStream& rng) const;

  /// b(t, x) = -grad_x h_t as the ratio of E[sum_j grad_j g e^{-N^2 g}] to E[e^{-N^2 g}]
  /// on shared samples.
  DriftEstimate drift(double t, std::span<const HermitianTuple> history, const HermitianTuple& x,
                      RngStream& rng) const;

  /// The same conditional expectation under the Gibbs-tilted bridge, estimated
  /// by self-normalized importance sampling without antithetic pairing and
  /// with the configured proposal. Warns when the ESS is below 1% of the budget.
  DriftEstimate drift_gradexp(double t, std::span<const HermitianTuple> history, const HermitianTuple& x,
                              RngStream& rng, Proposal proposal = Proposal::Surrogate) const;

  struct Joint {
    ValueEstimate value;
    DriftEstimate drift;
  };
  Joint value_and_drift(double t, std::span<const HermitianTuple> history, const HermitianTuple& x,
                        RngStream& rng) const;

  /// Quadratic coefficient kappa of the surrogate value function
  /// h(x) ~ kappa tau(x^2) + const at (t, history, x).
  double surrogate_kappa(double t, std::span<const HermitianTuple> history, const HermitianTuple& x) const;

 private:
  struct Plan;
  Plan make_plan(double t, std::span<const HermitianTuple> history, const HermitianTuple& x,
                 Proposal proposal) const;
  double fit_curvature(const Plan& base, double t, std::span<const HermitianTuple> history,
                       const HermitianTuple& x, RngStream& rng) const;
  Joint run(double t, std::span<const HermitianTuple> history, const HermitianTuple& x, RngStream& rng,
            bool with_drift, bool antithetic, Proposal proposal) const;

  PotentialSpec spec_;
  UnitaryTuple u_;
  ValueOptions opts_;
};

/// Composition check for the semigroup property: estimates
///   -(1/N^2) log E exp(-N^2 h_{s+delta}(x + H_delta))
/// with an inner estimate of h_{s+delta} per outer draw. Requires that no slot
/// time lies strictly inside (s, s + delta).
ValueEstimate semigroup_value(const ValueFunction& vf, double s, double delta,
                              std::span<const HermitianTuple> history, const HermitianTuple& x,
                              std::size_t outer, RngStream& rng);

// Convenience wrappers.
struct ValueQuery {
  PotentialSpec spec;
  double t = 0.0;
  std::vector<HermitianTuple> history;
  HermitianTuple x;
  std::size_t samples = 256;
  UnitaryTuple u;
};

ValueEstimate value_h(const ValueQuery& q, RngStream& rng);
DriftEstimate drift_logratio(const ValueQuery& q, RngStream& rng);
DriftEstimate drift_gradexp(const ValueQuery& q, RngStream& rng);

}  // namespace mlap
