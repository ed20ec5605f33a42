#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlap/estimate.hpp"
#include "mlap/matrix_core.hpp"
#include "mlap/nc_poly.hpp"
#include "mlap/potentials.hpp"

namespace mlap {

/// One state of the ensemble: a tuple per time slot.
using SlotState = std::vector<HermitianTuple>;

struct MalaOptions {
  double step = 0.2;
  int burn_in = 500;
  int thin = 5;
  int samples = 200;
  double target_acceptance = 0.574;
  bool adapt = true;
};

struct MalaResult {
  std::vector<SlotState> samples;
  double acceptance = 0.0;  // after burn-in
  double step = 0.0;        // final step size
  /// sum_k tau(x_k^2) at slot 0 for every kept sample, and its ESS.
  std::vector<double> trace;
  double ess = 0.0;
  std::vector<std::string> warnings;
};

/// Matrix Gibbs ensemble with density proportional to
/// exp(-N^2 (g(x) + g_bridge(x))) on normalized tuples, one per time slot.
class GibbsEnsemble {
 public:
  GibbsEnsemble(PotentialSpec spec, int n, int m, UnitaryTuple u = {});

  const PotentialSpec& spec() const { return spec_; }
  int n() const { return n_; }
  int m() const { return m_; }
  /// Specs with some C_i <= 0 are accepted and flagged.
  bool nonconvex() const { return !spec_.convex_mode(); }

  double log_density(const SlotState& x) const;

  /// Gradient of the log density with respect to the matrix entries of x
  /// under Re Tr: Xi_i = -N (grad g + (x_i - x_{i-1})/(t_i - t_{i-1})
  /// - (x_{i+1} - x_i)/(t_{i+1} - t_i)).
  SlotState score(const SlotState& x) const;

  /// log pi(y) q(x|y) - log pi(x) q(y|x) for the MALA proposal with step h.
  double mala_log_ratio(const SlotState& x, const SlotState& y, double h) const;

  /// Gaussian-bridge draw, used as the default chain start.
  SlotState prior_draw(RngStream& rng) const;

  /// Throws NumericalError when the post burn-in acceptance falls below 5%.
  MalaResult sample(const MalaOptions& opts, RngStream& rng, std::optional<SlotState> init = std::nullopt) const;

 private:
  SlotState propose_mean(const SlotState& x, double h) const;

  PotentialSpec spec_;
  int n_;
  int m_;
  UnitaryTuple u_;
};

SlotState score_field(const PotentialSpec& spec, const SlotState& x, const UnitaryTuple& u = {});

MalaResult mala_sample(const GibbsEnsemble& ensemble, const MalaOptions& opts, RngStream& rng);

struct ChainsResult {
  std::vector<MalaResult> chains;
  double r_hat = 1.0;
  std::vector<SlotState> pooled;
};

/// Independent chains on substreams of `rng`, run in parallel.
ChainsResult mala_chains(const GibbsEnsemble& ensemble, const MalaOptions& opts, int chains, RngStream& rng,
                         int threads = 0);

/// E[tau(xi_i P)] - E[(tau (x) tau)(d_i P)] with xi = -Xi / N, which
/// vanishes for exact samples of the ensemble. The standard error uses the
/// effective sample size of the per-sample values.
ValueEstimate sd_residual(const GibbsEnsemble& ensemble, std::span<const SlotState> samples,
                          const NCPolynomial& test_poly, LetterRef letter);

struct ConcentrationReport {
  double mean = 0.0;
  double variance = 0.0;
  double variance_stderr = 0.0;
  double fourth_central = 0.0;
  double max_operator_norm = 0.0;
  double mean_operator_norm = 0.0;
  std::size_t samples = 0;
};

/// Statistics of Re tau(P) over the samples (P evaluated on all slots).
ConcentrationReport concentration_stats(std::span<const SlotState> samples, const NCPolynomial& observable,
                                        const UnitaryTuple& u = {});

}  // namespace mlap
