#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlap/matrix_core.hpp"
#include "mlap/nc_poly.hpp"

namespace mlap {

/// g_i = D_i + C_i sum_{j,l} tau((x_j^l)^2) + Re(lambda_i tau(word_i)).
struct PotentialComponent {
  double offset = 0.0;  // D_i
  double quad = 1.0;    // C_i
  Complex lambda{0.0, 0.0};
  NCPolynomial word;
};

/// Potential D + (sum_i g_i^p)^{1/p} evaluated on one tuple per time slot.
struct PotentialSpec {
  std::vector<double> times;  // t_1 < ... < t_k in (0, 1]
  double p = 2.0;             // in [2, inf]
  double offset = 0.0;        // D
  std::vector<PotentialComponent> components;

  int slots() const { return static_cast<int>(times.size()); }
  /// Every C_i > 0. Specs outside convex mode are only accepted by the
  /// bounded (MCMC) routines.
  bool convex_mode() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Which inner product a gradient refers to.
///  - Scaled: gradient for the normalized inner product (1/N) Re Tr(ab).
///  - PerCoordinate: gradient of N^2 g(y / sqrt(N)) with respect to raw
///    coordinates y = sqrt(N) x under Re Tr(ab); equals sqrt(N) * Scaled.
enum class GradientScale { Scaled, PerCoordinate };

/// g = c * tau(X1(t)^2) on one slot at time t (m matrices all carry the term).
PotentialSpec quadratic_spec(double c, double t = 1.0);

/// Single component g = C * sum tau(x^2) + Re(lambda tau(word)), D_i = offset.
PotentialSpec word_spec(double quad, Complex lambda, const std::string& word, double offset = 1.0,
                        std::vector<double> times = {1.0});

std::vector<double> component_values(const PotentialSpec& spec, std::span<const HermitianTuple> slots,
                                     const UnitaryTuple& u = {});

double eval_potential(const PotentialSpec& spec, std::span<const HermitianTuple> slots,
                      const UnitaryTuple& u = {});

struct PotentialEvaluation {
  double value = 0.0;
  std::vector<HermitianTuple> gradient;  // one tuple per slot
};

PotentialEvaluation evaluate_potential(const PotentialSpec& spec, std::span<const HermitianTuple> slots,
                                       const UnitaryTuple& u, GradientScale scale = GradientScale::Scaled);

std::vector<HermitianTuple> gradient_potential(const PotentialSpec& spec,
                                               std::span<const HermitianTuple> slots,
                                               const UnitaryTuple& u = {},
                                               GradientScale scale = GradientScale::Scaled);

/// Gaussian increment form
///   1/2 sum_l [ tau((x_1^l)^2)/t_1 + sum_{L>=2} tau((x_L^l - x_{L-1}^l)^2)/(t_L - t_{L-1}) ],
/// the potential of the finite dimensional distributions of the normalized
/// Hermitian Brownian motion.
double eval_bridge_potential(std::span<const double> times, std::span<const HermitianTuple> slots);
/// Gradient (Scaled): (x_i - x_{i-1})/(t_i - t_{i-1}) - (x_{i+1} - x_i)/(t_{i+1} - t_i).
std::vector<HermitianTuple> bridge_gradient(std::span<const double> times,
                                            std::span<const HermitianTuple> slots);

/// Effective quadratic coefficient of the potential at a point: the sum of
/// C_i weighted by d g / d g_i. Used to build Gaussian importance proposals.
double surrogate_curvature(const PotentialSpec& spec, std::span<const HermitianTuple> slots,
                           const UnitaryTuple& u = {});

// ---- JSON ---------------------------------------------------------------
//
// {"times":[...], "p": number or "inf", "D": number,
//  "components":[{"D":..,"C":..,"lambda_re":..,"lambda_im":..,"word":"X1 X1"}]}

PotentialSpec spec_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const PotentialSpec& spec);

// ---- diagnostics --------------------------------------------------------

struct LowerBoundReport {
  bool shifted = false;
  double min_component = 0.0;
  std::vector<double> shifts;
  std::string warning;
};

/// Shifts D_i so that every component is >= 1 on a pilot sample of Brownian
/// paths at the spec's times. For single-component specs the global offset
/// compensates, leaving the potential unchanged wherever g_1 >= 0.
LowerBoundReport enforce_lower_bound(PotentialSpec& spec, int n, int m, int pilot, RngStream& rng,
                                     const UnitaryTuple& u = {});

/// Empirical regularity constants on random samples:
///   subquadratic  g(x) <= C (1 + sum tau(x^2))
///   lipschitz     |g(x) - g(y)| <= C ||x - y|| (1 + ||x|| + ||y||)
///   second diff   |g(x+y) + g(x-y) - 2 g(x)| <= C ||y||^2
struct RegularityReport {
  double subquadratic = 0.0;
  double lipschitz = 0.0;
  double second_difference = 0.0;
};
RegularityReport regularity_constants(const PotentialSpec& spec, int n, int m, int samples,
                                      RngStream& rng, const UnitaryTuple& u = {});

/// max over trials of g(theta x + (1-theta) y) - theta g(x) - (1-theta) g(y).
double convexity_probe(const PotentialSpec& spec, int n, int m, int trials, RngStream& rng,
                       const UnitaryTuple& u = {});

/// Normalized Brownian path values at the spec times (one tuple per slot).
std::vector<HermitianTuple> sample_brownian_slots(std::span<const double> times, int n, int m,
                                                  RngStream& rng);

}  // namespace mlap
