#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mlap {

/// A Monte Carlo scalar. Every stochastic operation returns one.
struct ValueEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  /// Effective sample size of the weights that produced the estimate
  /// (equals `samples` for unweighted averages).
  double ess = 0.0;
  std::vector<std::string> warnings;
};

/// |a - b| <= k * sqrt(se_a^2 + se_b^2) + floor. The floor covers
/// floating-point roundoff for zero-variance estimators.
bool within_sigma(const ValueEstimate& a, double b, double k, double floor = 1e-12);
bool within_sigma(const ValueEstimate& a, const ValueEstimate& b, double k, double floor = 1e-12);
double combined_stderr(const ValueEstimate& a, const ValueEstimate& b);

/// Mean with standard error.
ValueEstimate mean_estimate(std::span<const double> xs);

/// log(mean(exp(x))) computed stably, with the delta-method standard error of
/// the log and the effective sample size of the weights exp(x).
struct LogMeanExp {
  double log_mean = 0.0;
  double stderr_log = 0.0;
  double ess = 0.0;
  double spread = 0.0;  // max(x) - min(x)
};
LogMeanExp log_mean_exp(std::span<const double> log_terms);

double log_sum_exp(std::span<const double> xs);

/// Least-squares slope of log(y) against log(x).
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};
LogLogFit loglog_fit(std::span<const double> x, std::span<const double> y);

/// Effective sample size of a scalar chain (Geyer initial positive sequence).
double effective_sample_size(std::span<const double> chain);

/// Gelman-Rubin potential scale reduction over equal-length chains.
double r_hat(const std::vector<std::vector<double>>& chains);

/// Catalan numbers C_0 .. C_{count-1}, from the moment recursion
/// C_{k+1} = sum_{j=0}^{k} C_j C_{k-j}.
std::vector<double> catalan_numbers(int count);

/// Deterministic parallel loop: body(i) for i in [0, count). Work is split
/// into contiguous blocks; results must only depend on i.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

/// Default worker count used when a caller passes threads <= 0.
int default_threads();
void set_default_threads(int threads);

}  // namespace mlap
