#include "mlap/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mlap/errors.hpp"

namespace mlap {

GibbsEnsemble::GibbsEnsemble(PotentialSpec spec, int n, int m, UnitaryTuple u)
    : spec_(std::move(spec)), n_(n), m_(m), u_(std::move(u)) {
  spec_.validate();
  if (n < 1 || m < 1) throw ConfigError("n and m must be positive", "n");
}

double GibbsEnsemble::log_density(const SlotState& x) const {
  const double n2 = static_cast<double>(n_) * n_;
  return -n2 * (eval_potential(spec_, x, u_) + eval_bridge_potential(spec_.times, x));
}

SlotState score_field(const PotentialSpec& spec, const SlotState& x, const UnitaryTuple& u) {
  if (x.empty()) throw ConfigError("empty state", "x");
  const double n = static_cast<double>(x[0].n());
  SlotState g = gradient_potential(spec, x, u);
  const SlotState b = bridge_gradient(spec.times, x);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] += b[i];
    g[i] *= -n;
  }
  return g;
}

SlotState GibbsEnsemble::score(const SlotState& x) const { return score_field(spec_, x, u_); }

SlotState GibbsEnsemble::propose_mean(const SlotState& x, double h) const {
  const SlotState xi = score(x);
  SlotState mean = x;
  for (std::size_t i = 0; i < x.size(); ++i) mean[i].axpy(0.5 * h / n_, xi[i]);
  return mean;
}

double GibbsEnsemble::mala_log_ratio(const SlotState& x, const SlotState& y, double h) const {
  const double n2 = static_cast<double>(n_) * n_;
  const SlotState mx = propose_mean(x, h);
  const SlotState my = propose_mean(y, h);
  double fwd = 0.0, bwd = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    fwd += hs_norm2(y[i] - mx[i]);
    bwd += hs_norm2(x[i] - my[i]);
  }
  const double log_q_fwd = -n2 * fwd / (2.0 * h);
  const double log_q_bwd = -n2 * bwd / (2.0 * h);
  return log_density(y) + log_q_bwd - log_density(x) - log_q_fwd;
}

SlotState GibbsEnsemble::prior_draw(RngStream& rng) const {
  return sample_brownian_slots(spec_.times, n_, m_, rng);
}

MalaResult GibbsEnsemble::sample(const MalaOptions& opts, RngStream& rng, std::optional<SlotState> init) const {
  if (!(opts.step > 0.0)) throw ConfigError("step must be positive", "step");
  if (opts.samples < 1 || opts.thin < 1 || opts.burn_in < 0)
    throw ConfigError("samples and thin must be positive", "samples");
  MalaResult r;
  SlotState x = init ? *init : prior_draw(rng);
  double h = opts.step;
  double log_pi = log_density(x);
  SlotState mean_x = propose_mean(x, h);
  std::size_t accepted = 0, proposed = 0;
  const int total = opts.burn_in + opts.samples * opts.thin;
  for (int it = 0; it < total; ++it) {
    SlotState y = mean_x;
    for (auto& yi : y) yi.axpy(std::sqrt(h), sample_normalized_increment(n_, m_, 1.0, rng));
    const SlotState mean_y = propose_mean(y, h);
    const double log_pi_y = log_density(y);
    double fwd = 0.0, bwd = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      fwd += hs_norm2(y[i] - mean_x[i]);
      bwd += hs_norm2(x[i] - mean_y[i]);
    }
    const double n2 = static_cast<double>(n_) * n_;
    const double log_ratio = log_pi_y - log_pi - n2 * (bwd - fwd) / (2.0 * h);
    const bool accept = std::log(rng.uniform()) < log_ratio;
    if (accept) {
      x = std::move(y);
      log_pi = log_pi_y;
      mean_x = mean_y;
    }
    if (it < opts.burn_in) {
      if (opts.adapt) {
        const double a = std::min(1.0, std::exp(std::min(0.0, log_ratio)));
        const double rate = 1.0 / std::sqrt(static_cast<double>(it) + 10.0);
        h *= std::exp(rate * (a - opts.target_acceptance));
        mean_x = propose_mean(x, h);
      }
    } else {
      ++proposed;
      if (accept) ++accepted;
      if ((it - opts.burn_in + 1) % opts.thin == 0) {
        r.samples.push_back(x);
        r.trace.push_back(hs_norm2(x[0]));
      }
    }
  }
  r.step = h;
  r.acceptance = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  r.ess = effective_sample_size(r.trace);
  if (r.acceptance < 0.05) {
    std::ostringstream os;
    os << "MALA acceptance " << r.acceptance << " below 5% (step " << h
       << "); lengthen burn-in or lower the initial step";
    throw NumericalError(os.str());
  }
  if (r.acceptance < 0.4 || r.acceptance > 0.8) {
    std::ostringstream os;
    os << "MALA acceptance " << r.acceptance << " outside [0.4, 0.8]";
    r.warnings.push_back(os.str());
  }
  if (nonconvex()) r.warnings.push_back("potential is outside convex mode (some C_i <= 0)");
  return r;
}

MalaResult mala_sample(const GibbsEnsemble& ensemble, const MalaOptions& opts, RngStream& rng) {
  return ensemble.sample(opts, rng);
}

ChainsResult mala_chains(const GibbsEnsemble& ensemble, const MalaOptions& opts, int chains, RngStream& rng,
                         int threads) {
  if (chains < 1) throw ConfigError("need at least one chain", "chains");
  ChainsResult r;
  r.chains.resize(static_cast<std::size_t>(chains));
  const RngStream base = rng;
  parallel_for(static_cast<std::size_t>(chains), threads, [&](std::size_t c) {
    RngStream sub = base.substream(c);
    r.chains[c] = ensemble.sample(opts, sub);
  });
  std::vector<std::vector<double>> traces;
  for (const auto& c : r.chains) {
    traces.push_back(c.trace);
    r.pooled.insert(r.pooled.end(), c.samples.begin(), c.samples.end());
  }
  r.r_hat = r_hat(traces);
  return r;
}

ValueEstimate sd_residual(const GibbsEnsemble& ensemble, std::span<const SlotState> samples,
                          const NCPolynomial& test_poly, LetterRef letter) {
  if (samples.empty()) throw ConfigError("no samples", "samples");
  if (letter.slot < 0 || letter.slot >= ensemble.spec().slots())
    throw ConfigError("letter slot out of range", "letter");
  const TensorPolynomial dp = free_difference_quotient(test_poly, letter);
  const double n = static_cast<double>(ensemble.n());
  std::vector<double> vals;
  vals.reserve(samples.size());
  for (const auto& x : samples) {
    const SlotState xi = ensemble.score(x);
    const Matrix p = eval(test_poly, x);
    const Matrix& xs = xi[static_cast<std::size_t>(letter.slot)][letter.index];
    const Complex lhs = tau(xs * p) / (-n);
    const Complex rhs = bitrace(dp, x);
    vals.push_back(std::real(lhs - rhs));
  }
  ValueEstimate e = mean_estimate(vals);
  const double ess = effective_sample_size(vals);
  if (ess > 0.0 && ess < static_cast<double>(vals.size()))
    e.std_error *= std::sqrt(static_cast<double>(vals.size()) / ess);
  e.ess = ess;
  return e;
}

ConcentrationReport concentration_stats(std::span<const SlotState> samples, const NCPolynomial& observable,
                                        const UnitaryTuple& u) {
  ConcentrationReport r;
  r.samples = samples.size();
  if (samples.empty()) return r;
  std::vector<double> vals;
  for (const auto& x : samples) {
    vals.push_back(std::real(tau(eval(observable, x, u))));
    for (const auto& t : x)
      for (int k = 0; k < t.m(); ++k) {
        const double op = operator_norm(t[k]);
        r.max_operator_norm = std::max(r.max_operator_norm, op);
        r.mean_operator_norm += op;
      }
  }
  r.mean_operator_norm /= static_cast<double>(samples.size() * samples.front().size() * samples.front()[0].m());
  const double n = static_cast<double>(vals.size());
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : vals) {
    const double d = v - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  r.mean = mean;
  r.variance = n > 1 ? m2 / (n - 1.0) : 0.0;
  r.fourth_central = m4 / n;
  // Normal-theory standard error of the sample variance, inflated by kurtosis.
  if (n > 1) {
    const double mu4 = m4 / n, mu2 = m2 / n;
    r.variance_stderr = std::sqrt(std::max(0.0, (mu4 - mu2 * mu2 * (n - 3.0) / (n - 1.0)) / n));
  }
  return r;
}

}  // namespace mlap
