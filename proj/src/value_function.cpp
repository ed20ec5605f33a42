#include "mlap/value_function.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mlap/errors.hpp"

namespace mlap {

struct ValueFunction::Plan {
  int hist = 0;
  bool fixed = false;     // slot `hist` sits at time t and takes the value x
  bool terminal = false;  // every slot lies in the past
  std::vector<double> rand_times;
  int r = 0;
  double a = 0.0;
  bool prior = true;
  Eigen::MatrixXd sigma_inv;
  Eigen::MatrixXd chol;  // L L^T = P^{-1}
  Eigen::VectorXd alpha;
  Eigen::MatrixXd p_inv;
  double log_det_term = 0.0;
};

namespace {

double log_det_spd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance matrix is not positive definite");
  double s = 0.0;
  for (int i = 0; i < m.rows(); ++i) s += std::log(llt.matrixL()(i, i));
  return 2.0 * s;
}

void check_shapes(std::span<const HermitianTuple> history, const HermitianTuple& x) {
  if (x.empty()) throw ConfigError("current state is empty", "x");
  for (const auto& h : history)
    if (h.n() != x.n() || h.m() != x.m()) throw ConfigError("history tuple shape differs from x", "history");
}

}  // namespace

ValueFunction::ValueFunction(PotentialSpec spec, UnitaryTuple u, ValueOptions opts)
    : spec_(std::move(spec)), u_(std::move(u)), opts_(opts) {
  spec_.validate();
  if (opts_.samples == 0) throw ConfigError("sample budget must be positive", "samples");
}

int ValueFunction::history_length(double t) const {
  int i = 0;
  while (i < spec_.slots() && spec_.times[static_cast<std::size_t>(i)] < t) ++i;
  return i;
}

ValueFunction::Plan ValueFunction::make_plan(double t, std::span<const HermitianTuple> history,
                                             const HermitianTuple& x, Proposal proposal) const {
  if (!(t >= 0.0) || t > 1.0) throw ConfigError("time must lie in [0, 1]", "t");
  check_shapes(history, x);
  Plan p;
  p.hist = history_length(t);
  if (static_cast<int>(history.size()) != p.hist)
    throw ConfigError("expected " + std::to_string(p.hist) + " history slots before t, got " +
                          std::to_string(history.size()),
                      "history");
  const int k = spec_.slots();
  if (p.hist == k) {
    p.terminal = true;
    return p;
  }
  int first = p.hist;
  if (spec_.times[static_cast<std::size_t>(first)] == t) {
    p.fixed = true;
    ++first;
  }
  for (int j = first; j < k; ++j) p.rand_times.push_back(spec_.times[static_cast<std::size_t>(j)]);
  p.r = static_cast<int>(p.rand_times.size());
  if (p.r == 0) return p;

  Eigen::MatrixXd sigma(p.r, p.r);
  for (int j = 0; j < p.r; ++j)
    for (int l = 0; l < p.r; ++l)
      sigma(j, l) = std::min(p.rand_times[static_cast<std::size_t>(j)], p.rand_times[static_cast<std::size_t>(l)]) - t;
  p.sigma_inv = sigma.inverse();

  double a = 0.0;
  if (proposal == Proposal::Surrogate) {
    std::vector<HermitianTuple> slots(history.begin(), history.end());
    for (int j = p.hist; j < k; ++j) slots.push_back(x);
    a = std::max(0.0, surrogate_curvature(spec_, slots, u_));
  }
  p.a = a;
  p.prior = a == 0.0;
  const Eigen::MatrixXd precision = p.sigma_inv + 2.0 * a * Eigen::MatrixXd::Identity(p.r, p.r);
  p.p_inv = p.prior ? sigma : Eigen::MatrixXd(precision.inverse());
  p.chol = Eigen::LLT<Eigen::MatrixXd>(p.p_inv).matrixL();
  p.alpha = p.prior ? Eigen::VectorXd::Ones(p.r)
                    : Eigen::VectorXd(p.p_inv * p.sigma_inv * Eigen::VectorXd::Ones(p.r));
  if (!p.prior) {
    const double d = static_cast<double>(x.n()) * x.n() * x.m();
    p.log_det_term = 0.5 * d * (log_det_spd(p.p_inv) - log_det_spd(sigma));
  }
  return p;
}

double ValueFunction::fit_curvature(const Plan& base, double t, std::span<const HermitianTuple> history,
                                    const HermitianTuple& x, RngStream& rng) const {
  const int n = x.n(), m = x.m();
  const double n2 = static_cast<double>(n) * n;
  const double x2 = hs_norm2(x);
  const Eigen::MatrixXd sigma = base.sigma_inv.inverse();

  // Second moment sum_j tau(z_j^2) of the Gaussian proposal with curvature a.
  auto moment = [&](double a) {
    const Eigen::MatrixXd pinv =
        (base.sigma_inv + 2.0 * a * Eigen::MatrixXd::Identity(base.r, base.r)).inverse();
    const Eigen::VectorXd alpha = pinv * base.sigma_inv * Eigen::VectorXd::Ones(base.r);
    return alpha.squaredNorm() * x2 + static_cast<double>(m) * pinv.trace();
  };

  double a = base.a;
  for (int iter = 0; iter < 2; ++iter) {
    const Eigen::MatrixXd pinv =
        a > 0.0 ? Eigen::MatrixXd((base.sigma_inv + 2.0 * a * Eigen::MatrixXd::Identity(base.r, base.r)).inverse())
                : sigma;
    const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(pinv).matrixL();
    const Eigen::VectorXd alpha = a > 0.0 ? Eigen::VectorXd(pinv * base.sigma_inv * Eigen::VectorXd::Ones(base.r))
                                          : Eigen::VectorXd::Ones(base.r);
    const double ldt = a > 0.0 ? 0.5 * n2 * m * (log_det_spd(pinv) - log_det_spd(sigma)) : 0.0;

    std::vector<double> logw, s2;
    for (int s = 0; s < opts_.pilot; ++s) {
      std::vector<HermitianTuple> g;
      for (int l = 0; l < base.r; ++l) g.push_back(sample_normalized_increment(n, m, 1.0, rng));
      std::vector<HermitianTuple> slots(history.begin(), history.end());
      if (base.fixed) slots.push_back(x);
      std::vector<HermitianTuple> z;
      double qprop = 0.0, second = 0.0;
      for (int j = 0; j < base.r; ++j) {
        HermitianTuple zj = alpha(j) * x;
        for (int l = 0; l <= j; ++l) zj.axpy(chol(j, l), g[static_cast<std::size_t>(l)]);
        second += hs_norm2(zj);
        z.push_back(zj);
        qprop += hs_norm2(g[static_cast<std::size_t>(j)]);
      }
      double qprior = 0.0;
      for (int j = 0; j < base.r; ++j)
        for (int l = 0; l < base.r; ++l)
          qprior += base.sigma_inv(j, l) * hs_inner(z[static_cast<std::size_t>(j)] - x, z[static_cast<std::size_t>(l)] - x);
      for (auto& zj : z) slots.push_back(std::move(zj));
      double lw = -n2 * eval_potential(spec_, slots, u_);
      if (a > 0.0) lw += -0.5 * n2 * (qprior - qprop) + ldt;
      logw.push_back(lw);
      s2.push_back(second);
    }
    const auto [mn, mx] = std::minmax_element(logw.begin(), logw.end());
    if (*mx - *mn < 1e-6) return a;
    double wsum = 0.0, target = 0.0;
    for (std::size_t s = 0; s < logw.size(); ++s) {
      const double w = std::exp(logw[s] - *mx);
      wsum += w;
      target += w * s2[s];
    }
    target /= wsum;
    if (target >= moment(0.0)) return 0.0;
    double lo = 0.0, hi = std::max(1.0, a);
    while (moment(hi) > target && hi < 1e8) hi *= 2.0;
    for (int b = 0; b < 100; ++b) {
      const double mid = 0.5 * (lo + hi);
      (moment(mid) > target ? lo : hi) = mid;
    }
    a = 0.5 * (lo + hi);
  }
  (void)t;
  return a;
}

ValueFunction::Joint ValueFunction::run(double t, std::span<const HermitianTuple> history,
                                        const HermitianTuple& x, RngStream& rng, bool with_drift,
                                        bool antithetic, Proposal proposal) const {
  Plan plan = make_plan(t, history, x, proposal);
  const int n = x.n(), m = x.m();
  const double n2 = static_cast<double>(n) * n;
  Joint out;
  out.drift.drift = HermitianTuple(n, m);

  auto gradient_sum = [&](const PotentialEvaluation& ev) {
    HermitianTuple f(n, m);
    for (std::size_t j = static_cast<std::size_t>(plan.hist); j < ev.gradient.size(); ++j) f += ev.gradient[j];
    return f;
  };

  if (plan.terminal || plan.r == 0) {
    std::vector<HermitianTuple> slots(history.begin(), history.end());
    if (plan.fixed) slots.push_back(x);
    const auto ev = evaluate_potential(spec_, slots, u_);
    out.value.value = ev.value;
    out.value.samples = 1;
    out.value.ess = 1.0;
    out.drift.samples = 1;
    out.drift.ess = 1.0;
    if (plan.fixed && with_drift) out.drift.drift = -gradient_sum(ev);
    return out;
  }

  const bool exact_surrogate = spec_.components.size() == 1 &&
                               (spec_.components[0].word.is_zero() || spec_.components[0].lambda == Complex{0.0, 0.0});
  if (proposal == Proposal::Surrogate && opts_.pilot > 0 && !exact_surrogate) {
    const double a = fit_curvature(plan, t, history, x, rng);
    if (a != plan.a) {
      plan.a = a;
      plan.prior = a == 0.0;
      const Eigen::MatrixXd sigma = plan.sigma_inv.inverse();
      plan.p_inv = plan.prior
                       ? sigma
                       : Eigen::MatrixXd((plan.sigma_inv + 2.0 * a * Eigen::MatrixXd::Identity(plan.r, plan.r)).inverse());
      plan.chol = Eigen::LLT<Eigen::MatrixXd>(plan.p_inv).matrixL();
      plan.alpha = plan.prior ? Eigen::VectorXd::Ones(plan.r)
                              : Eigen::VectorXd(plan.p_inv * plan.sigma_inv * Eigen::VectorXd::Ones(plan.r));
      plan.log_det_term = plan.prior ? 0.0 : 0.5 * n2 * m * (log_det_spd(plan.p_inv) - log_det_spd(sigma));
    }
  }

  const std::size_t per_unit = antithetic ? 2 : 1;
  const std::size_t units = std::max<std::size_t>(1, (opts_.samples + per_unit - 1) / per_unit);
  const std::size_t draws = units * per_unit;
  std::vector<double> logw(draws), gval(draws);
  std::vector<HermitianTuple> fvals;
  if (with_drift) fvals.resize(draws);

  for (std::size_t u = 0; u < units; ++u) {
    std::vector<HermitianTuple> g;
    g.reserve(static_cast<std::size_t>(plan.r));
    double qprop = 0.0;
    for (int l = 0; l < plan.r; ++l) {
      g.push_back(sample_normalized_increment(n, m, 1.0, rng));
      qprop += hs_norm2(g.back());
    }
    for (std::size_t side = 0; side < per_unit; ++side) {
      const double sign = side == 0 ? 1.0 : -1.0;
      std::vector<HermitianTuple> slots(history.begin(), history.end());
      if (plan.fixed) slots.push_back(x);
      const std::size_t first = slots.size();
      for (int j = 0; j < plan.r; ++j) {
        HermitianTuple zj = plan.alpha(j) * x;
        for (int l = 0; l <= j; ++l) zj.axpy(sign * plan.chol(j, l), g[static_cast<std::size_t>(l)]);
        slots.push_back(std::move(zj));
      }
      double is_term = 0.0;
      if (!plan.prior) {
        double qprior = 0.0;
        std::vector<HermitianTuple> dz;
        for (int j = 0; j < plan.r; ++j) dz.push_back(slots[first + static_cast<std::size_t>(j)] - x);
        for (int j = 0; j < plan.r; ++j)
          for (int l = 0; l < plan.r; ++l)
            qprior += plan.sigma_inv(j, l) * hs_inner(dz[static_cast<std::size_t>(j)], dz[static_cast<std::size_t>(l)]);
        is_term = -0.5 * n2 * (qprior - qprop) + plan.log_det_term;
      }
      const std::size_t idx = u * per_unit + side;
      if (with_drift) {
        const auto ev = evaluate_potential(spec_, slots, u_);
        gval[idx] = ev.value;
        fvals[idx] = gradient_sum(ev);
      } else {
        gval[idx] = eval_potential(spec_, slots, u_);
      }
      logw[idx] = is_term - n2 * gval[idx];
    }
  }

  // Value: log-mean-exp over independent units.
  std::vector<double> unit_logw(units);
  for (std::size_t u = 0; u < units; ++u) {
    unit_logw[u] = log_sum_exp(std::span<const double>(logw.data() + u * per_unit, per_unit)) -
                   std::log(static_cast<double>(per_unit));
  }
  const LogMeanExp lme = log_mean_exp(unit_logw);
  const LogMeanExp lme_draws = log_mean_exp(logw);
  out.value.value = -lme.log_mean / n2;
  out.value.std_error = lme.stderr_log / n2;
  out.value.samples = draws;
  out.value.ess = lme_draws.ess;

  const auto [lmin, lmax] = std::minmax_element(logw.begin(), logw.end());
  const double spread = *lmax - *lmin;
  if (spread > opts_.spread_warning) {
    std::ostringstream os;
    os << "log-weight spread is " << spread << " nats; the average is dominated by rare paths";
    out.value.warnings.push_back(os.str());
  }
  if (lme_draws.ess < 0.01 * static_cast<double>(draws)) {
    std::ostringstream os;
    os << "effective sample size " << lme_draws.ess << " is below 1% of " << draws << " draws";
    out.value.warnings.push_back(os.str());
  }

  if (with_drift) {
    const double mx = *std::max_element(logw.begin(), logw.end());
    std::vector<double> w(draws);
    double wsum = 0.0;
    for (std::size_t s = 0; s < draws; ++s) {
      w[s] = std::exp(logw[s] - mx);
      wsum += w[s];
    }
    HermitianTuple mean(n, m);
    for (std::size_t s = 0; s < draws; ++s) mean.axpy(w[s] / wsum, fvals[s]);
    double var = 0.0;
    for (std::size_t u = 0; u < units; ++u) {
      HermitianTuple e(n, m);
      for (std::size_t side = 0; side < per_unit; ++side) {
        const std::size_t s = u * per_unit + side;
        e.axpy(w[s], fvals[s] - mean);
      }
      var += hs_norm2(e);
    }
    out.drift.drift = -mean;
    out.drift.drift.hermitianize();
    out.drift.std_error = std::sqrt(var) / wsum;
    out.drift.samples = draws;
    out.drift.ess = lme_draws.ess;
    out.drift.warnings = out.value.warnings;
  }
  return out;
}

ValueEstimate ValueFunction::value(double t, std::span<const HermitianTuple> history, const HermitianTuple& x,
                                   RngStream& rng) const {
  return run(t, history, x, rng, false, opts_.antithetic, opts_.proposal).value;
}

DriftEstimate ValueFunction::drift(double t, std::span<const HermitianTuple> history, const HermitianTuple& x,
                                   RngStream& rng) const {
  return run(t, history, x, rng, true, opts_.antithetic, opts_.proposal).drift;
}

DriftEstimate ValueFunction::drift_gradexp(double t, std::span<const HermitianTuple> history,
                                           const HermitianTuple& x, RngStream& rng, Proposal proposal) const {
  return run(t, history, x, rng, true, false, proposal).drift;
}

ValueFunction::Joint ValueFunction::value_and_drift(double t, std::span<const HermitianTuple> history,
                                                    const HermitianTuple& x, RngStream& rng) const {
  return run(t, history, x, rng, true, opts_.antithetic, opts_.proposal);
}

double ValueFunction::surrogate_kappa(double t, std::span<const HermitianTuple> history,
                                      const HermitianTuple& x) const {
  const Plan p = make_plan(t, history, x, Proposal::Surrogate);
  if (p.terminal) return 0.0;
  double kappa = 0.0;
  if (p.fixed) kappa += p.a;
  if (p.r > 0) {
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(p.r);
    const Eigen::VectorXd s1 = p.sigma_inv * one;
    kappa += 0.5 * (one.dot(s1) - s1.dot(p.alpha));
  }
  return kappa;
}

ValueEstimate semigroup_value(const ValueFunction& vf, double s, double delta,
                              std::span<const HermitianTuple> history, const HermitianTuple& x,
                              std::size_t outer, RngStream& rng) {
  if (!(delta > 0.0) || s + delta > 1.0) throw ConfigError("need 0 < delta and s + delta <= 1", "delta");
  const auto& times = vf.spec().times;
  for (double tj : times)
    if (tj > s && tj < s + delta) throw ConfigError("a slot time lies inside (s, s + delta)", "delta");
  const int hist = vf.history_length(s);
  if (static_cast<int>(history.size()) != hist) throw ConfigError("history length mismatch", "history");
  std::vector<HermitianTuple> next_hist(history.begin(), history.end());
  if (hist < vf.spec().slots() && times[static_cast<std::size_t>(hist)] == s) next_hist.push_back(x);

  const int n = x.n(), m = x.m();
  const double n2 = static_cast<double>(n) * n;
  const double d = n2 * m;
  const double t_next = s + delta;

  // Gaussian one-step proposal from the surrogate curvature of h_{s+delta}.
  const double kappa = std::max(0.0, vf.surrogate_kappa(t_next, next_hist, x));
  const double prec = 1.0 / delta + 2.0 * kappa;
  const double alpha = (1.0 / delta) / prec;
  const double sd = std::sqrt(1.0 / prec);
  const double log_det = 0.5 * d * (std::log(1.0 / prec) - std::log(delta));

  const std::size_t units = std::max<std::size_t>(1, (outer + 1) / 2);
  std::vector<double> unit_logw(units);
  double inner_var = 0.0;
  std::size_t count = 0;
  for (std::size_t u = 0; u < units; ++u) {
    const HermitianTuple g = sample_normalized_increment(n, m, 1.0, rng);
    double pair[2];
    for (int side = 0; side < 2; ++side) {
      const double sign = side == 0 ? 1.0 : -1.0;
      HermitianTuple y = alpha * x;
      y.axpy(sign * sd, g);
      const double qprior = hs_norm2(y - x) / delta;
      const double qprop = hs_norm2(g);
      const ValueEstimate inner = vf.value(t_next, next_hist, y, rng);
      inner_var += inner.std_error * inner.std_error;
      ++count;
      pair[side] = -0.5 * n2 * (qprior - qprop) + log_det - n2 * inner.value;
    }
    unit_logw[u] = log_sum_exp(std::span<const double>(pair, 2)) - std::log(2.0);
  }
  const LogMeanExp lme = log_mean_exp(unit_logw);
  ValueEstimate e;
  e.value = -lme.log_mean / n2;
  e.std_error = std::hypot(lme.stderr_log / n2, std::sqrt(inner_var) / static_cast<double>(count));
  e.samples = 2 * units;
  e.ess = lme.ess;
  return e;
}

ValueEstimate value_h(const ValueQuery& q, RngStream& rng) {
  ValueOptions o;
  o.samples = q.samples;
  ValueFunction vf(q.spec, q.u, o);
  return vf.value(q.t, q.history, q.x, rng);
}

DriftEstimate drift_logratio(const ValueQuery& q, RngStream& rng) {
  ValueOptions o;
  o.samples = q.samples;
  ValueFunction vf(q.spec, q.u, o);
  return vf.drift(q.t, q.history, q.x, rng);
}

DriftEstimate drift_gradexp(const ValueQuery& q, RngStream& rng) {
  ValueOptions o;
  o.samples = q.samples;
  ValueFunction vf(q.spec, q.u, o);
  return vf.drift_gradexp(q.t, q.history, q.x, rng);
}

}  // namespace mlap
