#include "mlap/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mlap/errors.hpp"
#include "mlap/sde.hpp"

namespace mlap {

namespace {

struct LhsDraw {
  std::vector<HermitianTuple> cumulative;  // unit-scale Brownian values at the slots
  double energy = 0.0;                     // sum_j ||G_j||^2 of the unit increments
};

LhsDraw lhs_draw(const PotentialSpec& spec, int n, int m, RngStream& rng) {
  LhsDraw d;
  HermitianTuple x(n, m);
  double prev = 0.0;
  for (double t : spec.times) {
    const HermitianTuple g = sample_normalized_increment(n, m, 1.0, rng);
    d.energy += hs_norm2(g);
    x.axpy(std::sqrt(t - prev), g);
    d.cumulative.push_back(x);
    prev = t;
  }
  return d;
}

/// log prior/proposal - N^2 f for the draw scaled by s; also returns f.
double lhs_log_term(const PotentialSpec& spec, const LhsDraw& d, double s, double n2, double dk,
                    const UnitaryTuple& u, double* f_out) {
  std::vector<HermitianTuple> slots = d.cumulative;
  for (auto& x : slots) x *= s;
  const double f = eval_potential(spec, slots, u);
  if (f_out) *f_out = f;
  const double logw = s == 1.0 ? 0.0 : 0.5 * n2 * (1.0 - s * s) * d.energy + dk * std::log(s);
  return logw - n2 * f;
}

}  // namespace

LhsResult lhs_log_laplace(const PotentialSpec& spec, int n, int m, const LhsOptions& opts, RngStream& rng,
                          const UnitaryTuple& u) {
  spec.validate();
  if (n < 1 || m < 1) throw ConfigError("n and m must be positive", "n");
  if (opts.samples < 2) throw ConfigError("need at least two samples", "samples");
  const double n2 = static_cast<double>(n) * n;
  const double dk = n2 * m * spec.slots();
  LhsResult r;

  if (opts.tune_scale && opts.pilot > 1) {
    RngStream pilot_rng = rng.substream(0xA11CEu);
    std::vector<LhsDraw> pilot;
    for (int i = 0; i < opts.pilot; ++i) pilot.push_back(lhs_draw(spec, n, m, pilot_rng));
    auto objective = [&](double s) {
      std::vector<double> v;
      for (const auto& d : pilot) v.push_back(lhs_log_term(spec, d, s, n2, dk, u, nullptr));
      const ValueEstimate e = mean_estimate(v);
      return e.std_error;  // proportional to the standard deviation
    };
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.05, hi = 1.5;
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = objective(x1), f2 = objective(x2);
    for (int it = 0; it < 60 && hi - lo > 1e-10; ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - invphi * (hi - lo);
        f1 = objective(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + invphi * (hi - lo);
        f2 = objective(x2);
      }
    }
    const double best = 0.5 * (lo + hi);
    r.scale = objective(best) < objective(1.0) ? best : 1.0;
  }

  std::vector<double> terms(opts.samples), fvals(opts.samples);
  const RngStream base = rng.substream(0x5A3Du);
  parallel_for(opts.samples, 0, [&](std::size_t i) {
    RngStream sub = base.substream(i);
    const LhsDraw d = lhs_draw(spec, n, m, sub);
    terms[i] = lhs_log_term(spec, d, r.scale, n2, dk, u, &fvals[i]);
  });
  const LogMeanExp lme = log_mean_exp(terms);
  r.estimate.value = -lme.log_mean / n2;
  r.estimate.std_error = lme.stderr_log / n2;
  r.estimate.samples = opts.samples;
  r.estimate.ess = lme.ess;
  const auto [mn, mx] = std::minmax_element(fvals.begin(), fvals.end());
  r.spread = n2 * (*mx - *mn);
  r.direct_regime = r.spread <= opts.spread_warning;
  if (!r.direct_regime) {
    std::ostringstream os;
    os << "N^2 * spread(f) = " << r.spread << " nats exceeds " << opts.spread_warning
       << "; the direct estimate is unreliable, rely on the control representation";
    r.estimate.warnings.push_back(os.str());
  }
  if (lme.ess < 0.01 * static_cast<double>(opts.samples)) {
    std::ostringstream os;
    os << "effective sample size " << lme.ess << " below 1% of the budget";
    r.estimate.warnings.push_back(os.str());
  }
  return r;
}

RhsResult rhs_control_cost(const PotentialSpec& spec, int n, int m, const RhsOptions& opts, RngStream& rng,
                           const UnitaryTuple& u) {
  spec.validate();
  if (opts.paths < 2 || opts.steps < 1 || opts.inner < 1)
    throw ConfigError("paths, steps and inner budgets must be positive", "paths");
  ValueOptions vo;
  vo.samples = opts.inner;
  const ValueFunction vf(spec, u, vo);
  const std::vector<double> grid = uniform_grid(1.0, opts.steps, spec.times);
  const std::size_t nodes = grid.size();

  std::vector<double> total(opts.paths), term(opts.paths), ctrl(opts.paths), m2(opts.paths), m4(opts.paths);
  std::vector<std::vector<std::string>> warns(opts.paths);
  const RngStream base = rng.substream(0xC0575u);
  parallel_for(opts.paths, opts.threads, [&](std::size_t p) {
    RngStream path_rng = base.substream(p);
    HermitianTuple k_field(n, m);
    if (opts.perturbation != 0.0) k_field = sample_normalized_increment(n, m, 1.0, path_rng);
    std::vector<HermitianTuple> states;
    states.reserve(nodes);
    states.push_back(HermitianTuple(n, m));
    std::vector<double> b2(nodes, 0.0);
    for (std::size_t i = 0; i < nodes; ++i) {
      const double t = grid[i];
      RngStream drift_rng = path_rng.substream(1000003u + i);
      const auto hist = history_at(spec.times, t, std::span<const double>(grid.data(), i + 1), states);
      DriftEstimate d = vf.drift(t, hist, states.back(), drift_rng);
      if (!d.warnings.empty() && warns[p].empty()) warns[p] = d.warnings;
      HermitianTuple b = std::move(d.drift);
      if (opts.perturbation != 0.0) b.axpy(opts.perturbation, k_field);
      b2[i] = hs_norm2(b);
      if (i + 1 == nodes) break;
      const double dt = grid[i + 1] - grid[i];
      HermitianTuple next = states.back();
      next.axpy(dt, b);
      next += sample_normalized_increment(n, m, dt, path_rng);
      states.push_back(std::move(next));
    }
    double c = 0.0;
    for (std::size_t i = 0; i + 1 < nodes; ++i) c += 0.5 * (grid[i + 1] - grid[i]) * (b2[i] + b2[i + 1]);
    c *= 0.5;
    std::vector<HermitianTuple> slots = history_at(spec.times, 2.0, grid, states);
    const double f = eval_potential(spec, slots, u);
    term[p] = f;
    ctrl[p] = c;
    total[p] = f + c;
    const HermitianTuple& last = slots.back();
    m2[p] = hs_norm2(last);
    double q = 0.0;
    for (int k = 0; k < m; ++k) {
      const Matrix sq = last[k] * last[k];
      q += tau_product_re(sq, sq);
    }
    m4[p] = q;
  });
  RhsResult r;
  r.total = mean_estimate(total);
  r.terminal = mean_estimate(term);
  r.control = mean_estimate(ctrl);
  r.endpoint_m2 = std::move(m2);
  r.endpoint_m4 = std::move(m4);
  for (const auto& w : warns)
    if (!w.empty()) {
      r.warnings = w;
      break;
    }
  return r;
}

LaplaceReport n_convergence(const PotentialSpec& spec, const std::vector<int>& ns, int m, const LhsOptions& lhs,
                            const RhsOptions& rhs, RngStream& rng, const UnitaryTuple& u) {
  if (ns.empty()) throw ConfigError("N list is empty", "N");
  for (std::size_t i = 1; i < ns.size(); ++i)
    if (ns[i] <= ns[i - 1]) throw ConfigError("N list must be increasing", "N");
  LaplaceReport rep;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    RngStream sub = rng.substream(static_cast<std::uint64_t>(ns[i]));
    LaplaceRow row;
    row.n = ns[i];
    RngStream lrng = sub.substream(1);
    RngStream rrng = sub.substream(2);
    const LhsResult l = lhs_log_laplace(spec, ns[i], m, lhs, lrng, u);
    const RhsResult r = rhs_control_cost(spec, ns[i], m, rhs, rrng, u);
    row.lhs = l.estimate;
    row.rhs = r.total;
    row.gap = row.lhs.value - row.rhs.value;
    row.pass = within_sigma(row.lhs, row.rhs, 3.0);
    row.direct_regime = l.direct_regime;
    rep.rows.push_back(row);
  }
  const std::size_t k = rep.rows.size();
  if (k >= 2) {
    const double a = static_cast<double>(rep.rows[k - 2].n), b = static_cast<double>(rep.rows[k - 1].n);
    rep.extrapolated = (b * b * rep.rows[k - 1].rhs.value - a * a * rep.rows[k - 2].rhs.value) / (b * b - a * a);
  } else {
    rep.extrapolated = rep.rows[0].rhs.value;
  }
  for (std::size_t i = 1; i < k; ++i)
    if (!within_sigma(rep.rows[i].rhs, rep.rows[i - 1].rhs, 3.0)) rep.drift_detected = true;
  return rep;
}

}  // namespace mlap
