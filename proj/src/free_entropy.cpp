#include "mlap/free_entropy.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <memory>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mlap/errors.hpp"

namespace mlap {

namespace {

constexpr double kPi = std::numbers::pi;

Complex branch_sqrt(Complex w, double a, double b) { return std::sqrt(w - b) * std::sqrt(w - a); }

Complex numeric_derivative(const std::function<Complex(Complex)>& g, Complex w) {
  const double h = 1e-6 * std::max(1.0, std::abs(w));
  return (g(w + h) - g(w - h)) / (2.0 * h);
}

/// Subordination function omega(z) of mu boxplus semicircle(t).
Complex subordination(const SpectralDensity& mu, double t, Complex z) {
  const double eta_target = z.imag();
  double eta = std::max(2.0 * std::sqrt(t) + 1.0, eta_target);
  Complex w{z.real(), eta};
  Complex omega = w;
  for (int it = 0; it < 200; ++it) {
    const Complex next = w - t * mu.cauchy(omega);
    if (std::abs(next - omega) < 1e-14 * (1.0 + std::abs(omega))) {
      omega = next;
      break;
    }
    omega = next;
  }
  auto deriv = [&](Complex o) {
    return mu.cauchy_derivative ? mu.cauchy_derivative(o) : numeric_derivative(mu.cauchy, o);
  };
  while (eta > eta_target) {
    eta = std::max(eta_target, 0.5 * eta);
    w = Complex{z.real(), eta};
    for (int it = 0; it < 100; ++it) {
      const Complex f = omega + t * mu.cauchy(omega) - w;
      if (std::abs(f) < 1e-15 * (1.0 + std::abs(omega))) break;
      Complex step = -f / (1.0 + t * deriv(omega));
      while ((omega + step).imag() <= 0.0 && std::abs(step) > 1e-300) step *= 0.5;
      omega += step;
      if (std::abs(step) < 1e-16 * (1.0 + std::abs(omega))) break;
    }
  }
  return omega;
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double tail_term(double t_last, double phi_last, int m) {
  const double a = m / phi_last - t_last;
  return 0.5 * m * std::log((t_last + a) / (t_last + 1.0));
}

/// Powers tau(y^k), k = 0..6, of a single matrix.
std::array<double, 7> trace_powers(const Matrix& y) {
  std::array<double, 7> out{};
  Matrix p = Matrix::Identity(y.rows(), y.cols());
  for (int k = 0; k < 7; ++k) {
    out[static_cast<std::size_t>(k)] = std::real(tau(p));
    p = p * y;
  }
  return out;
}

/// Squared norm of the projection of the conjugate variable onto span{1, y, y^2, y^3},
/// from averaged moments.
double projected_fisher(const std::array<double, 7>& mom, const std::array<double, 4>& bitr) {
  Eigen::Matrix4d g;
  Eigen::Vector4d b;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) g(i, j) = mom[static_cast<std::size_t>(i + j)];
    b(i) = bitr[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector4d c = g.completeOrthogonalDecomposition().solve(b);
  return b.dot(c);
}

struct MomentSample {
  std::array<double, 7> mom{};
  std::array<double, 4> bitr{};
};

MomentSample moment_sample(const Matrix& y) {
  MomentSample s;
  s.mom = trace_powers(y);
  // (tau (x) tau)(d y^j) = sum_{a + b = j - 1} tau(y^a) tau(y^b)
  for (int j = 1; j < 4; ++j)
    for (int a = 0; a < j; ++a)
      s.bitr[static_cast<std::size_t>(j)] += s.mom[static_cast<std::size_t>(a)] * s.mom[static_cast<std::size_t>(j - 1 - a)];
  return s;
}

ValueEstimate projected_fisher_estimate(const std::vector<MomentSample>& ms) {
  const std::size_t n = ms.size();
  auto fisher_of = [&](std::size_t skip_lo, std::size_t skip_hi) {
    std::array<double, 7> mom{};
    std::array<double, 4> bitr{};
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= skip_lo && i < skip_hi) continue;
      for (std::size_t k = 0; k < 7; ++k) mom[k] += ms[i].mom[k];
      for (std::size_t k = 0; k < 4; ++k) bitr[k] += ms[i].bitr[k];
      ++count;
    }
    for (auto& v : mom) v /= static_cast<double>(count);
    for (auto& v : bitr) v /= static_cast<double>(count);
    return projected_fisher(mom, bitr);
  };
  ValueEstimate e;
  e.value = fisher_of(0, 0);
  e.samples = n;
  e.ess = static_cast<double>(n);
  const std::size_t groups = std::min<std::size_t>(20, n);
  if (groups >= 2) {
    std::vector<double> jk;
    for (std::size_t gidx = 0; gidx < groups; ++gidx)
      jk.push_back(fisher_of(gidx * n / groups, (gidx + 1) * n / groups));
    double mean = 0.0;
    for (double v : jk) mean += v;
    mean /= static_cast<double>(groups);
    double var = 0.0;
    for (double v : jk) var += (v - mean) * (v - mean);
    e.std_error = std::sqrt(var * (static_cast<double>(groups) - 1.0) / static_cast<double>(groups));
  }
  return e;
}

bool is_gaussian_spec(const PotentialSpec& spec) {
  return spec.slots() == 1 && spec.components.size() == 1 && spec.components[0].offset >= 0.0 &&
         (spec.components[0].word.is_zero() || spec.components[0].lambda == Complex{0.0, 0.0}) &&
         spec.components[0].quad >= 0.0;
}

}  // namespace

double SpectralDensity::normalization() const {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i];
  return s;
}

double SpectralDensity::moment(int k) const {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i] * std::pow(grid[i], k);
  return s;
}

double SpectralDensity::fisher() const {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i] * values[i] * values[i];
  return 4.0 * kPi * kPi / 3.0 * s;
}

void SpectralDensity::check(double tol) const {
  for (double v : values)
    if (!(v >= -tol)) throw NumericalError("spectral density has negative values");
  const double z = normalization();
  if (!(std::abs(z - 1.0) <= tol)) {
    std::ostringstream os;
    os << "spectral density integrates to " << z << "; refine the node count";
    throw NumericalError(os.str());
  }
}

SpectralDensity tabulate_density(double left, double right, const std::function<double(double)>& p, int nodes) {
  if (!(right > left) || nodes < 8) throw ConfigError("need left < right and at least 8 nodes", "nodes");
  SpectralDensity d;
  d.left = left;
  d.right = right;
  const double c = 0.5 * (left + right), r = 0.5 * (right - left);
  for (int j = 0; j < nodes; ++j) {
    const double th = kPi * (j + 0.5) / nodes;
    const double x = c + r * std::cos(th);
    d.grid.push_back(x);
    d.values.push_back(std::max(0.0, p(x)));
    d.weights.push_back(r * std::sin(th) * kPi / nodes);
  }
  return d;
}

SpectralDensity semicircle_density(double sigma2, int nodes) {
  if (!(sigma2 > 0.0)) throw ConfigError("variance must be positive", "sigma2");
  const double s = std::sqrt(sigma2);
  SpectralDensity d = tabulate_density(
      -2.0 * s, 2.0 * s, [=](double x) { return std::sqrt(std::max(0.0, 4.0 * sigma2 - x * x)) / (2.0 * kPi * sigma2); },
      nodes);
  d.cauchy = [=](Complex w) { return (w - branch_sqrt(w, -2.0 * s, 2.0 * s)) / (2.0 * sigma2); };
  d.cauchy_derivative = [=](Complex w) { return (1.0 - w / branch_sqrt(w, -2.0 * s, 2.0 * s)) / (2.0 * sigma2); };
  return d;
}

SpectralDensity quartic_density(double alpha, double beta, int nodes) {
  if (!(alpha > 0.0) || !(beta >= 0.0)) throw ConfigError("quartic density needs alpha > 0 and beta >= 0", "alpha");
  if (beta == 0.0) return semicircle_density(1.0 / alpha, nodes);
  const double r2 = (-alpha + std::sqrt(alpha * alpha + 48.0 * beta)) / (6.0 * beta);
  const double r = std::sqrt(r2);
  const double q0 = alpha + 2.0 * beta * r2, q2 = 4.0 * beta;
  SpectralDensity d = tabulate_density(
      -r, r, [=](double x) { return (q0 + q2 * x * x) * std::sqrt(std::max(0.0, r2 - x * x)) / (2.0 * kPi); }, nodes);
  d.cauchy = [=](Complex w) {
    return 0.5 * (alpha * w + 4.0 * beta * w * w * w - (q0 + q2 * w * w) * branch_sqrt(w, -r, r));
  };
  d.cauchy_derivative = [=](Complex w) {
    const Complex sq = branch_sqrt(w, -r, r);
    return 0.5 * (alpha + 12.0 * beta * w * w - 2.0 * q2 * w * sq - (q0 + q2 * w * w) * w / sq);
  };
  return d;
}

SpectralDensity equilibrium_density(const PotentialSpec& spec, int nodes) {
  spec.validate();
  if (spec.slots() != 1 || spec.components.size() != 1)
    throw ConfigError("equilibrium density needs one slot and one component", "components");
  const PotentialComponent& c = spec.components[0];
  double c2 = c.quad, c4 = 0.0;
  for (const Term& term : c.word.terms()) {
    for (const Letter& l : term.word)
      if (l.kind != LetterKind::SelfAdjoint || l.index != 0)
        throw ConfigError("equilibrium density supports words in X1 only", "components.word");
    const double coef = std::real(c.lambda * term.coeff);
    if (std::abs(std::imag(term.coeff)) > 0.0 && std::abs(std::imag(c.lambda)) > 0.0)
      throw ConfigError("equilibrium density needs a real potential", "components.lambda");
    switch (term.word.size()) {
      case 0: break;
      case 2: c2 += coef; break;
      case 4: c4 += coef; break;
      default: throw ConfigError("equilibrium density supports X1^2 and X1^4 terms only", "components.word");
    }
  }
  const double alpha = 1.0 / spec.times[0] + 2.0 * c2;
  return quartic_density(alpha, c4, nodes);
}

SpectralDensity free_convolve_semicircle(const SpectralDensity& mu, double t, int nodes) {
  if (!(t >= 0.0)) throw ConfigError("t must be nonnegative", "t");
  if (!mu.cauchy) throw ConfigError("density needs a Cauchy transform", "density");
  if (t == 0.0) return mu;
  constexpr double kEta = 1e-13;
  constexpr double kThreshold = 1e-7;
  auto density_at = [&](double x) { return -std::imag(mu.cauchy(subordination(mu, t, Complex{x, kEta}))) / kPi; };
  const auto peak = std::max_element(mu.values.begin(), mu.values.end()) - mu.values.begin();
  const double inside = mu.grid[static_cast<std::size_t>(peak)];
  auto edge = [&](double outside) {
    double in = inside, out = outside;
    for (int it = 0; it < 200 && std::abs(out - in) > 1e-15 * (1.0 + std::abs(in)); ++it) {
      const double mid = 0.5 * (in + out);
      (density_at(mid) > kThreshold ? in : out) = mid;
    }
    return 0.5 * (in + out);
  };
  const double reach = 2.0 * std::sqrt(t) + 1e-6;
  const double left = edge(mu.left - reach), right = edge(mu.right + reach);
  SpectralDensity d = tabulate_density(left, right, density_at, nodes);
  const SpectralDensity base = mu;
  d.cauchy = [base, t](Complex z) { return base.cauchy(subordination(base, t, z)); };
  return d;
}

namespace {

FlowReport flow_impl(const SpectralDensity& mu, std::span<const double> ts, const FlowOptions& opts, RngStream& rng,
                     const std::function<Matrix(RngStream&)>& sampler) {
  if (ts.empty()) throw ConfigError("empty t grid", "t");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(ts[i] >= 0.0)) throw ConfigError("t must be nonnegative", "t");
    if (i > 0 && !(ts[i] > ts[i - 1])) throw ConfigError("t grid must be increasing", "t");
  }
  FlowReport rep;
  rep.points.resize(ts.size());
  const RngStream base = rng.substream(0xF10Du);
  parallel_for(ts.size(), opts.threads, [&](std::size_t i) {
    FlowPoint& fp = rep.points[i];
    fp.t = ts[i];
    const SpectralDensity d = free_convolve_semicircle(mu, ts[i], opts.nodes);
    const double z = d.normalization();
    if (std::abs(z - 1.0) > 1e-6) {
      std::ostringstream os;
      os << "normalization drift " << z - 1.0 << " at t = " << ts[i];
      throw NumericalError(os.str());
    }
    fp.fisher.value = d.fisher();
    fp.fisher.std_error = std::abs(z - 1.0) * fp.fisher.value;
    fp.fisher.samples = d.values.size();
    fp.fisher.ess = static_cast<double>(d.values.size());
    if (sampler && opts.n > 0) {
      RngStream sub = base.substream(i);
      std::vector<MomentSample> ms;
      for (int s = 0; s < opts.samples; ++s) {
        Matrix y = sampler(sub);
        if (ts[i] > 0.0) y += std::sqrt(ts[i]) * sample_normalized_increment(opts.n, 1, 1.0, sub)[0];
        ms.push_back(moment_sample(y));
      }
      fp.matrix = projected_fisher_estimate(ms);
      fp.residual = fp.matrix.value - fp.fisher.value;
    }
  });
  rep.worst_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < rep.points.size(); ++i) {
    const double inc = rep.points[i].fisher.value - rep.points[i - 1].fisher.value -
                       3.0 * combined_stderr(rep.points[i].fisher, rep.points[i - 1].fisher) - 1e-10;
    rep.worst_increase = std::max(rep.worst_increase, inc);
  }
  if (rep.points.size() < 2) rep.worst_increase = 0.0;
  rep.monotone = rep.worst_increase <= 0.0;
  std::vector<double> xs, ys;
  const double phi0 = rep.points.front().fisher.value;
  for (std::size_t i = 1; i < rep.points.size(); ++i) {
    const double dt = rep.points[i].t - rep.points.front().t;
    const double df = std::abs(rep.points[i].fisher.value - phi0);
    if (dt > 0.0 && dt <= opts.holder_window && df > 0.0) {
      xs.push_back(dt);
      ys.push_back(df);
    }
  }
  rep.holder_exponent = xs.size() >= 2 ? loglog_fit(xs, ys).slope : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

}  // namespace

FlowReport fisher_semicircular_flow(const SpectralDensity& mu, std::span<const double> ts, const FlowOptions& opts,
                                    RngStream& rng) {
  return flow_impl(mu, ts, opts, rng, {});
}

FlowReport fisher_semicircular_flow(const PotentialSpec& spec, std::span<const double> ts, const FlowOptions& opts,
                                    RngStream& rng) {
  const SpectralDensity mu = equilibrium_density(spec, opts.nodes);
  if (opts.n <= 0) return flow_impl(mu, ts, opts, rng, {});
  std::function<Matrix(RngStream&)> sampler;
  std::vector<Matrix> pool;
  if (is_gaussian_spec(spec)) {
    const double var = 1.0 / (1.0 / spec.times[0] + 2.0 * spec.components[0].quad);
    sampler = [n = opts.n, var](RngStream& r) { return Matrix(std::sqrt(var) * sample_normalized_increment(n, 1, 1.0, r)[0]); };
  } else {
    const GibbsEnsemble ens(spec, opts.n, 1);
    MalaOptions mo = opts.mala;
    mo.samples = opts.samples;
    RngStream chain_rng = rng.substream(0x3A1Au);
    const MalaResult mr = ens.sample(mo, chain_rng);
    for (const auto& s : mr.samples) pool.push_back(s[0][0]);
    auto counter = std::make_shared<std::size_t>(0);
    sampler = [pool, counter](RngStream&) { return pool[(*counter)++ % pool.size()]; };
  }
  if (!pool.empty()) {
    // Pool draws are consumed in order, so the points run sequentially.
    FlowOptions seq = opts;
    seq.threads = 1;
    seq.samples = static_cast<int>(pool.size());
    return flow_impl(mu, ts, seq, rng, sampler);
  }
  return flow_impl(mu, ts, opts, rng, sampler);
}

double chi_star(std::span<const FlowPoint> flow, int m) {
  if (flow.size() < 3) throw ConfigError("flow needs at least three points", "t");
  if (flow.front().t != 0.0) throw ConfigError("flow must start at t = 0", "t");
  const std::size_t n = flow.size();
  std::vector<double> t(n), y(n), dy(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = flow[i].t;
    y[i] = m / (1.0 + t[i]) - flow[i].fisher.value;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      dy[i] = (y[1] - y[0]) / (t[1] - t[0]);
    } else if (i + 1 == n) {
      dy[i] = (y[i] - y[i - 1]) / (t[i] - t[i - 1]);
    } else {
      const double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
      dy[i] = (h1 * h1 * (y[i] - y[i - 1]) + h0 * h0 * (y[i + 1] - y[i])) / (h0 * h1 * (h0 + h1));
    }
  }
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = t[i + 1] - t[i];
    integral += 0.5 * h * (y[i] + y[i + 1]) + h * h * (dy[i] - dy[i + 1]) / 12.0;
  }
  const double tl = t[n - 1], tp = t[n - 2];
  const double a_last = m / flow[n - 1].fisher.value - tl;
  const double a_prev = m / flow[n - 2].fisher.value - tp;
  if (std::abs(a_last - a_prev) > 0.01 * std::max(1.0, std::abs(a_last))) {
    std::ostringstream os;
    os << "flow horizon T = " << tl << " too short for the tail closure; extend the grid to T >= " << 4.0 * tl;
    throw ConfigError(os.str(), "t");
  }
  return 0.5 * integral + tail_term(tl, flow[n - 1].fisher.value, m) + 0.5 * m * std::log(2.0 * kPi * std::numbers::e);
}

double chi_star(const std::function<double(double)>& fisher, int m, double horizon, double tol) {
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive", "horizon");
  const double phi_h = fisher(horizon);
  const double phi_half = fisher(0.5 * horizon);
  const double a1 = m / phi_h - horizon, a0 = m / phi_half - 0.5 * horizon;
  if (std::abs(a1 - a0) > 0.01 * std::max(1.0, std::abs(a1))) {
    std::ostringstream os;
    os << "horizon " << horizon << " too short for the tail closure; use at least " << 4.0 * horizon;
    throw ConfigError(os.str(), "horizon");
  }
  auto integrand = [&](double t) { return m / (1.0 + t) - fisher(t); };
  const double f0 = integrand(0.0), fh = m / (1.0 + horizon) - phi_h, fm = integrand(0.5 * horizon);
  const double whole = horizon / 6.0 * (f0 + 4.0 * fm + fh);
  const double integral = adaptive_simpson(integrand, 0.0, horizon, f0, fm, fh, whole, tol, 30);
  return 0.5 * integral + tail_term(horizon, phi_h, m) + 0.5 * m * std::log(2.0 * kPi * std::numbers::e);
}

ChiControlResult chi_microstates_control(const PotentialSpec& spec, int n, int m, const ChiBudget& budget,
                                         RngStream& rng, const UnitaryTuple& u) {
  spec.validate();
  if (spec.slots() != 1) throw ConfigError("chi estimation needs a one-slot spec", "times");
  for (const auto& c : spec.components)
    if (c.quad < 0.0) throw ConfigError("chi estimation needs a convex spec (all C_i >= 0)", "components.C");
  RhsOptions ro;
  ro.paths = budget.paths;
  ro.steps = budget.steps;
  ro.inner = budget.inner;
  ro.perturbation = budget.perturbation;
  ro.threads = budget.threads;
  const RhsResult r = rhs_control_cost(spec, n, m, ro, rng, u);
  ChiControlResult out;
  out.chi_g = r.control;
  out.chi_g.value = -r.control.value;
  out.second_moment = mean_estimate(r.endpoint_m2);
  out.warnings = r.warnings;
  return out;
}

double chi_constant() {
  static const double c = [] {
    const SpectralDensity sc = semicircle_density(1.0);
    const double chi = chi_star([&](double t) { return free_convolve_semicircle(sc, t, 256).fisher(); }, 1, 50.0, 1e-8);
    return chi - 0.5;
  }();
  return c;
}

double chi_from_chi_g(double chi_g, double second_moment, int m) {
  return chi_g + 0.5 * second_moment + m * chi_constant();
}

std::vector<ValueEstimate> conjugate_variable_residual(std::span<const SlotState> samples, const PotentialSpec& spec,
                                                       std::span<const NCPolynomial> battery, LetterRef letter,
                                                       bool include_potential, const UnitaryTuple& u) {
  if (samples.empty()) throw ConfigError("no samples", "samples");
  if (letter.slot < 0 || letter.slot >= spec.slots()) throw ConfigError("letter slot out of range", "letter");
  std::vector<std::vector<double>> vals(battery.size());
  std::vector<TensorPolynomial> quotients;
  for (const auto& p : battery) quotients.push_back(free_difference_quotient(p, letter));
  for (const SlotState& x : samples) {
    std::vector<HermitianTuple> xi = bridge_gradient(spec.times, x);
    if (include_potential) {
      const std::vector<HermitianTuple> g = gradient_potential(spec, x, u);
      for (std::size_t s = 0; s < xi.size(); ++s) xi[s] += g[s];
    }
    const Matrix& xs = xi[static_cast<std::size_t>(letter.slot)][letter.index];
    for (std::size_t b = 0; b < battery.size(); ++b) {
      const Complex lhs = tau(xs * eval(battery[b], x, u));
      const Complex rhs = bitrace(quotients[b], x, u);
      vals[b].push_back(std::real(lhs - rhs));
    }
  }
  std::vector<ValueEstimate> out;
  for (const auto& v : vals) {
    ValueEstimate e = mean_estimate(v);
    const double ess = effective_sample_size(v);
    if (ess > 0.0 && ess < static_cast<double>(v.size())) e.std_error *= std::sqrt(static_cast<double>(v.size()) / ess);
    e.ess = ess;
    out.push_back(e);
  }
  return out;
}

}  // namespace mlap
