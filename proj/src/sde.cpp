#include "mlap/sde.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mlap/errors.hpp"
#include "mlap/estimate.hpp"

namespace mlap {

namespace {

constexpr double kExplosion = 1e6;

void check_grid(std::span<const double> grid) {
  if (grid.size() < 2) throw ConfigError("grid needs at least two nodes", "grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ConfigError("grid must be strictly increasing", "grid");
}

void check_explosion(const HermitianTuple& x, double t) {
  const double nrm = std::sqrt(hs_norm2(x));
  if (!std::isfinite(nrm) || nrm > kExplosion) {
    std::ostringstream os;
    os << "state norm " << nrm << " exceeded " << kExplosion << " at t=" << t;
    throw NumericalError(os.str());
  }
}

}  // namespace

std::vector<double> uniform_grid(double horizon, int steps, std::span<const double> include) {
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive", "horizon");
  if (steps < 1) throw ConfigError("need at least one step", "steps");
  std::vector<double> g;
  for (int i = 0; i <= steps; ++i) g.push_back(horizon * i / steps);
  g.back() = horizon;
  const double eps = 1e-12 * horizon;
  for (double t : include) {
    if (t < 0.0 || t > horizon) continue;
    auto it = std::lower_bound(g.begin(), g.end(), t - eps);
    if (it != g.end() && std::abs(*it - t) <= eps) {
      *it = t;
      continue;
    }
    g.insert(it, t);
  }
  return g;
}

std::vector<HermitianTuple> sample_path_increments(int n, int m, std::span<const double> grid, RngStream& rng) {
  check_grid(grid);
  std::vector<HermitianTuple> inc;
  inc.reserve(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    inc.push_back(sample_normalized_increment(n, m, grid[i + 1] - grid[i], rng));
  return inc;
}

std::vector<HermitianTuple> coarsen_increments(std::span<const HermitianTuple> increments, int factor) {
  if (factor < 1 || increments.size() % static_cast<std::size_t>(factor) != 0)
    throw ConfigError("coarsening factor must divide the step count", "factor");
  std::vector<HermitianTuple> out;
  for (std::size_t i = 0; i < increments.size(); i += static_cast<std::size_t>(factor)) {
    HermitianTuple s = increments[i];
    for (int j = 1; j < factor; ++j) s += increments[i + static_cast<std::size_t>(j)];
    out.push_back(std::move(s));
  }
  return out;
}

ControlledPath euler_maruyama(const DriftField& field, const HermitianTuple& x0, std::span<const double> grid,
                              std::span<const HermitianTuple> increments) {
  check_grid(grid);
  if (increments.size() + 1 != grid.size()) throw ConfigError("one increment per grid step is required", "grid");
  if (std::isfinite(field.lipschitz) && field.lipschitz > 0.0) {
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
      if (grid[i + 1] - grid[i] > 1.0 / (4.0 * field.lipschitz) * (1.0 + 1e-12))
        throw ConfigError("grid step exceeds 1/(4 L) for the drift Lipschitz estimate", "grid");
  }
  ControlledPath p;
  p.grid.assign(grid.begin(), grid.end());
  p.states.reserve(grid.size());
  p.drifts.reserve(grid.size());
  p.states.push_back(x0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double dt = grid[i + 1] - grid[i];
    HermitianTuple b = field.fn ? field.fn(grid[i], std::span<const double>(grid.data(), i + 1),
                                           std::span<const HermitianTuple>(p.states.data(), i + 1))
                                : HermitianTuple(x0.n(), x0.m());
    HermitianTuple next = p.states[i];
    next.axpy(dt, b);
    next += increments[i];
    check_explosion(next, grid[i + 1]);
    p.drifts.push_back(std::move(b));
    p.states.push_back(std::move(next));
  }
  // Drift at the final node for completeness of the record.
  const std::size_t last = grid.size() - 1;
  p.drifts.push_back(field.fn ? field.fn(grid[last], grid, p.states) : HermitianTuple(x0.n(), x0.m()));
  return p;
}

ControlledPath euler_maruyama(const DriftField& field, const HermitianTuple& x0, std::span<const double> grid,
                              RngStream& rng) {
  const auto inc = sample_path_increments(x0.n(), x0.m(), grid, rng);
  ControlledPath p = euler_maruyama(field, x0, grid, inc);
  p.seed = rng.seed();
  p.stream = rng.stream_id();
  return p;
}

std::vector<HermitianTuple> history_at(std::span<const double> slot_times, double t,
                                       std::span<const double> grid, std::span<const HermitianTuple> states) {
  std::vector<HermitianTuple> h;
  for (double tj : slot_times) {
    if (!(tj < t)) break;
    auto it = std::lower_bound(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(states.size()), tj);
    const std::size_t k = static_cast<std::size_t>(it - grid.begin());
    if (k < states.size() && grid[k] == tj) {
      h.push_back(states[k]);
    } else {
      if (k == 0 || k >= states.size()) throw ConfigError("slot time outside the simulated range", "grid");
      const double w = (tj - grid[k - 1]) / (grid[k] - grid[k - 1]);
      h.push_back((1.0 - w) * states[k - 1] + w * states[k]);
    }
  }
  return h;
}

DriftField value_drift(const ValueFunction& vf, std::uint64_t stream_key) {
  DriftField f;
  f.monotone = vf.spec().convex_mode();
  const std::vector<double> times = vf.spec().times;
  f.fn = [&vf, times, stream_key](double t, std::span<const double> grid, std::span<const HermitianTuple> states) {
    RngStream rng(stream_key, mix64(stream_key ^ std::bit_cast<std::uint64_t>(t)));
    const auto hist = history_at(times, t, grid, states);
    return vf.drift(t, hist, states.back(), rng).drift;
  };
  return f;
}

ConvexFn potential_convex_fn(const PotentialSpec& spec, int n, int m) {
  if (spec.slots() != 1) throw ConfigError("a one-slot potential is required", "times");
  ConvexFn f;
  f.value = [spec, n, m](const Vector& y) {
    const HermitianTuple x = from_tau_coords(RealCoords{y}, n, m);
    return eval_potential(spec, std::span<const HermitianTuple>(&x, 1));
  };
  f.gradient = [spec, n, m](const Vector& y) -> Vector {
    const HermitianTuple x = from_tau_coords(RealCoords{y}, n, m);
    return tau_coords(gradient_potential(spec, std::span<const HermitianTuple>(&x, 1))[0]).values;
  };
  return f;
}

ControlledPath euler_yosida(const ConvexFamily& family, double lambda, const HermitianTuple& x0,
                            std::span<const double> grid, std::span<const HermitianTuple> increments) {
  if (!(lambda > 0.0) || lambda > 1.0) throw ConfigError("lambda must lie in (0, 1]", "lambda");
  check_grid(grid);
  if (increments.size() + 1 != grid.size()) throw ConfigError("one increment per grid step is required", "grid");
  const int n = x0.n(), m = x0.m();
  ControlledPath p;
  p.grid.assign(grid.begin(), grid.end());
  p.states.push_back(x0);
  RealCoords warm;
  auto drift_at = [&](double t, const HermitianTuple& x) {
    const ConvexFn g = family(t);
    const RealCoords y = tau_coords(x);
    const ProxResult j = prox_solve(g, lambda, y, {}, warm.dim() == y.dim() ? &warm : nullptr);
    warm = j.point;
    return from_tau_coords(RealCoords{-(y.values - j.point.values) / lambda}, n, m);
  };
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double dt = grid[i + 1] - grid[i];
    HermitianTuple b = drift_at(grid[i], p.states[i]);
    HermitianTuple next = p.states[i];
    next.axpy(dt, b);
    next += increments[i];
    check_explosion(next, grid[i + 1]);
    p.drifts.push_back(std::move(b));
    p.states.push_back(std::move(next));
  }
  p.drifts.push_back(drift_at(grid.back(), p.states.back()));
  return p;
}

ControlledPath euler_yosida(const ConvexFamily& family, double lambda, const HermitianTuple& x0,
                            std::span<const double> grid, RngStream& rng) {
  const auto inc = sample_path_increments(x0.n(), x0.m(), grid, rng);
  ControlledPath p = euler_yosida(family, lambda, x0, grid, inc);
  p.seed = rng.seed();
  p.stream = rng.stream_id();
  return p;
}

// ---- Langevin -------------------------------------------------------------

namespace {

void check_langevin(const PotentialSpec& spec, const LangevinOptions& opts) {
  spec.validate();
  if (spec.slots() != 1) throw ConfigError("Langevin dynamics needs a one-slot potential", "times");
  for (const auto& c : spec.components)
    if (c.quad < 0.0) throw ConfigError("Langevin dynamics needs a convex potential (all C >= 0)", "components");
  if (!(opts.dt > 0.0) || !(opts.horizon > 0.0)) throw ConfigError("dt and horizon must be positive", "dt");
}

HermitianTuple langevin_step(const PotentialSpec& spec, const HermitianTuple& x, double decay, double noise_sd,
                             const HermitianTuple& noise) {
  const auto grad = gradient_potential(spec, std::span<const HermitianTuple>(&x, 1))[0];
  HermitianTuple next = decay * x;
  next.axpy(-(1.0 - decay), grad);
  next.axpy(noise_sd, noise);
  return next;
}

}  // namespace

LangevinResult langevin_stationary(const PotentialSpec& spec, const HermitianTuple& x0,
                                   const LangevinOptions& opts, RngStream& rng) {
  check_langevin(spec, opts);
  const int steps = static_cast<int>(std::ceil(opts.horizon / opts.dt - 1e-9));
  const double h = opts.horizon / steps;
  const double decay = std::exp(-0.5 * h);
  const double noise_sd = std::sqrt(1.0 - std::exp(-h));
  LangevinResult r;
  r.state = x0;
  for (int s = 0; s < steps; ++s) {
    const HermitianTuple g = sample_normalized_increment(x0.n(), x0.m(), 1.0, rng);
    r.state = langevin_step(spec, r.state, decay, noise_sd, g);
    check_explosion(r.state, (s + 1) * h);
    if (opts.record_every > 0 && (s + 1) % opts.record_every == 0) {
      r.times.push_back((s + 1) * h);
      r.second_moment.push_back(hs_norm2(r.state));
    }
  }
  return r;
}

CouplingReport langevin_coupling(const PotentialSpec& spec, const HermitianTuple& x, const HermitianTuple& y,
                                 const LangevinOptions& opts, RngStream& rng) {
  check_langevin(spec, opts);
  const int steps = static_cast<int>(std::ceil(opts.horizon / opts.dt - 1e-9));
  const double h = opts.horizon / steps;
  const double decay = std::exp(-0.5 * h);
  const double noise_sd = std::sqrt(1.0 - std::exp(-h));
  CouplingReport r;
  r.initial = hs_norm2(x - y);
  HermitianTuple a = x, b = y;
  r.times.push_back(0.0);
  r.distance2.push_back(r.initial);
  r.worst_ratio = r.initial > 0.0 ? 1.0 : 0.0;
  for (int s = 0; s < steps; ++s) {
    const HermitianTuple g = sample_normalized_increment(x.n(), x.m(), 1.0, rng);
    a = langevin_step(spec, a, decay, noise_sd, g);
    b = langevin_step(spec, b, decay, noise_sd, g);
    const double t = (s + 1) * h;
    const double d2 = hs_norm2(a - b);
    r.times.push_back(t);
    r.distance2.push_back(d2);
    if (r.initial > 0.0) r.worst_ratio = std::max(r.worst_ratio, d2 / (std::exp(-t) * r.initial));
  }
  return r;
}

// ---- Picard ---------------------------------------------------------------

namespace {

/// y^0 .. y^degree
std::vector<Matrix> powers(const Matrix& y, int degree) {
  std::vector<Matrix> p;
  p.push_back(Matrix::Identity(y.rows(), y.cols()));
  for (int d = 1; d <= degree; ++d) p.push_back(p.back() * y);
  return p;
}

HermitianTuple apply_field(const std::vector<std::vector<double>>& beta, const HermitianTuple& y, int degree) {
  HermitianTuple out(y.n(), y.m());
  for (int k = 0; k < y.m(); ++k) {
    const auto pw = powers(y[k], degree);
    for (int d = 0; d <= degree; ++d) out[k] += beta[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] * pw[static_cast<std::size_t>(d)];
  }
  out.hermitianize();
  return out;
}

}  // namespace

PicardReport picard_fbsde(const PotentialSpec& terminal, const HermitianTuple& x0, const PicardOptions& opts,
                          RngStream& rng) {
  terminal.validate();
  if (terminal.slots() != 1) throw ConfigError("the terminal cost must have one slot", "times");
  if (!(opts.horizon > 0.0) || opts.horizon > 1.0) throw ConfigError("horizon must lie in (0, 1]", "horizon");
  if (opts.steps < 1 || opts.paths < 2 || opts.degree < 0)
    throw ConfigError("steps, paths and degree must be positive", "steps");
  const int n = x0.n(), m = x0.m();
  const int deg = opts.degree;
  const std::vector<double> grid = uniform_grid(opts.horizon, opts.steps);
  const std::size_t nodes = grid.size();
  const std::size_t paths = static_cast<std::size_t>(opts.paths);

  std::vector<std::vector<HermitianTuple>> noise(paths);
  for (std::size_t p = 0; p < paths; ++p) {
    RngStream sub = rng.substream(p);
    noise[p] = sample_path_increments(n, m, grid, sub);
  }

  using Field = std::vector<std::vector<std::vector<double>>>;  // [node][matrix][power]
  Field field(nodes, std::vector<std::vector<double>>(static_cast<std::size_t>(m),
                                                      std::vector<double>(static_cast<std::size_t>(deg + 1), 0.0)));
  bool have_field = false;

  auto simulate = [&](const Field& f, bool use_field) {
    std::vector<std::vector<HermitianTuple>> ys(paths);
    parallel_for(paths, 0, [&](std::size_t p) {
      auto& y = ys[p];
      y.reserve(nodes);
      y.push_back(x0);
      for (std::size_t i = 0; i + 1 < nodes; ++i) {
        HermitianTuple next = y[i];
        if (use_field) next.axpy(-(grid[i + 1] - grid[i]), apply_field(f[i], y[i], deg));
        next += noise[p][i];
        check_explosion(next, grid[i + 1]);
        y.push_back(std::move(next));
      }
    });
    return ys;
  };

  auto regress = [&](const std::vector<std::vector<HermitianTuple>>& ys) {
    std::vector<HermitianTuple> target(paths);
    for (std::size_t p = 0; p < paths; ++p)
      target[p] = gradient_potential(terminal, std::span<const HermitianTuple>(&ys[p].back(), 1))[0];
    Field f(nodes, std::vector<std::vector<double>>(static_cast<std::size_t>(m),
                                                    std::vector<double>(static_cast<std::size_t>(deg + 1), 0.0)));
    for (std::size_t i = 0; i < nodes; ++i) {
      for (int k = 0; k < m; ++k) {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(deg + 1, deg + 1);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(deg + 1);
        for (std::size_t p = 0; p < paths; ++p) {
          const auto pw = powers(ys[p][i][k], deg);
          for (int a = 0; a <= deg; ++a) {
            rhs(a) += tau_product_re(pw[static_cast<std::size_t>(a)], target[p][k]);
            for (int b = 0; b <= deg; ++b)
              gram(a, b) += tau_product_re(pw[static_cast<std::size_t>(a)], pw[static_cast<std::size_t>(b)]);
          }
        }
        const Eigen::VectorXd beta = gram.completeOrthogonalDecomposition().solve(rhs);
        for (int a = 0; a <= deg; ++a) f[i][static_cast<std::size_t>(k)][static_cast<std::size_t>(a)] = beta(a);
      }
    }
    return f;
  };

  PicardReport rep;
  auto previous = simulate(field, false);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    field = regress(previous);
    have_field = true;
    auto current = simulate(field, true);
    double sup = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
      double ms = 0.0;
      for (std::size_t p = 0; p < paths; ++p) ms += hs_norm2(current[p][i] - previous[p][i]);
      sup = std::max(sup, std::sqrt(ms / static_cast<double>(paths)));
    }
    rep.differences.push_back(sup);
    rep.iterations = it;
    previous = std::move(current);
    if (sup <= opts.tolerance) {
      rep.converged = true;
      break;
    }
    const std::size_t L = rep.differences.size();
    if (L >= 3) {
      const double ratio = std::pow(rep.differences[L - 1] / rep.differences[0], 1.0 / static_cast<double>(L - 1));
      if (ratio >= 1.0) {
        std::ostringstream os;
        os << "Picard iteration does not contract (measured ratio " << ratio << "); reduce the horizon";
        throw NumericalError(os.str());
      }
    }
  }
  const std::size_t L = rep.differences.size();
  if (L >= 2 && rep.differences[0] > 0.0 && rep.differences[L - 1] > 0.0) {
    rep.decay_ratio = std::pow(rep.differences[L - 1] / rep.differences[0], 1.0 / static_cast<double>(L - 1));
  } else if (L >= 2) {
    rep.decay_ratio = 0.0;
  }
  if (rep.decay_ratio >= 1.0) {
    std::ostringstream os;
    os << "Picard iteration does not contract (measured ratio " << rep.decay_ratio << ")";
    throw NumericalError(os.str());
  }
  rep.coefficients = field;
  rep.path.grid = grid;
  rep.path.states = previous.front();
  for (std::size_t i = 0; i < nodes; ++i)
    rep.path.drifts.push_back(have_field ? -apply_field(field[i], previous.front()[i], deg) : HermitianTuple(n, m));
  rep.path.seed = rng.seed();
  rep.path.stream = rng.stream_id();
  return rep;
}

void write_path_csv(const ControlledPath& path, const std::string& file, int stride) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot open " + file, "out");
  out << "time,matrix,row,col,re,im\n";
  out << std::setprecision(17);
  stride = std::max(1, stride);
  for (std::size_t i = 0; i < path.states.size(); ++i) {
    if (i % static_cast<std::size_t>(stride) != 0 && i + 1 != path.states.size()) continue;
    const auto& x = path.states[i];
    for (int k = 0; k < x.m(); ++k)
      for (int r = 0; r < x.n(); ++r)
        for (int c = 0; c < x.n(); ++c)
          out << path.grid[i] << ',' << k << ',' << r << ',' << c << ',' << x[k](r, c).real() << ','
              << x[k](r, c).imag() << '\n';
  }
}

}  // namespace mlap
