#include "mlap/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mlap/errors.hpp"

namespace mlap {

namespace {

double quadratic_part(std::span<const HermitianTuple> slots) {
  double s = 0.0;
  for (const auto& x : slots) s += hs_norm2(x);
  return s;
}

/// d (||g||_p) / d g_i, with ||g||_p.
struct NormWeights {
  double norm = 0.0;
  std::vector<double> weights;
};

NormWeights norm_weights(const std::vector<double>& g, double p) {
  NormWeights r;
  r.weights.assign(g.size(), 0.0);
  double mx = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::abs(g[i]) > mx) {
      mx = std::abs(g[i]);
      arg = i;
    }
  }
  if (mx == 0.0) {
    if (g.size() == 1) r.weights[0] = 1.0;
    return r;
  }
  if (std::isinf(p)) {
    r.norm = mx;
    r.weights[arg] = g[arg] > 0.0 ? 1.0 : -1.0;
    return r;
  }
  double s = 0.0;
  for (double v : g) s += std::pow(std::abs(v) / mx, p);
  r.norm = mx * std::pow(s, 1.0 / p);
  const double denom = std::pow(s, (p - 1.0) / p);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double ri = std::abs(g[i]) / mx;
    const double w = std::pow(ri, p - 1.0) / denom;
    r.weights[i] = g[i] >= 0.0 ? w : -w;
  }
  return r;
}

double component_value(const PotentialComponent& c, double quad, WordEvaluator& ev) {
  double v = c.offset + c.quad * quad;
  if (c.lambda != Complex{0.0, 0.0} && !c.word.is_zero()) v += std::real(c.lambda * tau(ev.eval(c.word)));
  return v;
}

/// Accumulates into `m[slot][index]` the matrix M with
/// d tau(word)(x + eps H) = tau(H M) for self-adjoint directions H.
void accumulate_word_derivative(const NCPolynomial& poly, Complex scale, WordEvaluator& ev,
                                std::vector<std::vector<Matrix>>& m) {
  const int n = ev.n();
  for (const Term& term : poly.terms()) {
    const Word& w = term.word;
    const std::size_t len = w.size();
    if (len == 0) continue;
    std::vector<Matrix> prefix(len + 1), suffix(len + 1);
    prefix[0] = Matrix::Identity(n, n);
    for (std::size_t q = 0; q < len; ++q) prefix[q + 1] = prefix[q] * ev.letter(w[q]);
    suffix[len] = Matrix::Identity(n, n);
    for (std::size_t q = len; q-- > 0;) suffix[q] = ev.letter(w[q]) * suffix[q + 1];
    const Complex c = scale * term.coeff;
    for (std::size_t q = 0; q < len; ++q) {
      const Letter& l = w[q];
      if (l.kind == LetterKind::Extern) continue;
      Matrix ba = suffix[q + 1] * prefix[q];
      Matrix& target = m[static_cast<std::size_t>(l.slot)][static_cast<std::size_t>(l.index)];
      if (l.kind == LetterKind::SelfAdjoint) {
        target += c * ba;
      } else {
        const Matrix& r = ev.resolvent(l.index, l.slot, l.power);
        const Complex f = l.power > 0 ? Complex{0.0, -8.0} : Complex{0.0, 8.0};
        target += (c * f) * (r * ba * r);
      }
    }
  }
}

void check_slots(const PotentialSpec& spec, std::span<const HermitianTuple> slots) {
  if (static_cast<int>(slots.size()) != spec.slots())
    throw ConfigError("potential expects " + std::to_string(spec.slots()) + " time slots, got " +
                          std::to_string(slots.size()),
                      "times");
  for (std::size_t i = 1; i < slots.size(); ++i)
    if (slots[i].n() != slots[0].n() || slots[i].m() != slots[0].m())
      throw ConfigError("slot tuples differ in shape", "times");
}

std::string format_p(double p) {
  std::ostringstream os;
  os << p;
  return os.str();
}

}  // namespace

bool PotentialSpec::convex_mode() const {
  return std::all_of(components.begin(), components.end(),
                     [](const PotentialComponent& c) { return c.quad > 0.0; });
}

void PotentialSpec::validate() const {
  if (times.empty()) throw ConfigError("at least one time slot is required", "times");
  double prev = 0.0;
  for (double t : times) {
    if (!(t > prev) || t > 1.0)
      throw ConfigError("times must be strictly increasing in (0, 1]", "times");
    prev = t;
  }
  if (std::isnan(p) || p < 2.0)
    throw ConfigError("p must lie in [2, inf], got " + format_p(p), "p");
  if (!std::isfinite(offset)) throw ConfigError("D must be finite", "D");
  if (components.empty()) throw ConfigError("at least one component is required", "components");
  for (const auto& c : components) {
    if (!std::isfinite(c.offset) || !std::isfinite(c.quad))
      throw ConfigError("component coefficients must be finite", "components");
    if (!std::isfinite(c.lambda.real()) || !std::isfinite(c.lambda.imag()))
      throw ConfigError("component lambda must be finite", "components");
    if (c.word.max_slot() >= slots())
      throw ConfigError("word references slot " + std::to_string(c.word.max_slot() + 1) +
                            " beyond the " + std::to_string(slots()) + " configured times",
                        "components");
  }
}

PotentialSpec quadratic_spec(double c, double t) {
  PotentialSpec s;
  s.times = {t};
  s.p = 2.0;
  s.offset = 0.0;
  PotentialComponent comp;
  comp.offset = 0.0;
  comp.quad = c;
  s.components.push_back(comp);
  return s;
}

PotentialSpec word_spec(double quad, Complex lambda, const std::string& word, double offset,
                        std::vector<double> times) {
  PotentialSpec s;
  s.times = std::move(times);
  s.p = 2.0;
  PotentialComponent comp;
  comp.offset = offset;
  comp.quad = quad;
  comp.lambda = lambda;
  comp.word = parse_polynomial(word);
  s.components.push_back(std::move(comp));
  return s;
}

std::vector<double> component_values(const PotentialSpec& spec, std::span<const HermitianTuple> slots,
                                     const UnitaryTuple& u) {
  check_slots(spec, slots);
  WordEvaluator ev(slots, u);
  const double quad = quadratic_part(slots);
  std::vector<double> g;
  g.reserve(spec.components.size());
  for (const auto& c : spec.components) g.push_back(component_value(c, quad, ev));
  return g;
}

double eval_potential(const PotentialSpec& spec, std::span<const HermitianTuple> slots,
                      const UnitaryTuple& u) {
  const auto g = component_values(spec, slots, u);
  return spec.offset + norm_weights(g, spec.p).norm;
}

PotentialEvaluation evaluate_potential(const PotentialSpec& spec, std::span<const HermitianTuple> slots,
                                       const UnitaryTuple& u, GradientScale scale) {
  check_slots(spec, slots);
  WordEvaluator ev(slots, u);
  const double quad = quadratic_part(slots);
  std::vector<double> g;
  g.reserve(spec.components.size());
  for (const auto& c : spec.components) g.push_back(component_value(c, quad, ev));
  const NormWeights nw = norm_weights(g, spec.p);

  PotentialEvaluation out;
  out.value = spec.offset + nw.norm;
  const int n = slots.empty() ? 0 : slots[0].n();
  const int m = slots.empty() ? 0 : slots[0].m();
  std::vector<std::vector<Matrix>> acc(slots.size(), std::vector<Matrix>(static_cast<std::size_t>(m),
                                                                         Matrix::Zero(n, n)));
  double quad_weight = 0.0;
  for (std::size_t i = 0; i < spec.components.size(); ++i) {
    const double w = nw.weights[i];
    if (w == 0.0) continue;
    const auto& c = spec.components[i];
    quad_weight += w * c.quad;
    if (c.lambda != Complex{0.0, 0.0} && !c.word.is_zero())
      accumulate_word_derivative(c.word, w * c.lambda, ev, acc);
  }
  out.gradient.reserve(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    HermitianTuple gtuple(n, m);
    for (int k = 0; k < m; ++k) {
      const Matrix& a = acc[s][static_cast<std::size_t>(k)];
      gtuple[k] = 0.5 * (a + a.adjoint()) + (2.0 * quad_weight) * slots[s][k];
    }
    if (scale == GradientScale::PerCoordinate) gtuple *= std::sqrt(static_cast<double>(n));
    out.gradient.push_back(std::move(gtuple));
  }
  return out;
}

std::vector<HermitianTuple> gradient_potential(const PotentialSpec& spec,
                                               std::span<const HermitianTuple> slots,
                                               const UnitaryTuple& u, GradientScale scale) {
  return evaluate_potential(spec, slots, u, scale).gradient;
}

double eval_bridge_potential(std::span<const double> times, std::span<const HermitianTuple> slots) {
  if (times.size() != slots.size()) throw ConfigError("times and slots differ in length", "times");
  double s = 0.0;
  double prev_t = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double dt = times[i] - prev_t;
    if (!(dt > 0.0)) throw ConfigError("times must be strictly increasing and positive", "times");
    s += (i == 0 ? hs_norm2(slots[0]) : hs_norm2(slots[i] - slots[i - 1])) / dt;
    prev_t = times[i];
  }
  return 0.5 * s;
}

std::vector<HermitianTuple> bridge_gradient(std::span<const double> times,
                                            std::span<const HermitianTuple> slots) {
  if (times.size() != slots.size()) throw ConfigError("times and slots differ in length", "times");
  const std::size_t k = slots.size();
  std::vector<HermitianTuple> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double dt = times[i] - (i == 0 ? 0.0 : times[i - 1]);
    HermitianTuple g = i == 0 ? slots[0] : slots[i] - slots[i - 1];
    g *= 1.0 / dt;
    if (i + 1 < k) g.axpy(-1.0 / (times[i + 1] - times[i]), slots[i + 1] - slots[i]);
    out.push_back(std::move(g));
  }
  return out;
}

double surrogate_curvature(const PotentialSpec& spec, std::span<const HermitianTuple> slots,
                           const UnitaryTuple& u) {
  const auto g = component_values(spec, slots, u);
  const NormWeights nw = norm_weights(g, spec.p);
  double a = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) a += nw.weights[i] * spec.components[i].quad;
  return a;
}

// ---- JSON ---------------------------------------------------------------

namespace {

double json_number(const nlohmann::json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError("expected a number", field);
  return v.get<double>();
}

}  // namespace

PotentialSpec spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("potential must be a JSON object", "potential");
  PotentialSpec s;
  if (!doc.contains("times")) throw ConfigError("missing field", "times");
  if (!doc["times"].is_array()) throw ConfigError("expected an array", "times");
  for (const auto& t : doc["times"]) s.times.push_back(json_number(t, "times"));

  if (doc.contains("p")) {
    const auto& p = doc["p"];
    if (p.is_string()) {
      const auto text = p.get<std::string>();
      if (text != "inf" && text != "infinity") throw ConfigError("p must be a number or \"inf\"", "p");
      s.p = std::numeric_limits<double>::infinity();
    } else {
      s.p = json_number(p, "p");
    }
  }
  if (doc.contains("D")) s.offset = json_number(doc["D"], "D");

  if (!doc.contains("components")) throw ConfigError("missing field", "components");
  if (!doc["components"].is_array()) throw ConfigError("expected an array", "components");
  for (const auto& c : doc["components"]) {
    if (!c.is_object()) throw ConfigError("component must be an object", "components");
    PotentialComponent comp;
    comp.offset = c.contains("D") ? json_number(c["D"], "components.D") : 0.0;
    comp.quad = c.contains("C") ? json_number(c["C"], "components.C") : 0.0;
    const double re = c.contains("lambda_re") ? json_number(c["lambda_re"], "components.lambda_re") : 0.0;
    const double im = c.contains("lambda_im") ? json_number(c["lambda_im"], "components.lambda_im") : 0.0;
    comp.lambda = Complex{re, im};
    if (c.contains("word")) {
      if (!c["word"].is_string()) throw ConfigError("expected a string", "components.word");
      try {
        comp.word = parse_polynomial(c["word"].get<std::string>());
      } catch (const ConfigError& e) {
        throw ConfigError(e.message(), "components.word");
      }
    }
    s.components.push_back(std::move(comp));
  }
  s.validate();
  return s;
}

nlohmann::json spec_to_json(const PotentialSpec& spec) {
  nlohmann::json doc;
  doc["times"] = spec.times;
  if (std::isinf(spec.p))
    doc["p"] = "inf";
  else
    doc["p"] = spec.p;
  doc["D"] = spec.offset;
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : spec.components) {
    nlohmann::json j;
    j["D"] = c.offset;
    j["C"] = c.quad;
    j["lambda_re"] = c.lambda.real();
    j["lambda_im"] = c.lambda.imag();
    j["word"] = to_string(c.word);
    comps.push_back(std::move(j));
  }
  doc["components"] = std::move(comps);
  return doc;
}

// ---- diagnostics --------------------------------------------------------

std::vector<HermitianTuple> sample_brownian_slots(std::span<const double> times, int n, int m,
                                                  RngStream& rng) {
  std::vector<HermitianTuple> out;
  out.reserve(times.size());
  HermitianTuple x(n, m);
  double prev = 0.0;
  for (double t : times) {
    x += sample_normalized_increment(n, m, t - prev, rng);
    out.push_back(x);
    prev = t;
  }
  return out;
}

LowerBoundReport enforce_lower_bound(PotentialSpec& spec, int n, int m, int pilot, RngStream& rng,
                                     const UnitaryTuple& u) {
  spec.validate();
  LowerBoundReport r;
  const std::size_t nc = spec.components.size();
  std::vector<double> mins(nc, std::numeric_limits<double>::infinity());
  // The origin is included: quadratic parts are smallest there.
  {
    std::vector<HermitianTuple> zero(static_cast<std::size_t>(spec.slots()), HermitianTuple(n, m));
    const auto g = component_values(spec, zero, u);
    for (std::size_t i = 0; i < nc; ++i) mins[i] = std::min(mins[i], g[i]);
  }
  for (int s = 0; s < pilot; ++s) {
    const auto slots = sample_brownian_slots(spec.times, n, m, rng);
    const auto g = component_values(spec, slots, u);
    for (std::size_t i = 0; i < nc; ++i) mins[i] = std::min(mins[i], g[i]);
  }
  r.min_component = *std::min_element(mins.begin(), mins.end());
  r.shifts.assign(nc, 0.0);
  for (std::size_t i = 0; i < nc; ++i) {
    if (mins[i] < 1.0) {
      r.shifts[i] = 1.0 - mins[i];
      spec.components[i].offset += r.shifts[i];
      r.shifted = true;
    }
  }
  if (r.shifted) {
    std::ostringstream os;
    os << "component offsets raised so that g_i >= 1 on the pilot sample (min observed "
       << r.min_component << ")";
    if (nc == 1 && mins[0] >= 0.0) {
      spec.offset -= r.shifts[0];
      os << "; global offset compensates";
    }
    r.warning = os.str();
  }
  return r;
}

RegularityReport regularity_constants(const PotentialSpec& spec, int n, int m, int samples,
                                      RngStream& rng, const UnitaryTuple& u) {
  RegularityReport r;
  const std::size_t k = static_cast<std::size_t>(spec.slots());
  auto random_point = [&](double scale) {
    std::vector<HermitianTuple> x;
    x.reserve(k);
    for (std::size_t i = 0; i < k; ++i) x.push_back(sample_normalized_increment(n, m, scale, rng));
    return x;
  };
  auto norm = [](const std::vector<HermitianTuple>& x) {
    double s = 0.0;
    for (const auto& t : x) s += hs_norm2(t);
    return std::sqrt(s);
  };
  for (int s = 0; s < samples; ++s) {
    const double scale = std::exp(4.0 * rng.uniform() - 2.0);
    auto x = random_point(scale);
    auto y = random_point(scale * std::exp(2.0 * rng.uniform() - 1.0));
    const double gx = eval_potential(spec, x, u);
    const double gy = eval_potential(spec, y, u);
    const double nx = norm(x), ny = norm(y);
    r.subquadratic = std::max(r.subquadratic, std::abs(gx) / (1.0 + nx * nx));

    std::vector<HermitianTuple> diff(k), plus(k), minus(k);
    for (std::size_t i = 0; i < k; ++i) {
      diff[i] = x[i] - y[i];
      plus[i] = x[i] + y[i];
      minus[i] = x[i] - y[i];
    }
    const double nd = norm(diff);
    if (nd > 0.0) r.lipschitz = std::max(r.lipschitz, std::abs(gx - gy) / (nd * (1.0 + nx + ny)));
    if (ny > 0.0) {
      const double sd = eval_potential(spec, plus, u) + eval_potential(spec, minus, u) - 2.0 * gx;
      r.second_difference = std::max(r.second_difference, std::abs(sd) / (ny * ny));
    }
  }
  return r;
}

double convexity_probe(const PotentialSpec& spec, int n, int m, int trials, RngStream& rng,
                       const UnitaryTuple& u) {
  const std::size_t k = static_cast<std::size_t>(spec.slots());
  double worst = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < trials; ++s) {
    std::vector<HermitianTuple> x, y, z;
    for (std::size_t i = 0; i < k; ++i) {
      x.push_back(sample_normalized_increment(n, m, 1.0, rng));
      y.push_back(sample_normalized_increment(n, m, 1.0, rng));
    }
    const double theta = rng.uniform();
    for (std::size_t i = 0; i < k; ++i) z.push_back(theta * x[i] + (1.0 - theta) * y[i]);
    const double gap = eval_potential(spec, z, u) - theta * eval_potential(spec, x, u) -
                       (1.0 - theta) * eval_potential(spec, y, u);
    worst = std::max(worst, gap);
  }
  return worst;
}

}  // namespace mlap
