#include "mlap/estimate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "mlap/errors.hpp"

namespace mlap {

namespace {
std::atomic<int> g_default_threads{1};
}

double combined_stderr(const ValueEstimate& a, const ValueEstimate& b) {
  return std::hypot(a.std_error, b.std_error);
}

bool within_sigma(const ValueEstimate& a, double b, double k, double floor) {
  return std::abs(a.value - b) <= k * a.std_error + floor;
}

bool within_sigma(const ValueEstimate& a, const ValueEstimate& b, double k, double floor) {
  return std::abs(a.value - b.value) <= k * combined_stderr(a, b) + floor;
}

ValueEstimate mean_estimate(std::span<const double> xs) {
  ValueEstimate e;
  e.samples = xs.size();
  e.ess = static_cast<double>(xs.size());
  if (xs.empty()) return e;
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  e.value = mean;
  e.std_error = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return e;
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

LogMeanExp log_mean_exp(std::span<const double> log_terms) {
  LogMeanExp r;
  const std::size_t n = log_terms.size();
  if (n == 0) throw NumericalError("log_mean_exp: no samples");
  const double mx = *std::max_element(log_terms.begin(), log_terms.end());
  const double mn = *std::min_element(log_terms.begin(), log_terms.end());
  if (!std::isfinite(mx))
    throw NumericalError("Monte Carlo average underflowed (max log-term " + std::to_string(mx) +
                         "); increase the sample budget or use an importance shift");
  double s1 = 0.0, s2 = 0.0;
  for (double x : log_terms) {
    const double w = std::exp(x - mx);
    s1 += w;
    s2 += w * w;
  }
  const double dn = static_cast<double>(n);
  const double mean = s1 / dn;
  r.log_mean = mx + std::log(mean);
  const double var = n > 1 ? std::max(0.0, (s2 / dn - mean * mean)) * dn / (dn - 1.0) : 0.0;
  r.stderr_log = std::sqrt(var / dn) / mean;
  r.ess = s1 * s1 / s2;
  r.spread = mx - mn;
  return r;
}

LogLogFit loglog_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("loglog_fit needs >= 2 paired points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ConfigError("loglog_fit needs positive data");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  LogLogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ly[i] - f.intercept - f.slope * lx[i];
      rss += r * r;
    }
    f.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

double effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(chain.begin(), chain.end(), 0.0) / static_cast<double>(n);
  std::vector<double> c(chain.begin(), chain.end());
  for (double& v : c) v -= mean;
  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n);
  };
  const double g0 = acov(0);
  if (g0 <= 0.0) return static_cast<double>(n);
  double tau_int = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (acov(2 * k) + acov(2 * k + 1)) / g0;
    if (pair <= 0.0) break;
    tau_int += 2.0 * pair;
  }
  tau_int = std::max(tau_int, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau_int);
}

double r_hat(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) return 1.0;
  const std::size_t n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw ConfigError("r_hat needs equal-length chains");
  if (n < 2) return 1.0;
  std::vector<double> means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = std::accumulate(chains[j].begin(), chains[j].end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : chains[j]) ss += (v - means[j]) * (v - means[j]);
    vars[j] = ss / static_cast<double>(n - 1);
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(m);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / static_cast<double>(m - 1);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / static_cast<double>(m);
  if (w <= 0.0) return 1.0;
  const double var_plus = (static_cast<double>(n - 1) / static_cast<double>(n)) * w + b / static_cast<double>(n);
  return std::sqrt(var_plus / w);
}

std::vector<double> catalan_numbers(int count) {
  std::vector<double> c(static_cast<std::size_t>(std::max(count, 0)), 0.0);
  if (count <= 0) return c;
  c[0] = 1.0;
  for (int k = 0; k + 1 < count; ++k) {
    double s = 0.0;
    for (int j = 0; j <= k; ++j) s += c[static_cast<std::size_t>(j)] * c[static_cast<std::size_t>(k - j)];
    c[static_cast<std::size_t>(k + 1)] = s;
  }
  return c;
}

int default_threads() { return g_default_threads.load(); }
void set_default_threads(int threads) { g_default_threads.store(std::max(1, threads)); }

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 0) threads = default_threads();
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = count * w / workers;
      const std::size_t hi = count * (w + 1) / workers;
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mlap
