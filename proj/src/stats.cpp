#include "markbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace markbench::stats {

namespace {
constexpr double kLn2 = 0.69314718055994530942;

double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}
}  // namespace

double binom_p(int k, int n) {
  if (n < 0) throw std::invalid_argument("binom_p: n must be >= 0");
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  // Sum C(n,i)/2^n for i = k..n with Kahan compensation; summing the smaller
  // tail keeps every term far from overflow in log space.
  double sum = 0.0, comp = 0.0;
  for (int i = n; i >= k; --i) {
    const double term = std::exp(log_choose(n, i) - n * kLn2);
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return std::min(1.0, sum);
}

double double_tail_p(int k, int n) {
  const double p = binom_p(std::max(k, n - k), n);
  return std::min(1.0, 2.0 * p);
}

namespace {
// Series expansion of P(a,x), good for x < a+1.
double gser(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 1000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x) = 1 - P(a,x), good for x >= a+1.
double gcf(double a, double x) {
  const double fpmin = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}
}  // namespace

double gammp(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gammp: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gser(a, x);
  return 1.0 - gcf(a, x);
}

double chi2_cdf(double x, double k) {
  if (x <= 0.0) return 0.0;
  return gammp(0.5 * k, 0.5 * x);
}

double noncentral_chi2_cdf(double x, double k, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("noncentral_chi2_cdf: lambda must be >= 0");
  if (x <= 0.0) return 0.0;
  if (lambda == 0.0) return chi2_cdf(x, k);

  const double hl = 0.5 * lambda;
  const double log_hl = std::log(hl);
  const long mode = std::max(0L, static_cast<long>(hl));
  const auto log_pois = [&](long j) { return -hl + j * log_hl - std::lgamma(j + 1.0); };

  // Walk outward from the Poisson mode; weights there are representable even
  // when exp(-lambda/2) underflows at j = 0.
  double cdf = 0.0;
  double mass = 0.0;
  const long guard = 1000000;
  long lo = mode, hi = mode;
  double wlo = std::exp(log_pois(mode)), whi = wlo;
  // First term.
  cdf += wlo * gammp(0.5 * k + mode, 0.5 * x);
  mass += wlo;
  long terms = 1;
  while (1.0 - mass >= 1e-12) {
    if (terms >= guard)
      throw std::runtime_error("noncentral_chi2_cdf: series did not converge within " +
                               std::to_string(guard) + " terms");
    // Extend on whichever side carries more remaining weight.
    const double next_lo = lo > 0 ? wlo * lo / hl : 0.0;        // w_{lo-1}
    const double next_hi = whi * hl / (hi + 1.0);               // w_{hi+1}
    if (next_lo >= next_hi && lo > 0) {
      --lo;
      wlo = next_lo;
      cdf += wlo * gammp(0.5 * k + lo, 0.5 * x);
      mass += wlo;
    } else {
      ++hi;
      whi = next_hi;
      cdf += whi * gammp(0.5 * k + hi, 0.5 * x);
      mass += whi;
    }
    ++terms;
    // Both tails exhausted numerically.
    if (next_lo == 0.0 && next_hi == 0.0) break;
  }
  return std::min(1.0, cdf);
}

double mad_sigma(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("mad_sigma: empty input");
  const size_t n = values.size();
  std::vector<double> work = values;
  std::nth_element(work.begin(), work.begin() + n / 2, work.end());
  double med = work[n / 2];
  if (n % 2 == 0) {
    std::nth_element(work.begin(), work.begin() + n / 2 - 1, work.end());
    med = 0.5 * (med + work[n / 2 - 1]);
  }
  for (size_t i = 0; i < n; ++i) work[i] = std::fabs(values[i] - med);
  std::nth_element(work.begin(), work.begin() + n / 2, work.end());
  double mad = work[n / 2];
  if (n % 2 == 0) {
    std::nth_element(work.begin(), work.begin() + n / 2 - 1, work.end());
    mad = 0.5 * (mad + work[n / 2 - 1]);
  }
  return 1.4826 * mad;
}

double eta_statistic(const std::vector<double>& a, const std::vector<double>& b, double sigma2) {
  if (a.size() != b.size()) throw std::invalid_argument("eta_statistic: length mismatch");
  if (sigma2 <= 0.0) throw std::invalid_argument("eta_statistic: sigma2 must be > 0");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / sigma2;
}

}  // namespace markbench::stats
