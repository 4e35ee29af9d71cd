#pragma once

#include <vector>

namespace markbench::stats {

// P(K >= k) for K ~ Binomial(n, 1/2), evaluated in log space so large n
// stays accurate.  k <= 0 gives 1, k > n gives 0.
double binom_p(int k, int n);

// Two-sided variant: min(1, 2 * binom_p(max(k, n-k), n)).  Detects messages
// recovered either directly or bit-flipped.
double double_tail_p(int k, int n);

// Regularized lower incomplete gamma P(a,x) = gamma(a,x)/Gamma(a).
double gammp(double a, double x);

// CDF of the central chi-square with k dof at x.
double chi2_cdf(double x, double k);

// CDF of the noncentral chi-square with k dof and noncentrality lambda at x,
// via the Poisson(lambda/2) mixture of central chi-squares.  Terms are taken
// outward from the Poisson mode until the remaining mass is < 1e-12
// (absolute error < 1e-9); a 1e6-term guard throws on non-convergence.
double noncentral_chi2_cdf(double x, double k, double lambda);

// Robust scale estimate: 1.4826 * median(|v - median(v)|).
double mad_sigma(std::vector<double> values);

// Normalized squared distance sum(|a_i-b_i|^2)/sigma2 over real coordinates.
double eta_statistic(const std::vector<double>& a, const std::vector<double>& b, double sigma2);

}  // namespace markbench::stats
