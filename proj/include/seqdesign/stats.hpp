#pragma once

#include <vector>

namespace seqdesign {

double mean_of(const std::vector<double>& xs);
double variance_of(const std::vector<double>& xs);  // unbiased

double normal_cdf(double z);

// Spearman rank correlation with average ranks for ties.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// Exact one-sided permutation p-value for a monotone trend of y in x
// (n <= 8, enumerates all n! orderings). decreasing = true tests for a
// negative trend: p = P(rho_perm <= rho_observed).
double spearman_trend_pvalue(const std::vector<double>& x, const std::vector<double>& y,
                             bool decreasing);

// One-sided Welch test p-value for H1: mean(a) > mean(b); normal
// approximation, intended for sample sizes in the hundreds.
double welch_one_sided_pvalue(const std::vector<double>& a, const std::vector<double>& b);

} // namespace seqdesign
