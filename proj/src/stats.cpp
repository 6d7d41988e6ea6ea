#include "seqdesign/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace seqdesign {

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean_of: empty");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance_of(const std::vector<double>& xs) {
    if (xs.size() < 2) throw std::invalid_argument("variance_of: need >= 2 samples");
    const double m = mean_of(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / static_cast<double>(xs.size() - 1);
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

namespace {

std::vector<double> ranks_of(const std::vector<double>& xs) {
    const size_t n = xs.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&xs](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("spearman_rho: need equal-length inputs, n >= 2");
    }
    return pearson(ranks_of(x), ranks_of(y));
}

double spearman_trend_pvalue(const std::vector<double>& x, const std::vector<double>& y,
                             bool decreasing) {
    const size_t n = x.size();
    if (n != y.size() || n < 3) throw std::invalid_argument("spearman_trend_pvalue: n >= 3");
    if (n > 8) throw std::invalid_argument("spearman_trend_pvalue: exact enumeration caps at n=8");
    const double observed = spearman_rho(x, y);

    std::vector<double> permuted = y;
    std::sort(permuted.begin(), permuted.end());
    int total = 0;
    int at_least_as_extreme = 0;
    do {
        const double rho = spearman_rho(x, permuted);
        ++total;
        if (decreasing ? rho <= observed + 1e-12 : rho >= observed - 1e-12) {
            ++at_least_as_extreme;
        }
    } while (std::next_permutation(permuted.begin(), permuted.end()));
    return static_cast<double>(at_least_as_extreme) / static_cast<double>(total);
}

double welch_one_sided_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
    const double va = variance_of(a) / static_cast<double>(a.size());
    const double vb = variance_of(b) / static_cast<double>(b.size());
    const double denom = std::sqrt(va + vb);
    if (denom == 0.0) return mean_of(a) > mean_of(b) ? 0.0 : 1.0;
    const double t = (mean_of(a) - mean_of(b)) / denom;
    return 1.0 - normal_cdf(t);
}

} // namespace seqdesign
