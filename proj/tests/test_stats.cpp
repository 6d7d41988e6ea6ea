#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "seqdesign/rng.hpp"
#include "seqdesign/stats.hpp"

using namespace seqdesign;

TEST_CASE("spearman rho on monotone data") {
    CHECK(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman_rho({1, 2, 3, 4}, {9, 7, 5, 1}) == doctest::Approx(-1.0));
    // Rank-based: invariant to monotone transforms.
    CHECK(spearman_rho({1, 2, 3, 4, 5}, {1, 8, 27, 64, 125}) == doctest::Approx(1.0));
}

TEST_CASE("exact permutation p-value for a perfect trend of 5 points") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> down{5, 4, 3, 2, 1};
    // Only one of 5! orderings is as extreme.
    CHECK(spearman_trend_pvalue(x, down, true) == doctest::Approx(1.0 / 120.0));
    CHECK(spearman_trend_pvalue(x, down, false) == doctest::Approx(1.0));
    const std::vector<double> up{1, 2, 3, 4, 5};
    CHECK(spearman_trend_pvalue(x, up, false) == doctest::Approx(1.0 / 120.0));
}

TEST_CASE("permutation p-value is uniform-ish under the null") {
    Rng rng(5);
    int small = 0;
    const int trials = 200;
    for (int i = 0; i < trials; ++i) {
        std::vector<double> x{1, 2, 3, 4, 5};
        std::vector<double> y;
        for (int j = 0; j < 5; ++j) y.push_back(rng.uniform());
        if (spearman_trend_pvalue(x, y, true) < 0.05) ++small;
    }
    // Expect about 5% false positives; allow generous slack.
    CHECK(small < trials / 5);
}

TEST_CASE("welch one-sided p-value behaves") {
    Rng rng(6);
    std::vector<double> a, b;
    for (int i = 0; i < 300; ++i) {
        a.push_back(rng.normal() + 0.5);
        b.push_back(rng.normal());
    }
    CHECK(welch_one_sided_pvalue(a, b) < 0.01);
    CHECK(welch_one_sided_pvalue(b, a) > 0.5);

    std::vector<double> null_a, null_b;
    for (int i = 0; i < 300; ++i) {
        null_a.push_back(rng.normal());
        null_b.push_back(rng.normal());
    }
    CHECK(welch_one_sided_pvalue(null_a, null_b) > 0.01);
}

TEST_CASE("normal cdf reference points") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(1.6448536269514722) == doctest::Approx(0.95).epsilon(1e-9));
    CHECK(normal_cdf(-1.6448536269514722) == doctest::Approx(0.05).epsilon(1e-9));
}
