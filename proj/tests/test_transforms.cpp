#include <doctest.h>

#include <random>

#include "ardchoice/errors.hpp"
#include "ardchoice/transforms.hpp"
#include "support/oracles.hpp"

using namespace ardchoice;

TEST_CASE("box-cox exponent on log-normal data is near zero") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> vals(10000);
    for (auto& v : vals) v = std::exp(nd(rng));
    const double fitted = fit_boxcox(vals);
    CHECK(std::abs(fitted) < 0.1);
    const double grid = oracle::grid_boxcox(vals);
    CHECK(std::abs(fitted - grid) < 2e-3);  // within one grid step of the oracle
}

TEST_CASE("box-cox exponent on positive gaussian data is near one") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(20.0, 2.0);
    std::vector<double> vals(10000);
    for (auto& v : vals) v = std::max(nd(rng), 1.0);
    const double fitted = fit_boxcox(vals);
    const double grid = oracle::grid_boxcox(vals);
    CHECK(std::abs(fitted - grid) < 2e-3);
    CHECK(std::abs(fitted - 1.0) < 0.35);  // flat profile: wide tolerance vs exact 1
}

TEST_CASE("box-cox rejects degenerate and non-positive input") {
    CHECK_THROWS_AS(fit_boxcox(std::vector<double>{2.0, 2.0, 2.0, 2.0}), transform_error);
    CHECK_THROWS_AS(fit_boxcox(std::vector<double>{1.0, -2.0, 3.0}), transform_error);
    CHECK_THROWS_AS(fit_boxcox(std::vector<double>{}), transform_error);
}

TEST_CASE("box-cox limit at zero equals log") {
    CHECK(boxcox_apply(5.0, 0.0) == doctest::Approx(std::log(5.0)));
    CHECK(boxcox_apply(5.0, 1e-13) == doctest::Approx(std::log(5.0)).epsilon(1e-9));
    CHECK(boxcox_apply(5.0, 1.0) == doctest::Approx(4.0));
}

TEST_CASE("k-means separates well-separated clusters") {
    std::vector<double> vals = {0, 0, 0, 10, 10, 10};
    const auto labels = kmeans_segment(vals, 2, 1);
    CHECK(labels == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("k-means with k equal to distinct count isolates each value") {
    std::vector<double> vals = {3, 1, 2, 1, 3, 2};
    const auto labels = kmeans_segment(vals, 3, 5);
    CHECK(labels == std::vector<int>{2, 0, 1, 0, 2, 1});
}

TEST_CASE("k-means rejects k beyond the distinct values") {
    std::vector<double> vals = {1, 1, 2, 2};
    CHECK_THROWS_AS(kmeans_segment(vals, 3, 1), config_error);
    CHECK_THROWS_AS(kmeans_segment(vals, 1, 1), config_error);
}

TEST_CASE("k-means wcss is near the best of many restarts") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<double> vals(1000);
    for (auto& v : vals) v = ud(rng);

    const auto labels = kmeans_segment(vals, 4, 999);
    const auto centers = kmeans_centers(vals, 4, 999);
    const double w = kmeans_wcss(vals, labels, centers);

    double best = std::numeric_limits<double>::infinity();
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const auto l = kmeans_segment(vals, 4, seed);
        const auto c = kmeans_centers(vals, 4, seed);
        best = std::min(best, kmeans_wcss(vals, l, c));
    }
    CHECK(w <= best * 1.01);
}

TEST_CASE("k-means is deterministic under a fixed seed") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> vals(500);
    for (auto& v : vals) v = nd(rng);
    CHECK(kmeans_segment(vals, 3, 77) == kmeans_segment(vals, 3, 77));
    CHECK(kmeans_centers(vals, 3, 77) == kmeans_centers(vals, 3, 77));
}
