#include "ardchoice/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "ardchoice/errors.hpp"

namespace ardchoice {

double boxcox_apply(double x, double lambda) {
    if (std::abs(lambda) < 1e-12) return std::log(x);
    return (std::pow(x, lambda) - 1.0) / lambda;
}

double boxcox_profile_loglik(std::span<const double> values, double lambda) {
    const double n = static_cast<double>(values.size());
    double sum = 0.0, sumsq = 0.0, sumlog = 0.0;
    for (double x : values) {
        const double y = boxcox_apply(x, lambda);
        sum += y;
        sumsq += y * y;
        sumlog += std::log(x);
    }
    const double mean = sum / n;
    const double var = std::max(sumsq / n - mean * mean, 1e-300);
    return -0.5 * n * std::log(var) + (lambda - 1.0) * sumlog;
}

double fit_boxcox(std::span<const double> values) {
    if (values.empty()) throw transform_error("box-cox: empty sample");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double x : values) {
        if (!(x > 0.0)) throw transform_error("box-cox: non-positive value in sample");
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi)))
        throw transform_error("box-cox: degenerate (zero-variance) sample");

    // golden-section maximization on [-2, 2]
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = -2.0, b = 2.0;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = boxcox_profile_loglik(values, c);
    double fd = boxcox_profile_loglik(values, d);
    while (b - a > 1e-7) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = boxcox_profile_loglik(values, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = boxcox_profile_loglik(values, d);
        }
    }
    return 0.5 * (a + b);
}

namespace {

std::pair<std::vector<double>, std::vector<int>> kmeans_run(std::span<const double> values, int k,
                                                            uint64_t seed) {
    if (k < 2) throw config_error("k-means: k must be at least 2");
    std::set<double> distinct(values.begin(), values.end());
    if (static_cast<size_t>(k) > distinct.size())
        throw config_error("k-means: k = " + std::to_string(k) + " exceeds " +
                           std::to_string(distinct.size()) + " distinct values");

    const size_t n = values.size();
    std::mt19937_64 rng(seed);
    std::vector<double> centers;
    centers.reserve(k);

    // k-means++ seeding
    std::uniform_int_distribution<size_t> first(0, n - 1);
    centers.push_back(values[first(rng)]);
    std::vector<double> d2(n);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : centers) best = std::min(best, (values[i] - c) * (values[i] - c));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // all points coincide with existing centers: seed from unused distinct values
            for (double v : distinct) {
                if (std::none_of(centers.begin(), centers.end(),
                                 [&](double c) { return c == v; })) {
                    centers.push_back(v);
                    break;
                }
            }
            continue;
        }
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng), acc = 0.0;
        size_t pick = n - 1;
        for (size_t i = 0; i < n; ++i) {
            acc += d2[i];
            if (acc >= r) {
                pick = i;
                break;
            }
        }
        centers.push_back(values[pick]);
    }

    std::vector<int> labels(n, 0);
    for (int iter = 0; iter < 300; ++iter) {
        bool changed = false;
        for (size_t i = 0; i < n; ++i) {
            int best = 0;
            double bestd = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double dd = (values[i] - centers[c]) * (values[i] - centers[c]);
                if (dd < bestd) {
                    bestd = dd;
                    best = c;
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }
        std::vector<double> sum(k, 0.0);
        std::vector<int> cnt(k, 0);
        for (size_t i = 0; i < n; ++i) {
            sum[labels[i]] += values[i];
            ++cnt[labels[i]];
        }
        for (int c = 0; c < k; ++c)
            if (cnt[c] > 0) centers[c] = sum[c] / cnt[c];
        if (!changed && iter > 0) break;
    }

    // relabel ascending by center
    std::vector<int> order(k);
    for (int c = 0; c < k; ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return centers[a] < centers[b]; });
    std::vector<int> rank(k);
    for (int r = 0; r < k; ++r) rank[order[r]] = r;
    std::vector<double> sorted(k);
    for (int c = 0; c < k; ++c) sorted[rank[c]] = centers[c];
    for (size_t i = 0; i < n; ++i) labels[i] = rank[labels[i]];
    return {sorted, labels};
}

}  // namespace

std::vector<int> kmeans_segment(std::span<const double> values, int k, uint64_t seed) {
    return kmeans_run(values, k, seed).second;
}

std::vector<double> kmeans_centers(std::span<const double> values, int k, uint64_t seed) {
    return kmeans_run(values, k, seed).first;
}

double kmeans_wcss(std::span<const double> values, const std::vector<int>& labels,
                   const std::vector<double>& centers) {
    double w = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - centers[labels[i]];
        w += d * d;
    }
    return w;
}

}  // namespace ardchoice
