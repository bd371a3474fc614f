#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ardchoice {

/// Box-Cox transform (x^lambda - 1)/lambda with the log limit at lambda = 0.
double boxcox_apply(double x, double lambda);

/// Exponent maximizing the Gaussian profile log-likelihood of the transformed
/// sample, searched over [-2, 2]. All values must be strictly positive.
double fit_boxcox(std::span<const double> values);

/// Profile log-likelihood of a Box-Cox exponent (exposed for diagnostics).
double boxcox_profile_loglik(std::span<const double> values, double lambda);

/// One-dimensional Lloyd's k-means with k-means++ initialization. Labels are
/// relabeled in ascending order of cluster center. Deterministic under a
/// fixed seed.
std::vector<int> kmeans_segment(std::span<const double> values, int k, uint64_t seed);

/// Cluster centers of the same run, ascending.
std::vector<double> kmeans_centers(std::span<const double> values, int k, uint64_t seed);

double kmeans_wcss(std::span<const double> values, const std::vector<int>& labels,
                   const std::vector<double>& centers);

}  // namespace ardchoice
