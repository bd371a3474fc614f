#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "ardchoice/search_space.hpp"

namespace ardchoice {

/// Row-parallel reductions run on this many threads (1 = serial). Partial
/// sums are always combined blockwise in a fixed pairwise order, so results
/// are bit-stable across thread counts.
void set_num_threads(int n);
int num_threads();

std::vector<int> all_rows(int n);

/// Per-alternative coefficient vectors over the full catalog width.
struct MnlCoefficients {
    std::vector<Eigen::VectorXd> beta;

    static MnlCoefficients zeros(const DesignTensor& t);
    int total_size() const;
};

/// Column subset per alternative (ascending indices); the estimation space
/// of a specification.
struct ColumnSelection {
    std::vector<std::vector<int>> columns;

    int total() const;
    static ColumnSelection all(const CandidateCatalog& cat);
    static ColumnSelection from_groups(const CandidateCatalog& cat,
                                       const std::vector<std::vector<std::string>>& group_labels);
};

/// Systematic utilities V[row, alt]; unavailable entries are -inf.
Eigen::MatrixXd utilities(const MnlCoefficients& beta, const DesignTensor& design,
                          std::span<const int> rows);

/// Max-shifted softmax over the availability set; unavailable entries are 0.
Eigen::MatrixXd probabilities(const Eigen::MatrixXd& V);

double log_likelihood(const MnlCoefficients& beta, const DesignTensor& design,
                      std::span<const int> rows);

MnlCoefficients log_likelihood_grad(const MnlCoefficients& beta, const DesignTensor& design,
                                    std::span<const int> rows);

/// Log-likelihood and gradient in one pass (gradient restricted to the
/// selection; omitted columns contribute zero slots).
double log_likelihood_with_grad(const MnlCoefficients& beta, const DesignTensor& design,
                                std::span<const int> rows, MnlCoefficients& grad);

struct FitOptions {
    int max_iter = 2000;
    double grad_tol = 1e-6;      // max-norm of the log-likelihood gradient
    double rel_tol = 1e-10;      // relative log-likelihood change
    bool check_rank = true;
    bool allow_nonconverged = false;
};

struct FitResult {
    MnlCoefficients coefficients;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> trace;  // log-likelihood per accepted step
    std::vector<std::string> warnings;
};

/// Maximum-likelihood fit over the selected columns, quasi-Newton (BFGS)
/// ascent from beta = 0. Throws numeric_error on non-convergence unless
/// options.allow_nonconverged is set.
FitResult fit_mle(const DesignTensor& design, const ColumnSelection& selection,
                  const FitOptions& options = {}, std::span<const int> rows = {});

/// Observed-information matrix (negative log-likelihood Hessian) over the
/// selected columns, for auxiliary standard errors.
Eigen::MatrixXd observed_information(const MnlCoefficients& beta, const DesignTensor& design,
                                     const ColumnSelection& selection, std::span<const int> rows);

}  // namespace ardchoice
