#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ardchoice/mnl.hpp"
#include "ardchoice/search_space.hpp"

namespace ardchoice {

struct TrainingConfig {
    int batch_size = 500;
    int max_iter = 50000;
    double base_rate = 0.05;
    // "decay": rho_t = (base / n_obs) / (1 + t/t0) (default; base is per
    //          observation because the likelihood gradient carries the
    //          full-data scale)
    // "adagrad": rho = base / sqrt(sum g^2)
    // "adagrad_decay": windowed squared-gradient scaling with a 1/(1 + t/t0)
    //                  global decay
    std::string schedule = "decay";
    double decay_t0 = 2000.0;
    double decay_hold = 0.0;     // iterations at full rate before decay starts
    double rms_window = 1000.0;  // effective window of the squared-gradient average
    // spike guard: the c-gradient carries a 1/c term that explodes when a
    // scale rests on the positivity floor; clipping bounds the bounce
    double grad_clip = 1e4;  // 0 disables
    int mc_samples = 1;
    int convergence_window = 500;
    double convergence_tol = 1e-5;
    double smoothing_alpha = 0.01;
    double selection_tau = 1e-3;
    bool tau_relative = true;
    double c_init = 0.1;
    double c_floor = 1e-8;
    // start the intercept means at the market-share fit so the first
    // iterations do not push the shared-share misfit through every column
    bool warm_start_intercepts = true;
    uint64_t seed = 0;
    int lambda_checkpoint_every = 0;  // 0 = no checkpoints
};

TrainingConfig load_training_config(const std::string& path);
TrainingConfig parse_training_config_json(const std::string& json_text);

/// Mean-field Gaussian state over all coefficients: mean mu and positive
/// scale c per design column, plus optimizer and random-stream state.
struct VariationalState {
    std::vector<Eigen::VectorXd> mu;       // per alternative
    std::vector<Eigen::VectorXd> c;        // per alternative, >= c_floor
    std::vector<Eigen::VectorXd> acc_mu;   // accumulated squared gradients
    std::vector<Eigen::VectorXd> acc_c;
    long long t = 0;
    long long n_obs = 0;
    std::mt19937_64 rng;

    static VariationalState init(const DesignTensor& design, const TrainingConfig& config);
};

/// One tied prior variance per candidate group.
struct LambdaEstimate {
    std::vector<Eigen::VectorXd> lambda;  // per alternative, per group
};

struct ElboTrace {
    std::vector<double> sample;    // per-iteration stochastic estimate
    std::vector<double> smoothed;  // exponentially smoothed
    std::vector<std::pair<long long, LambdaEstimate>> checkpoints;
};

/// Column-to-group index built once per fit.
struct GroupIndex {
    std::vector<std::vector<int>> col_group;  // per alt: column -> group
    std::vector<std::vector<double>> kd;      // per alt: group -> K_d

    static GroupIndex build(const CandidateCatalog& catalog);
};

/// Closed-form tied variance: lambda_g = (1/K_d) sum_k (c_k^2 + mu_k^2).
LambdaEstimate lambda_optimal(const VariationalState& state, const CandidateCatalog& catalog);

/// Stochastic estimate of the optimized evidence lower bound for one z-draw
/// and one mini-batch (additive constants dropped); likelihood term scaled
/// by n_total / batch size.
double elbo_estimate(const VariationalState& state, const DesignTensor& design,
                     const GroupIndex& gi, std::span<const int> batch,
                     const std::vector<Eigen::VectorXd>& z);

/// One doubly stochastic update of (mu, c). Returns the ELBO sample at the
/// pre-update state.
double ard_step(VariationalState& state, const DesignTensor& design, const GroupIndex& gi,
                const TrainingConfig& config);

struct ArdFitResult {
    VariationalState state;
    LambdaEstimate lambda;
    ElboTrace trace;
    bool converged = false;
    long long iterations = 0;
};

/// Runs ard_step until the smoothed ELBO stalls or max_iter is reached,
/// then recovers the tied variances. Pure function of (design, catalog,
/// config): a fixed seed reproduces the fit bit for bit.
ArdFitResult fit_ard(const DesignTensor& design, const CandidateCatalog& catalog,
                     const TrainingConfig& config);

/// Market-share warm start: mu of plain intercept groups set to the
/// intercepts-only maximum likelihood fit.
void warm_start_intercepts(VariationalState& state, const DesignTensor& design,
                           const CandidateCatalog& catalog);

/// Continues a fit from a restored state (for checkpoint resume).
ArdFitResult fit_ard_continue(VariationalState state, const DesignTensor& design,
                              const CandidateCatalog& catalog, const TrainingConfig& config);

struct SelectedGroup {
    std::string label;
    double lambda = 0.0;
    int rank = 0;
    bool selected = false;
};

struct Selection {
    std::vector<std::vector<SelectedGroup>> ranked;  // per alternative, lambda descending

    std::vector<std::vector<std::string>> selected_labels() const;
};

/// Threshold rule: relative mode keeps groups with lambda > tau * max-lambda
/// within the alternative; absolute mode compares against tau directly.
Selection select_variables(const LambdaEstimate& lambda, const CandidateCatalog& catalog,
                           double tau, bool relative = true);

}  // namespace ardchoice
