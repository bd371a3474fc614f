#include "ardchoice/ard.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ardchoice/errors.hpp"

namespace ardchoice {

using json = nlohmann::json;

TrainingConfig parse_training_config_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw config_error(std::string("training config: invalid JSON: ") + e.what());
    }
    TrainingConfig c;
    auto get = [&](const char* k, auto& slot) {
        if (j.contains(k)) slot = j[k].get<std::decay_t<decltype(slot)>>();
    };
    get("batch_size", c.batch_size);
    get("max_iter", c.max_iter);
    get("base_rate", c.base_rate);
    get("schedule", c.schedule);
    get("decay_t0", c.decay_t0);
    get("decay_hold", c.decay_hold);
    get("rms_window", c.rms_window);
    get("grad_clip", c.grad_clip);
    get("mc_samples", c.mc_samples);
    get("convergence_window", c.convergence_window);
    get("convergence_tol", c.convergence_tol);
    get("smoothing_alpha", c.smoothing_alpha);
    get("selection_tau", c.selection_tau);
    get("tau_relative", c.tau_relative);
    get("c_init", c.c_init);
    get("c_floor", c.c_floor);
    get("warm_start_intercepts", c.warm_start_intercepts);
    get("seed", c.seed);
    get("lambda_checkpoint_every", c.lambda_checkpoint_every);
    if (c.batch_size < 1) throw config_error("training config: batch_size must be >= 1");
    if (c.selection_tau < 0) throw config_error("training config: selection_tau must be >= 0");
    if (c.schedule != "adagrad" && c.schedule != "decay" && c.schedule != "adagrad_decay")
        throw config_error(
            "training config: schedule must be 'adagrad', 'adagrad_decay' or 'decay'");
    if (c.mc_samples < 1) throw config_error("training config: mc_samples must be >= 1");
    return c;
}

TrainingConfig load_training_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("training config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_training_config_json(ss.str());
}

VariationalState VariationalState::init(const DesignTensor& design, const TrainingConfig& config) {
    VariationalState s;
    const int I = design.n_alts();
    s.mu.resize(I);
    s.c.resize(I);
    s.acc_mu.resize(I);
    s.acc_c.resize(I);
    for (int i = 0; i < I; ++i) {
        const int D = design.columns(i);
        s.mu[i] = Eigen::VectorXd::Zero(D);
        s.c[i] = Eigen::VectorXd::Constant(D, config.c_init);
        s.acc_mu[i] = Eigen::VectorXd::Zero(D);
        s.acc_c[i] = Eigen::VectorXd::Zero(D);
    }
    s.rng.seed(config.seed);
    s.n_obs = design.n_obs;
    return s;
}

GroupIndex GroupIndex::build(const CandidateCatalog& catalog) {
    GroupIndex gi;
    const int I = catalog.n_alts();
    gi.col_group.resize(I);
    gi.kd.resize(I);
    for (int i = 0; i < I; ++i) {
        gi.col_group[i].assign(catalog.columns(i), -1);
        for (size_t g = 0; g < catalog.groups[i].size(); ++g) {
            const auto& grp = catalog.groups[i][g];
            gi.kd[i].push_back(static_cast<double>(grp.n_cols()));
            for (int c = grp.col_begin; c < grp.col_end; ++c)
                gi.col_group[i][c] = static_cast<int>(g);
        }
        for (int c = 0; c < catalog.columns(i); ++c)
            if (gi.col_group[i][c] < 0)
                throw config_error("catalog: column " + std::to_string(c) +
                                   " of alternative " + std::to_string(i) +
                                   " belongs to no group");
    }
    return gi;
}

LambdaEstimate lambda_optimal(const VariationalState& state, const CandidateCatalog& catalog) {
    LambdaEstimate est;
    const int I = catalog.n_alts();
    est.lambda.resize(I);
    for (int i = 0; i < I; ++i) {
        const auto& groups = catalog.groups[i];
        est.lambda[i].setZero(groups.size());
        for (size_t g = 0; g < groups.size(); ++g) {
            double s = 0.0;
            for (int c = groups[g].col_begin; c < groups[g].col_end; ++c)
                s += state.c[i][c] * state.c[i][c] + state.mu[i][c] * state.mu[i][c];
            est.lambda[i][g] = s / groups[g].n_cols();
        }
    }
    return est;
}

namespace {

/// Per-alternative group sums S_g = sum_k (c_k^2 + mu_k^2).
std::vector<Eigen::VectorXd> group_sums(const VariationalState& state, const GroupIndex& gi) {
    std::vector<Eigen::VectorXd> sums(gi.kd.size());
    for (size_t i = 0; i < gi.kd.size(); ++i) {
        sums[i].setZero(gi.kd[i].size());
        for (int c = 0; c < state.mu[i].size(); ++c)
            sums[i][gi.col_group[i][c]] +=
                state.c[i][c] * state.c[i][c] + state.mu[i][c] * state.mu[i][c];
    }
    return sums;
}

double penalty_terms(const VariationalState& state, const GroupIndex& gi) {
    double p = 0.0;
    const auto sums = group_sums(state, gi);
    for (size_t i = 0; i < gi.kd.size(); ++i) {
        p += state.c[i].array().log().sum();
        for (size_t g = 0; g < gi.kd[i].size(); ++g)
            p -= 0.5 * gi.kd[i][g] * std::log(std::max(sums[i][g], 1e-300));
    }
    return p;
}

}  // namespace

double elbo_estimate(const VariationalState& state, const DesignTensor& design,
                     const GroupIndex& gi, std::span<const int> batch,
                     const std::vector<Eigen::VectorXd>& z) {
    if (batch.empty()) throw config_error("elbo_estimate: empty batch");
    MnlCoefficients beta;
    beta.beta.resize(design.n_alts());
    for (int i = 0; i < design.n_alts(); ++i)
        beta.beta[i] = state.c[i].cwiseProduct(z[i]) + state.mu[i];
    const double scale = static_cast<double>(design.n_obs) / static_cast<double>(batch.size());
    return scale * log_likelihood(beta, design, batch) + penalty_terms(state, gi);
}

double ard_step(VariationalState& state, const DesignTensor& design, const GroupIndex& gi,
                const TrainingConfig& config) {
    const int I = design.n_alts();
    const int n = design.n_obs;
    const int B = std::min(config.batch_size, n);
    std::normal_distribution<double> normal(0.0, 1.0);

    // mini-batch: uniform without replacement (Floyd's algorithm), so the
    // sampler carries no state beyond the random stream itself
    std::vector<int> batch_rows;
    if (B == n) {
        batch_rows.resize(n);
        std::iota(batch_rows.begin(), batch_rows.end(), 0);
    } else {
        batch_rows.reserve(B);
        std::vector<uint8_t> taken(n, 0);
        std::uniform_int_distribution<int> unif;
        for (int j = n - B; j < n; ++j) {
            const int r = unif(state.rng, std::uniform_int_distribution<int>::param_type(0, j));
            if (taken[r]) {
                batch_rows.push_back(j);
                taken[j] = 1;
            } else {
                batch_rows.push_back(r);
                taken[r] = 1;
            }
        }
    }
    std::span<const int> batch(batch_rows.data(), static_cast<size_t>(B));
    const double scale = static_cast<double>(n) / static_cast<double>(B);

    const auto sums = group_sums(state, gi);

    std::vector<Eigen::VectorXd> gmu(I), gc(I);
    for (int i = 0; i < I; ++i) {
        gmu[i].setZero(design.columns(i));
        gc[i].setZero(design.columns(i));
    }

    MnlCoefficients beta = MnlCoefficients::zeros(design);
    MnlCoefficients grad = MnlCoefficients::zeros(design);
    std::vector<Eigen::VectorXd> z(I);
    double ll_sample = 0.0;

    for (int s = 0; s < config.mc_samples; ++s) {
        for (int i = 0; i < I; ++i) {
            z[i].resize(design.columns(i));
            for (int c = 0; c < z[i].size(); ++c) z[i][c] = normal(state.rng);
            beta.beta[i] = state.c[i].cwiseProduct(z[i]) + state.mu[i];
        }
        ll_sample += log_likelihood_with_grad(beta, design, batch, grad);
        for (int i = 0; i < I; ++i) {
            gmu[i] += scale * grad.beta[i];
            gc[i] += scale * grad.beta[i].cwiseProduct(z[i]);
        }
    }
    const double inv_s = 1.0 / config.mc_samples;
    ll_sample *= inv_s;

    // ELBO sample at the pre-update state
    double elbo = scale * ll_sample;
    for (int i = 0; i < I; ++i) {
        elbo += state.c[i].array().log().sum();
        for (size_t g = 0; g < gi.kd[i].size(); ++g)
            elbo -= 0.5 * gi.kd[i][g] * std::log(std::max(sums[i][g], 1e-300));
    }

    state.t += 1;
    const double past_hold = std::max(0.0, static_cast<double>(state.t) - config.decay_hold);
    const double global_decay = 1.0 + past_hold / config.decay_t0;
    const double ema = 1.0 - 1.0 / config.rms_window;

    for (int i = 0; i < I; ++i) {
        for (int c = 0; c < design.columns(i); ++c) {
            const int g = gi.col_group[i][c];
            const double denom = std::max(sums[i][g], 1e-300);
            const double kd = gi.kd[i][g];
            double dmu = gmu[i][c] * inv_s - kd * state.mu[i][c] / denom;
            double dc = gc[i][c] * inv_s + 1.0 / state.c[i][c] - kd * state.c[i][c] / denom;
            if (!std::isfinite(dmu) || !std::isfinite(dc))
                throw numeric_error("ard: non-finite gradient at iteration " +
                                    std::to_string(state.t) + ", column '" +
                                    std::to_string(c) + "' of alternative " + std::to_string(i));
            if (config.grad_clip > 0.0) {
                dmu = std::clamp(dmu, -config.grad_clip, config.grad_clip);
                dc = std::clamp(dc, -config.grad_clip, config.grad_clip);
            }
            double rho_mu, rho_c;
            if (config.schedule == "adagrad") {
                state.acc_mu[i][c] += dmu * dmu;
                state.acc_c[i][c] += dc * dc;
                rho_mu = config.base_rate / (std::sqrt(state.acc_mu[i][c]) + 1e-8);
                rho_c = config.base_rate / (std::sqrt(state.acc_c[i][c]) + 1e-8);
            } else if (config.schedule == "adagrad_decay") {
                state.acc_mu[i][c] = ema * state.acc_mu[i][c] + (1.0 - ema) * dmu * dmu;
                state.acc_c[i][c] = ema * state.acc_c[i][c] + (1.0 - ema) * dc * dc;
                // bias-corrected squared-gradient average
                const double corr = 1.0 - std::pow(ema, static_cast<double>(state.t));
                rho_mu = config.base_rate /
                         ((std::sqrt(state.acc_mu[i][c] / corr) + 1e-8) * global_decay);
                rho_c = config.base_rate /
                        ((std::sqrt(state.acc_c[i][c] / corr) + 1e-8) * global_decay);
            } else {
                // base_rate is per observation: the likelihood gradient is on
                // the full-data scale, so rho_0 = base / N stabilizes the
                // recursion independent of the dataset size
                rho_mu = rho_c = config.base_rate / (static_cast<double>(n) * global_decay);
            }
            state.mu[i][c] += rho_mu * dmu;
            state.c[i][c] = std::max(state.c[i][c] + rho_c * dc, config.c_floor);
        }
    }
    return elbo;
}

namespace {

ArdFitResult run_fit(VariationalState state, const DesignTensor& design,
                     const CandidateCatalog& catalog, const TrainingConfig& config) {
    const GroupIndex gi = GroupIndex::build(catalog);
    ArdFitResult res;
    ElboTrace& trace = res.trace;

    const int window = std::max(1, config.convergence_window);
    std::vector<double> ring(window + 1, 0.0);
    double smoothed = 0.0;
    bool have_smoothed = false;
    bool converged = false;
    long long done = 0;
    long long stall = 0;  // consecutive iterations below the tolerance

    while (done < config.max_iter) {
        const double sample = ard_step(state, design, gi, config);
        ++done;
        if (!have_smoothed) {
            smoothed = sample;
            have_smoothed = true;
        } else {
            smoothed = (1.0 - config.smoothing_alpha) * smoothed + config.smoothing_alpha * sample;
        }
        trace.sample.push_back(sample);
        trace.smoothed.push_back(smoothed);
        ring[done % (window + 1)] = smoothed;

        if (config.lambda_checkpoint_every > 0 && done % config.lambda_checkpoint_every == 0)
            trace.checkpoints.emplace_back(state.t, lambda_optimal(state, catalog));

        // stop only when the windowed relative change stays below tolerance
        // for a full window (a single crossing is indistinguishable from
        // minibatch noise)
        if (done > window && config.convergence_tol > 0.0) {
            const double prev = ring[(done - window) % (window + 1)];
            const double rel = std::abs(smoothed - prev) / std::max(1.0, std::abs(prev));
            stall = rel < config.convergence_tol ? stall + 1 : 0;
            if (stall >= window) {
                converged = true;
                break;
            }
        }
    }

    res.lambda = lambda_optimal(state, catalog);
    res.state = std::move(state);
    res.converged = converged;
    res.iterations = done;
    return res;
}

}  // namespace

void warm_start_intercepts(VariationalState& state, const DesignTensor& design,
                           const CandidateCatalog& catalog) {
    ColumnSelection sel;
    sel.columns.resize(catalog.n_alts());
    for (int i = 0; i < catalog.n_alts(); ++i)
        for (const auto& g : catalog.groups[i])
            if (g.transform == Transform::intercept && g.interaction.empty())
                sel.columns[i].push_back(g.col_begin);
    if (sel.total() == 0) return;
    FitOptions opt;
    opt.check_rank = false;
    opt.allow_nonconverged = true;
    const FitResult fit = fit_mle(design, sel, opt);
    for (int i = 0; i < catalog.n_alts(); ++i)
        for (int c : sel.columns[i]) state.mu[i][c] = fit.coefficients.beta[i][c];
}

ArdFitResult fit_ard(const DesignTensor& design, const CandidateCatalog& catalog,
                     const TrainingConfig& config) {
    VariationalState state = VariationalState::init(design, config);
    if (config.warm_start_intercepts) warm_start_intercepts(state, design, catalog);
    return run_fit(std::move(state), design, catalog, config);
}

ArdFitResult fit_ard_continue(VariationalState state, const DesignTensor& design,
                              const CandidateCatalog& catalog, const TrainingConfig& config) {
    if (state.n_obs != design.n_obs)
        throw config_error("resume: state was trained on a different number of observations");
    return run_fit(std::move(state), design, catalog, config);
}

std::vector<std::vector<std::string>> Selection::selected_labels() const {
    std::vector<std::vector<std::string>> out(ranked.size());
    for (size_t i = 0; i < ranked.size(); ++i)
        for (const auto& g : ranked[i])
            if (g.selected) out[i].push_back(g.label);
    return out;
}

Selection select_variables(const LambdaEstimate& lambda, const CandidateCatalog& catalog,
                           double tau, bool relative) {
    if (tau < 0) throw config_error("select_variables: tau must be >= 0");
    Selection sel;
    const int I = catalog.n_alts();
    sel.ranked.resize(I);
    for (int i = 0; i < I; ++i) {
        const auto& lam = lambda.lambda[i];
        const double lmax = lam.size() ? lam.maxCoeff() : 0.0;
        const double cut = relative ? tau * lmax : tau;
        std::vector<int> order(lam.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return lam[a] > lam[b]; });
        for (size_t r = 0; r < order.size(); ++r) {
            SelectedGroup g;
            g.label = catalog.groups[i][order[r]].label;
            g.lambda = lam[order[r]];
            g.rank = static_cast<int>(r) + 1;
            g.selected = lam[order[r]] > cut;
            sel.ranked[i].push_back(std::move(g));
        }
    }
    return sel;
}

}  // namespace ardchoice
