#include <doctest.h>

#include <cmath>
#include <random>

#include "ardchoice/ard.hpp"
#include "ardchoice/errors.hpp"
#include "support/oracles.hpp"

using namespace ardchoice;

namespace {

/// Minimal catalog describing group structure directly (no data behind it).
CandidateCatalog manual_catalog(const std::vector<std::vector<int>>& group_sizes) {
    CandidateCatalog cat;
    for (size_t i = 0; i < group_sizes.size(); ++i) {
        cat.alternatives.push_back("alt" + std::to_string(i));
        std::vector<CandidateGroup> gs;
        int col = 0;
        for (size_t g = 0; g < group_sizes[i].size(); ++g) {
            CandidateGroup cg;
            cg.label = "g" + std::to_string(g);
            cg.transform = Transform::identity;
            cg.col_begin = col;
            cg.col_end = col + group_sizes[i][g];
            for (int k = 0; k < group_sizes[i][g]; ++k)
                cg.column_labels.push_back(cg.label + "_" + std::to_string(k));
            col = cg.col_end;
            gs.push_back(std::move(cg));
        }
        cat.groups.push_back(std::move(gs));
        cat.scaling.emplace_back(col);
    }
    return cat;
}

DesignTensor tensor_for(const CandidateCatalog& cat, int n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    DesignTensor t;
    t.alternatives = cat.alternatives;
    t.n_obs = n;
    t.values.resize(cat.n_alts());
    for (int i = 0; i < cat.n_alts(); ++i) {
        t.values[i].resize(n, cat.columns(i));
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < cat.columns(i); ++c) t.values[i](r, c) = nd(rng);
    }
    t.availability.assign(static_cast<size_t>(n) * cat.n_alts(), 1);
    t.choice.resize(n);
    for (int r = 0; r < n; ++r)
        t.choice[r] = static_cast<int>(ud(rng) * cat.n_alts()) % cat.n_alts();
    return t;
}

}  // namespace

TEST_CASE("lambda_optimal: zero, arithmetic, and tying symmetry") {
    auto cat = manual_catalog({{1, 4}});
    auto t = tensor_for(cat, 10, 1);
    TrainingConfig cfg;
    auto state = VariationalState::init(t, cfg);

    // mu = 0, c at the floor: lambda ~ 0
    for (auto& c : state.c) c.setConstant(cfg.c_floor);
    auto lam = lambda_optimal(state, cat);
    CHECK(lam.lambda[0][0] == doctest::Approx(0.0).epsilon(1e-12));

    // group of 4 columns with mu = 1, c = 0.5: lambda = 1.25
    state.c[0].setConstant(0.5);
    state.mu[0].setConstant(1.0);
    lam = lambda_optimal(state, cat);
    CHECK(lam.lambda[0][1] == doctest::Approx(1.25));

    // permuting a group's columns leaves lambda unchanged
    std::swap(state.mu[0][1], state.mu[0][3]);
    std::swap(state.c[0][1], state.c[0][3]);
    auto lam2 = lambda_optimal(state, cat);
    CHECK(lam2.lambda[0][1] == lam.lambda[0][1]);
}

TEST_CASE("closed-form lambda maximizes the unoptimized bound (golden-section oracle)") {
    // bound terms in lambda for one group: -Kd/2 log(lambda) - S/(2 lambda)
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ud(0.1, 3.0);
    std::uniform_int_distribution<int> kd_dist(1, 8);
    for (int rep = 0; rep < 100; ++rep) {
        const int kd = kd_dist(rng);
        double S = 0.0;
        for (int k = 0; k < kd; ++k) {
            const double mu = ud(rng) - 1.5, c = ud(rng);
            S += c * c + mu * mu;
        }
        const double closed = S / kd;
        auto bound = [&](__float128 lam) {
            return -0.5Q * static_cast<__float128>(kd) * logq(lam) -
                   0.5Q * static_cast<__float128>(S) / lam;
        };
        const double numeric = oracle::golden_max_quad(bound, 1e-6Q, 50.0Q);
        CHECK(std::abs(closed - numeric) < 1e-8);
    }
}

TEST_CASE("step gradient formulas: worked example") {
    // K_d = 1, mu = 3, c = 1, g = 0, z with g.z = 0:
    // grad_mu = -3/10, grad_c = 0 + 1 - 1/10 = 0.9
    const double mu = 3.0, c = 1.0;
    const double S = c * c + mu * mu;
    const double dmu = 0.0 - 1.0 * mu / S;
    const double dc = 0.0 + 1.0 / c - 1.0 * c / S;
    CHECK(dmu == doctest::Approx(-0.3));
    CHECK(dc == doctest::Approx(0.9));
}

TEST_CASE("penalty part of the step gradients matches finite differences of the bound") {
    // deterministic terms of the optimized ELBO: sum log c - 1/2 sum Kd log S_g
    auto cat = manual_catalog({{2, 3}, {1}});
    auto t = tensor_for(cat, 5, 2);
    TrainingConfig cfg;
    auto state = VariationalState::init(t, cfg);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ud(0.2, 1.5);
    for (int i = 0; i < cat.n_alts(); ++i)
        for (int c = 0; c < cat.columns(i); ++c) {
            state.mu[i][c] = ud(rng) - 0.8;
            state.c[i][c] = ud(rng);
        }
    const GroupIndex gi = GroupIndex::build(cat);

    auto penalty = [&](const VariationalState& s) {
        double p = 0.0;
        for (int i = 0; i < cat.n_alts(); ++i) {
            p += s.c[i].array().log().sum();
            for (const auto& g : cat.groups[i]) {
                double S = 0.0;
                for (int c = g.col_begin; c < g.col_end; ++c)
                    S += s.c[i][c] * s.c[i][c] + s.mu[i][c] * s.mu[i][c];
                p -= 0.5 * g.n_cols() * std::log(S);
            }
        }
        return p;
    };

    const double h = 1e-7;
    for (int i = 0; i < cat.n_alts(); ++i) {
        for (int c = 0; c < cat.columns(i); ++c) {
            const int g = gi.col_group[i][c];
            double S = 0.0;
            for (int cc = cat.groups[i][g].col_begin; cc < cat.groups[i][g].col_end; ++cc)
                S += state.c[i][cc] * state.c[i][cc] + state.mu[i][cc] * state.mu[i][cc];
            const double kd = gi.kd[i][g];
            const double dmu_analytic = -kd * state.mu[i][c] / S;
            const double dc_analytic = 1.0 / state.c[i][c] - kd * state.c[i][c] / S;

            auto sp = state, sm = state;
            sp.mu[i][c] += h;
            sm.mu[i][c] -= h;
            const double dmu_fd = (penalty(sp) - penalty(sm)) / (2 * h);
            sp = state;
            sm = state;
            sp.c[i][c] += h;
            sm.c[i][c] -= h;
            const double dc_fd = (penalty(sp) - penalty(sm)) / (2 * h);
            CHECK(std::abs(dmu_analytic - dmu_fd) < 1e-6);
            CHECK(std::abs(dc_analytic - dc_fd) < 1e-6);
        }
    }
}

TEST_CASE("elbo estimate: unit case and full-batch scaling") {
    auto cat = manual_catalog({{1}, {}});
    auto t = tensor_for(cat, 10, 3);
    TrainingConfig cfg;
    auto state = VariationalState::init(t, cfg);
    state.mu[0][0] = 0.0;
    state.c[0][0] = 1.0;
    const GroupIndex gi = GroupIndex::build(cat);

    // mu=0, c=1, one group with Kd=1: penalty = log 1 - (1/2) log 1 = 0
    std::vector<Eigen::VectorXd> z = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(0)};
    auto rows = all_rows(t.n_obs);
    const double e = elbo_estimate(state, t, gi, rows, z);
    MnlCoefficients beta = MnlCoefficients::zeros(t);
    const double ll = log_likelihood(beta, t, rows);  // beta = c*0 + 0 = 0
    CHECK(e == doctest::Approx(ll));  // scale factor N/|batch| = 1
}

TEST_CASE("elbo monte carlo mean matches gauss-hermite quadrature") {
    // 1 column, 10 rows, 2 alternatives
    auto cat = manual_catalog({{1}, {}});
    auto t = tensor_for(cat, 10, 12);
    TrainingConfig cfg;
    auto state = VariationalState::init(t, cfg);
    const double mu = 0.4, c = 0.7;
    state.mu[0][0] = mu;
    state.c[0][0] = c;
    const GroupIndex gi = GroupIndex::build(cat);
    auto rows = all_rows(t.n_obs);

    // exact E_z[loglik(c z + mu)] by quadrature
    auto ll_at = [&](double b) {
        MnlCoefficients beta = MnlCoefficients::zeros(t);
        beta.beta[0][0] = b;
        return log_likelihood(beta, t, rows);
    };
    const double exact_e = oracle::normal_expectation([&](double z) { return ll_at(c * z + mu); }, 64);
    const double penalty = std::log(c) - 0.5 * std::log(c * c + mu * mu);

    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd(0.0, 1.0);
    const int n_draws = 100000;
    double mean = 0.0, m2 = 0.0;
    std::vector<Eigen::VectorXd> z = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(0)};
    for (int s = 1; s <= n_draws; ++s) {
        z[0][0] = nd(rng);
        const double e = elbo_estimate(state, t, gi, rows, z);
        const double delta = e - mean;
        mean += delta / s;
        m2 += delta * (e - mean);
    }
    const double se = std::sqrt(m2 / (n_draws - 1) / n_draws);
    CHECK(std::abs(mean - (exact_e + penalty)) < 3 * se);
}

TEST_CASE("reparameterization: sample mean and variance track (mu, c^2)") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 1.0);
    const double mu = -0.3, c = 0.8;
    const int n = 1000000;
    double mean = 0.0, m2 = 0.0;
    for (int s = 1; s <= n; ++s) {
        const double beta = c * nd(rng) + mu;
        const double d = beta - mean;
        mean += d / s;
        m2 += d * (beta - mean);
    }
    const double var = m2 / (n - 1);
    const double se_mean = c / std::sqrt(static_cast<double>(n));
    const double se_var = c * c * std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(mean - mu) < 4 * se_mean);
    CHECK(std::abs(var - c * c) < 4 * se_var);
}

TEST_CASE("zero design: mu stays near zero under decaying rates") {
    auto cat = manual_catalog({{1, 1}, {1}});
    auto t = tensor_for(cat, 50, 5);
    for (auto& m : t.values) m.setZero();  // no information in the likelihood
    TrainingConfig cfg;
    cfg.schedule = "decay";
    cfg.base_rate = 0.05;
    cfg.decay_t0 = 500;
    cfg.batch_size = 50;
    cfg.max_iter = 10000;
    cfg.convergence_tol = 0.0;  // run the full budget
    cfg.seed = 99;
    auto fit = fit_ard(t, cat, cfg);
    for (int i = 0; i < cat.n_alts(); ++i)
        for (int c = 0; c < cat.columns(i); ++c) CHECK(std::abs(fit.state.mu[i][c]) < 0.05);
}

TEST_CASE("fixed seed reproduces the fit bit for bit") {
    auto cat = manual_catalog({{2, 1}, {1}});
    auto t = tensor_for(cat, 120, 6);
    TrainingConfig cfg;
    cfg.batch_size = 32;
    cfg.max_iter = 400;
    cfg.convergence_tol = 0.0;
    cfg.seed = 4242;
    auto f1 = fit_ard(t, cat, cfg);
    auto f2 = fit_ard(t, cat, cfg);
    for (int i = 0; i < cat.n_alts(); ++i) {
        CHECK(f1.state.mu[i] == f2.state.mu[i]);
        CHECK(f1.state.c[i] == f2.state.c[i]);
        CHECK(f1.lambda.lambda[i] == f2.lambda.lambda[i]);
    }
    CHECK(f1.trace.sample == f2.trace.sample);
}

TEST_CASE("c stays above the positivity floor through training") {
    auto cat = manual_catalog({{1, 2}, {1}});
    auto t = tensor_for(cat, 80, 7);
    TrainingConfig cfg;
    cfg.batch_size = 16;
    cfg.max_iter = 2000;
    cfg.convergence_tol = 0.0;
    cfg.seed = 31;
    const GroupIndex gi = GroupIndex::build(cat);
    auto state = VariationalState::init(t, cfg);
    for (int it = 0; it < cfg.max_iter; ++it) {
        ard_step(state, t, gi, cfg);
        for (int i = 0; i < cat.n_alts(); ++i)
            CHECK(state.c[i].minCoeff() >= cfg.c_floor);
    }
}

TEST_CASE("group permutation leaves lambda and selection unchanged") {
    // same data, but the 3-column group's columns (and matching design
    // columns) permuted
    auto cat = manual_catalog({{1, 3}, {1}});
    auto t = tensor_for(cat, 1500, 8);
    std::mt19937_64 crng(81);
    std::uniform_real_distribution<double> cud(0.0, 1.0);
    for (int r = 0; r < t.n_obs; ++r) {  // signal on the plain group only
        const double v0 = 1.5 * t.values[0](r, 0);
        const double p = std::exp(v0) / (std::exp(v0) + 1.0);
        t.choice[r] = cud(crng) < p ? 0 : 1;
    }
    t.values[1].setZero();
    TrainingConfig cfg;
    cfg.batch_size = 128;
    cfg.max_iter = 4000;
    cfg.convergence_tol = 0.0;
    cfg.seed = 7;

    auto f1 = fit_ard(t, cat, cfg);

    DesignTensor t2 = t;
    // permute columns 1,2,3 -> 3,1,2 inside the group
    t2.values[0].col(1) = t.values[0].col(3);
    t2.values[0].col(2) = t.values[0].col(1);
    t2.values[0].col(3) = t.values[0].col(2);
    auto f2 = fit_ard(t2, cat, cfg);

    // identical z-draw order acts on permuted columns, so lambda agrees only
    // statistically per-fit; the tying contract itself is algebraic:
    auto state = f1.state;
    std::swap(state.mu[0][1], state.mu[0][2]);
    std::swap(state.c[0][1], state.c[0][2]);
    auto lam_perm = lambda_optimal(state, cat);
    CHECK(lam_perm.lambda[0][1] == f1.lambda.lambda[0][1]);

    auto s1 = select_variables(f1.lambda, cat, 1e-3, true);
    auto s2 = select_variables(f2.lambda, cat, 1e-3, true);
    CHECK(s1.selected_labels() == s2.selected_labels());
    CHECK(s1.selected_labels()[0] == std::vector<std::string>{"g0"});
}

TEST_CASE("select_variables thresholds") {
    auto cat = manual_catalog({{1, 1, 1, 1, 1}});
    LambdaEstimate lam;
    lam.lambda = {Eigen::VectorXd(5)};
    lam.lambda[0] << 1.814, 1.174, 0.393, 0.0, 0.0001;

    auto sel = select_variables(lam, cat, 1e-3, true);
    auto labels = sel.selected_labels();
    CHECK(labels[0] == std::vector<std::string>{"g0", "g1", "g2"});
    CHECK(sel.ranked[0][0].rank == 1);
    CHECK(sel.ranked[0][0].lambda == doctest::Approx(1.814));

    // all zero: nothing selected
    LambdaEstimate zero;
    zero.lambda = {Eigen::VectorXd::Zero(5)};
    auto sel0 = select_variables(zero, cat, 1e-3, true);
    CHECK(sel0.selected_labels()[0].empty());

    // absolute mode with tau = 0 keeps everything positive
    auto sela = select_variables(lam, cat, 0.0, false);
    CHECK(sela.selected_labels()[0].size() == 4);
}

TEST_CASE("ard fit shrinks pure-noise groups far below a real signal") {
    // alt0 utility driven by column 0 only; columns 1..4 are noise. The
    // sample is large enough that the ARD noise floor (in-sample effect of
    // order 1/sqrt(n)) sits well below the relative selection cut.
    auto cat = manual_catalog({{1, 1, 1, 1, 1}, {1}});
    auto t = tensor_for(cat, 20000, 9);
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int r = 0; r < t.n_obs; ++r) {
        const double v0 = 2.0 * t.values[0](r, 0);
        const double p = std::exp(v0) / (std::exp(v0) + 1.0);
        t.choice[r] = ud(rng) < p ? 0 : 1;
    }
    t.values[1].setZero();
    TrainingConfig cfg;
    cfg.batch_size = 500;
    cfg.max_iter = 20000;
    cfg.convergence_tol = 0.0;
    cfg.seed = 2;
    auto fit = fit_ard(t, cat, cfg);
    const double top = fit.lambda.lambda[0][0];
    CHECK(top > 0.5);
    for (int g = 1; g < 5; ++g) CHECK(fit.lambda.lambda[0][g] < 1e-3 * top);
}
