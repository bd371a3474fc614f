#pragma once

// Independent reference implementations used as test oracles. Everything in
// this header is deliberately written without reusing the library's
// evaluation paths: naive loops, quad precision accumulation, quadrature,
// grid/golden-section search, and a hand-rolled Newton logistic regression.

#include <quadmath.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ardchoice/search_space.hpp"

namespace oracle {

/// Naive double-loop utilities: V[n][i] = sum_c beta[i][c] * x[n][i][c].
inline std::vector<std::vector<double>> naive_utilities(
    const ardchoice::DesignTensor& t, const std::vector<Eigen::VectorXd>& beta) {
    std::vector<std::vector<double>> V(t.n_obs, std::vector<double>(t.n_alts(), 0.0));
    for (int n = 0; n < t.n_obs; ++n)
        for (int i = 0; i < t.n_alts(); ++i)
            for (int c = 0; c < t.columns(i); ++c) V[n][i] += beta[i][c] * t.values[i](n, c);
    return V;
}

/// Quad-precision naive log-likelihood over all rows.
inline double naive_loglik_quad(const ardchoice::DesignTensor& t,
                                const std::vector<Eigen::VectorXd>& beta) {
    __float128 total = 0;
    for (int n = 0; n < t.n_obs; ++n) {
        __float128 denom = 0;
        __float128 chosen = 0;
        for (int i = 0; i < t.n_alts(); ++i) {
            if (!t.available(n, i)) continue;
            __float128 v = 0;
            for (int c = 0; c < t.columns(i); ++c)
                v += static_cast<__float128>(beta[i][c]) * static_cast<__float128>(t.values[i](n, c));
            denom += expq(v);
            if (t.choice[n] == i) chosen = v;
        }
        total += chosen - logq(denom);
    }
    return static_cast<double>(total);
}

/// Central finite differences of a scalar function.
inline Eigen::VectorXd finite_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    for (int j = 0; j < x.size(); ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        g[j] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

/// Gauss-Hermite nodes and weights for integrals against exp(-t^2)
/// (Golub-Welsch on the Jacobi matrix).
struct GaussHermite {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

inline GaussHermite gauss_hermite(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(k / 2.0);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    GaussHermite gh;
    gh.nodes = es.eigenvalues();
    gh.weights.resize(n);
    const double mu0 = std::sqrt(M_PI);
    for (int k = 0; k < n; ++k) {
        const double v0 = es.eigenvectors()(0, k);
        gh.weights[k] = mu0 * v0 * v0;
    }
    return gh;
}

/// E_{z~N(0,1)}[f(z)] by Gauss-Hermite quadrature.
inline double normal_expectation(const std::function<double(double)>& f, int n_nodes = 64) {
    const GaussHermite gh = gauss_hermite(n_nodes);
    double s = 0.0;
    for (int k = 0; k < n_nodes; ++k)
        s += gh.weights[k] * f(std::sqrt(2.0) * gh.nodes[k]);
    return s / std::sqrt(M_PI);
}

/// Golden-section maximization of a unimodal function on [a, b], carried out
/// in quad precision so the argmax is resolvable beyond the double noise
/// floor (~sqrt(eps)*scale).
inline double golden_max_quad(const std::function<__float128(__float128)>& f, __float128 a,
                              __float128 b, __float128 tol = 1e-14Q) {
    const __float128 gr = (sqrtq(5.0Q) - 1.0Q) / 2.0Q;
    __float128 c = b - gr * (b - a);
    __float128 d = a + gr * (b - a);
    __float128 fc = f(c), fd = f(d);
    while (b - a > tol * (1.0Q + fabsq(a))) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return static_cast<double>(0.5Q * (a + b));
}

/// Golden-section maximization of a unimodal function on [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b,
                         double tol = 1e-10) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Grid-search Box-Cox exponent over [-2, 2] (step 1e-3): the profile
/// log-likelihood evaluated directly.
inline double grid_boxcox(const std::vector<double>& values) {
    auto profile = [&](double lam) {
        const double n = static_cast<double>(values.size());
        double s = 0, ss = 0, sl = 0;
        for (double x : values) {
            const double y = std::abs(lam) < 1e-12 ? std::log(x) : (std::pow(x, lam) - 1.0) / lam;
            s += y;
            ss += y * y;
            sl += std::log(x);
        }
        const double var = ss / n - (s / n) * (s / n);
        return -0.5 * n * std::log(var) + (lam - 1.0) * sl;
    };
    double best = -2.0, bestv = profile(-2.0);
    for (double lam = -2.0; lam <= 2.0 + 1e-12; lam += 1e-3) {
        const double v = profile(lam);
        if (v > bestv) {
            bestv = v;
            best = lam;
        }
    }
    return best;
}

/// Independent Newton-Raphson binary logistic regression:
/// P(y=1|x) = sigmoid(x' w). Returns w.
inline Eigen::VectorXd newton_binary_logit(const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                                           int max_iter = 100, double tol = 1e-12) {
    const int p = static_cast<int>(X.cols());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
        for (int n = 0; n < X.rows(); ++n) {
            const double eta = X.row(n).dot(w);
            const double mu = 1.0 / (1.0 + std::exp(-eta));
            g += (y[n] - mu) * X.row(n).transpose();
            H += mu * (1.0 - mu) * X.row(n).transpose() * X.row(n);
        }
        const Eigen::VectorXd step = H.ldlt().solve(g);
        w += step;
        if (step.lpNorm<Eigen::Infinity>() < tol) break;
    }
    return w;
}

/// Small random MNL instance: random design values, availability and
/// choices. All alternatives share the column count for simplicity.
inline ardchoice::DesignTensor random_instance(std::mt19937_64& rng, int n, int n_alts,
                                               int cols_per_alt, bool vary_avail = true) {
    ardchoice::DesignTensor t;
    for (int i = 0; i < n_alts; ++i) t.alternatives.push_back("alt" + std::to_string(i));
    t.n_obs = n;
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    t.values.resize(n_alts);
    for (int i = 0; i < n_alts; ++i) {
        t.values[i].resize(n, cols_per_alt);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < cols_per_alt; ++c) t.values[i](r, c) = nd(rng);
    }
    t.availability.assign(static_cast<size_t>(n) * n_alts, 1);
    t.choice.resize(n);
    for (int r = 0; r < n; ++r) {
        if (vary_avail) {
            int avail = 0;
            for (int i = 0; i < n_alts; ++i) {
                const bool a = ud(rng) > 0.25;
                t.availability[static_cast<size_t>(r) * n_alts + i] = a ? 1 : 0;
                avail += a;
            }
            if (avail == 0) t.availability[static_cast<size_t>(r) * n_alts] = 1;
        }
        std::vector<int> av;
        for (int i = 0; i < n_alts; ++i)
            if (t.availability[static_cast<size_t>(r) * n_alts + i]) av.push_back(i);
        t.choice[r] = av[static_cast<size_t>(ud(rng) * av.size()) % av.size()];
    }
    return t;
}

}  // namespace oracle
