#include "ardchoice/mnl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ardchoice/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ardchoice {

namespace {
std::atomic<int> g_threads{1};
constexpr int kBlockRows = 2048;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }
int num_threads() { return g_threads.load(); }

std::vector<int> all_rows(int n) {
    std::vector<int> r(n);
    std::iota(r.begin(), r.end(), 0);
    return r;
}

MnlCoefficients MnlCoefficients::zeros(const DesignTensor& t) {
    MnlCoefficients b;
    b.beta.resize(t.n_alts());
    for (int i = 0; i < t.n_alts(); ++i) b.beta[i] = Eigen::VectorXd::Zero(t.columns(i));
    return b;
}

int MnlCoefficients::total_size() const {
    int t = 0;
    for (const auto& b : beta) t += static_cast<int>(b.size());
    return t;
}

int ColumnSelection::total() const {
    int t = 0;
    for (const auto& c : columns) t += static_cast<int>(c.size());
    return t;
}

ColumnSelection ColumnSelection::all(const CandidateCatalog& cat) {
    ColumnSelection s;
    s.columns.resize(cat.n_alts());
    for (int i = 0; i < cat.n_alts(); ++i) {
        s.columns[i].resize(cat.columns(i));
        std::iota(s.columns[i].begin(), s.columns[i].end(), 0);
    }
    return s;
}

ColumnSelection ColumnSelection::from_groups(
    const CandidateCatalog& cat, const std::vector<std::vector<std::string>>& group_labels) {
    if (group_labels.size() != static_cast<size_t>(cat.n_alts()))
        throw config_error("selection: expected group labels for " +
                           std::to_string(cat.n_alts()) + " alternatives");
    ColumnSelection s;
    s.columns.resize(cat.n_alts());
    for (int i = 0; i < cat.n_alts(); ++i) {
        for (const auto& label : group_labels[i]) {
            const CandidateGroup* g = cat.find_group(i, label);
            if (!g)
                throw config_error("selection: no candidate group '" + label +
                                   "' for alternative '" + cat.alternatives[i] + "'");
            for (int c = g->col_begin; c < g->col_end; ++c) s.columns[i].push_back(c);
        }
        std::sort(s.columns[i].begin(), s.columns[i].end());
        s.columns[i].erase(std::unique(s.columns[i].begin(), s.columns[i].end()),
                           s.columns[i].end());
    }
    return s;
}

namespace {

void check_shapes(const MnlCoefficients& beta, const DesignTensor& t) {
    if (static_cast<int>(beta.beta.size()) != t.n_alts())
        throw config_error("mnl: coefficient/alternative count mismatch");
    for (int i = 0; i < t.n_alts(); ++i)
        if (beta.beta[i].size() != t.values[i].cols())
            throw config_error("mnl: coefficient length " + std::to_string(beta.beta[i].size()) +
                               " != " + std::to_string(t.values[i].cols()) + " columns for '" +
                               t.alternatives[i] + "'");
}

struct RowWork {
    double loglik;
    Eigen::VectorXd prob;  // per alternative, 0 if unavailable
};

/// Utilities, max-shifted log-sum-exp and probabilities of one row.
inline RowWork row_probabilities(const MnlCoefficients& beta, const DesignTensor& t, int r) {
    const int I = t.n_alts();
    RowWork w;
    w.prob.setZero(I);
    Eigen::VectorXd V(I);
    double vmax = kNegInf;
    for (int i = 0; i < I; ++i) {
        if (!t.available(r, i)) {
            V[i] = kNegInf;
            continue;
        }
        V[i] = t.values[i].row(r).dot(beta.beta[i]);
        vmax = std::max(vmax, V[i]);
    }
    if (vmax == kNegInf) throw data_error("mnl: row " + std::to_string(r) + " has an empty choice set");
    double denom = 0.0;
    for (int i = 0; i < I; ++i)
        if (V[i] != kNegInf) denom += std::exp(V[i] - vmax);
    const double lse = vmax + std::log(denom);
    for (int i = 0; i < I; ++i)
        if (V[i] != kNegInf) w.prob[i] = std::exp(V[i] - lse);
    w.loglik = V[t.choice[r]] - lse;
    return w;
}

struct Partial {
    double loglik = 0.0;
    std::vector<Eigen::VectorXd> grad;  // per alt, selection width (or full)
};

/// Pairwise tree combine in fixed block order: bit-stable across threads.
template <typename Merge>
void pairwise_combine(std::vector<Partial>& parts, const Merge& merge) {
    size_t n = parts.size();
    while (n > 1) {
        const size_t half = (n + 1) / 2;
        for (size_t i = 0; i + half < n; ++i) merge(parts[i], parts[i + half]);
        n = half;
    }
}

}  // namespace

Eigen::MatrixXd utilities(const MnlCoefficients& beta, const DesignTensor& design,
                          std::span<const int> rows) {
    check_shapes(beta, design);
    Eigen::MatrixXd V(rows.size(), design.n_alts());
    for (size_t k = 0; k < rows.size(); ++k) {
        const int r = rows[k];
        for (int i = 0; i < design.n_alts(); ++i)
            V(k, i) = design.available(r, i) ? design.values[i].row(r).dot(beta.beta[i]) : kNegInf;
    }
    return V;
}

Eigen::MatrixXd probabilities(const Eigen::MatrixXd& V) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(V.rows(), V.cols());
    for (Eigen::Index r = 0; r < V.rows(); ++r) {
        double vmax = kNegInf;
        for (Eigen::Index i = 0; i < V.cols(); ++i) vmax = std::max(vmax, V(r, i));
        if (vmax == kNegInf) throw data_error("probabilities: empty availability set in row " +
                                              std::to_string(r));
        double denom = 0.0;
        for (Eigen::Index i = 0; i < V.cols(); ++i)
            if (V(r, i) != kNegInf) denom += std::exp(V(r, i) - vmax);
        for (Eigen::Index i = 0; i < V.cols(); ++i)
            if (V(r, i) != kNegInf) P(r, i) = std::exp(V(r, i) - vmax) / denom;
    }
    return P;
}

namespace {

/// Shared driver: log-likelihood and (optionally) gradient over `rows`,
/// gradient written into `grad` (full catalog width) when non-null.
double loglik_driver(const MnlCoefficients& beta, const DesignTensor& t,
                     std::span<const int> rows, MnlCoefficients* grad) {
    check_shapes(beta, t);
    const int I = t.n_alts();
    const size_t n = rows.size();
    const size_t n_blocks = (n + kBlockRows - 1) / kBlockRows;
    std::vector<Partial> parts(std::max<size_t>(1, n_blocks));

    const int threads = std::min<int>(num_threads(), static_cast<int>(std::max<size_t>(1, n_blocks)));
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
#endif
    for (size_t b = 0; b < n_blocks; ++b) {
        Partial p;
        if (grad) {
            p.grad.resize(I);
            for (int i = 0; i < I; ++i) p.grad[i] = Eigen::VectorXd::Zero(t.columns(i));
        }
        const size_t lo = b * kBlockRows;
        const size_t hi = std::min(n, lo + kBlockRows);
        for (size_t k = lo; k < hi; ++k) {
            const int r = rows[k];
            RowWork w = row_probabilities(beta, t, r);
            p.loglik += w.loglik;
            if (grad) {
                for (int i = 0; i < I; ++i) {
                    if (!t.available(r, i)) continue;
                    const double coef = (t.choice[r] == i ? 1.0 : 0.0) - w.prob[i];
                    p.grad[i].noalias() += coef * t.values[i].row(r).transpose();
                }
            }
        }
        parts[b] = std::move(p);
    }

    pairwise_combine(parts, [&](Partial& a, Partial& b2) {
        a.loglik += b2.loglik;
        if (grad)
            for (int i = 0; i < I; ++i) a.grad[i] += b2.grad[i];
    });
    if (grad) grad->beta = std::move(parts[0].grad);
    return parts[0].loglik;
}

}  // namespace

double log_likelihood(const MnlCoefficients& beta, const DesignTensor& design,
                      std::span<const int> rows) {
    return loglik_driver(beta, design, rows, nullptr);
}

MnlCoefficients log_likelihood_grad(const MnlCoefficients& beta, const DesignTensor& design,
                                    std::span<const int> rows) {
    MnlCoefficients g;
    loglik_driver(beta, design, rows, &g);
    return g;
}

double log_likelihood_with_grad(const MnlCoefficients& beta, const DesignTensor& design,
                                std::span<const int> rows, MnlCoefficients& grad) {
    return loglik_driver(beta, design, rows, &grad);
}

namespace {

Eigen::VectorXd pack(const MnlCoefficients& beta, const ColumnSelection& sel) {
    Eigen::VectorXd x(sel.total());
    int p = 0;
    for (size_t i = 0; i < sel.columns.size(); ++i)
        for (int c : sel.columns[i]) x[p++] = beta.beta[i][c];
    return x;
}

void unpack(const Eigen::VectorXd& x, const ColumnSelection& sel, MnlCoefficients& beta) {
    int p = 0;
    for (size_t i = 0; i < sel.columns.size(); ++i)
        for (int c : sel.columns[i]) beta.beta[i][c] = x[p++];
}

void rank_warning(const DesignTensor& t, const ColumnSelection& sel, std::span<const int> rows,
                  std::vector<std::string>& warnings) {
    for (size_t i = 0; i < sel.columns.size(); ++i) {
        const auto& cols = sel.columns[i];
        const int k = static_cast<int>(cols.size());
        if (k == 0) continue;
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd v(k);
        for (int r : rows) {
            if (!t.available(r, static_cast<int>(i))) continue;
            for (int a = 0; a < k; ++a) v[a] = t.values[i](r, cols[a]);
            gram.selfadjointView<Eigen::Lower>().rankUpdate(v);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        const double emax = es.eigenvalues().maxCoeff();
        const double emin = es.eigenvalues().minCoeff();
        if (emax > 0 && emin < 1e-10 * emax) {
            std::ostringstream os;
            os << "near-collinear columns in alternative '" << t.alternatives[i]
               << "' (condition > 1e10); estimates may be unstable";
            warnings.push_back(os.str());
        }
    }
}

}  // namespace

FitResult fit_mle(const DesignTensor& design, const ColumnSelection& selection,
                  const FitOptions& options, std::span<const int> rows) {
    std::vector<int> all;
    if (rows.empty()) {
        all = all_rows(design.n_obs);
        rows = all;
    }
    if (static_cast<int>(selection.columns.size()) != design.n_alts())
        throw config_error("fit_mle: selection/alternative count mismatch");

    FitResult res;
    if (options.check_rank) rank_warning(design, selection, rows, res.warnings);

    const int dim = selection.total();
    MnlCoefficients beta = MnlCoefficients::zeros(design);
    MnlCoefficients gfull = MnlCoefficients::zeros(design);

    auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        unpack(x, selection, beta);
        const double ll = log_likelihood_with_grad(beta, design, rows, gfull);
        g = pack(gfull, selection);
        return ll;
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd g(dim);
    double ll = eval(x, g);
    res.trace.push_back(ll);

    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(dim, dim);
    bool converged = g.lpNorm<Eigen::Infinity>() < options.grad_tol;

    int it = 0;
    while (!converged && it < options.max_iter) {
        ++it;
        Eigen::VectorXd dir = Hinv * g;  // ascent direction
        double dir_deriv = g.dot(dir);
        if (!(dir_deriv > 0)) {
            Hinv.setIdentity();
            dir = g;
            dir_deriv = g.dot(g);
        }

        // backtracking line search with sufficient increase (Armijo)
        const double c1 = 1e-4;
        double step = 1.0;
        Eigen::VectorXd xn, gn(dim);
        double lln = kNegInf;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + step * dir;
            lln = eval(xn, gn);
            if (std::isfinite(lln) && lln >= ll + c1 * step * dir_deriv) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no progress possible at machine precision

        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = g - gn;  // gradient of -ll increases along s
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            // BFGS update of the inverse Hessian of -loglik
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd syT = s * y.transpose();
            Hinv = (Eigen::MatrixXd::Identity(dim, dim) - rho * syT) * Hinv *
                       (Eigen::MatrixXd::Identity(dim, dim) - rho * syT.transpose()) +
                   rho * s * s.transpose();
        }

        const double rel = std::abs(lln - ll) / std::max(1.0, std::abs(ll));
        x = xn;
        g = gn;
        ll = lln;
        res.trace.push_back(ll);
        if (g.lpNorm<Eigen::Infinity>() < options.grad_tol || rel < options.rel_tol) {
            converged = true;
        }
    }

    res.loglik = ll;
    res.iterations = it;
    res.converged = converged;
    unpack(x, selection, beta);
    res.coefficients = beta;
    if (!converged && !options.allow_nonconverged) {
        std::ostringstream os;
        os << "fit_mle: no convergence after " << it << " iterations (loglik " << ll
           << ", |grad|_inf " << g.lpNorm<Eigen::Infinity>() << ", trace of " << res.trace.size()
           << " steps from " << res.trace.front() << ")";
        throw numeric_error(os.str());
    }
    return res;
}

Eigen::MatrixXd observed_information(const MnlCoefficients& beta, const DesignTensor& design,
                                     const ColumnSelection& selection, std::span<const int> rows) {
    std::vector<int> all;
    if (rows.empty()) {
        all = all_rows(design.n_obs);
        rows = all;
    }
    const int I = design.n_alts();
    const int dim = selection.total();
    std::vector<int> offset(I, 0);
    for (int i = 1; i < I; ++i)
        offset[i] = offset[i - 1] + static_cast<int>(selection.columns[i - 1].size());

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd z(dim), pz(dim);
    for (int r : rows) {
        RowWork w = row_probabilities(beta, design, r);
        pz.setZero();
        Eigen::MatrixXd pzz = Eigen::MatrixXd::Zero(dim, dim);
        for (int i = 0; i < I; ++i) {
            if (!design.available(r, i) || w.prob[i] == 0.0) continue;
            z.setZero();
            const auto& cols = selection.columns[i];
            for (size_t a = 0; a < cols.size(); ++a)
                z[offset[i] + static_cast<int>(a)] = design.values[i](r, cols[a]);
            pz.noalias() += w.prob[i] * z;
            pzz.selfadjointView<Eigen::Lower>().rankUpdate(z, w.prob[i]);
        }
        H += Eigen::MatrixXd(pzz.selfadjointView<Eigen::Lower>()) - pz * pz.transpose();
    }
    return H;  // information of -loglik (positive semidefinite)
}

}  // namespace ardchoice
