#include "ardchoice/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ardchoice/errors.hpp"

namespace ardchoice {

SetMetrics score_rows(const MnlCoefficients& beta, const DesignTensor& design,
                      std::span<const int> rows) {
    SetMetrics m;
    m.n = static_cast<int>(rows.size());
    if (rows.empty()) return m;
    m.loglik = log_likelihood(beta, design, rows);
    const Eigen::MatrixXd P = probabilities(utilities(beta, design, rows));
    int hits = 0;
    const int I = design.n_alts();
    for (size_t k = 0; k < rows.size(); ++k) {
        const int r = rows[k];
        int avail = 0;
        int best = -1;
        double bestp = -1.0;
        for (int i = 0; i < I; ++i) {
            if (!design.available(r, i)) continue;
            ++avail;
            if (P(k, i) > bestp) {  // ties resolved to the lowest index
                bestp = P(k, i);
                best = i;
            }
        }
        m.loglik_null -= std::log(static_cast<double>(avail));
        if (best == design.choice[r]) ++hits;
    }
    m.accuracy = static_cast<double>(hits) / static_cast<double>(rows.size());
    return m;
}

EvalReport evaluate(const MnlCoefficients& beta, const DesignTensor& design, int k_params,
                    std::span<const int> rows, std::span<const int> train_rows,
                    std::span<const int> test_rows) {
    std::vector<int> all;
    if (rows.empty()) {
        all = all_rows(design.n_obs);
        rows = all;
    }
    EvalReport rep;
    rep.full = score_rows(beta, design, rows);
    if (!train_rows.empty()) rep.train = score_rows(beta, design, train_rows);
    if (!test_rows.empty()) rep.test = score_rows(beta, design, test_rows);
    rep.k_params = k_params;
    rep.aic = 2.0 * k_params - 2.0 * rep.full.loglik;
    rep.bic = k_params * std::log(static_cast<double>(rep.full.n)) - 2.0 * rep.full.loglik;
    rep.pseudo_r2 = 1.0 - rep.full.loglik / rep.full.loglik_null;
    rep.pseudo_r2_adj = 1.0 - (rep.full.loglik - k_params) / rep.full.loglik_null;
    return rep;
}

RecoveryReport recovery(const Selection& selected, const TrueSpecification& truth,
                        const CandidateCatalog& catalog) {
    if (truth.groups.size() != selected.ranked.size() ||
        selected.ranked.size() != static_cast<size_t>(catalog.n_alts()))
        throw config_error("recovery: alternative count mismatch");
    RecoveryReport rep;
    rep.all_exact = true;
    const auto labels = selected.selected_labels();
    for (int i = 0; i < catalog.n_alts(); ++i) {
        AlternativeRecovery r;
        r.alternative = catalog.alternatives[i];
        r.truth = truth.groups[i];
        r.selected = labels[i];
        for (const auto& t : r.truth)
            if (!catalog.find_group(i, t))
                throw config_error("recovery: unknown group label '" + t + "'");
        std::set<std::string> ts(r.truth.begin(), r.truth.end());
        std::set<std::string> ss(r.selected.begin(), r.selected.end());
        int inter = 0;
        for (const auto& s : ss)
            if (ts.count(s)) ++inter;
        r.precision = ss.empty() ? (ts.empty() ? 1.0 : 0.0)
                                 : static_cast<double>(inter) / static_cast<double>(ss.size());
        r.recall = ts.empty() ? 1.0 : static_cast<double>(inter) / static_cast<double>(ts.size());
        r.exact = ts == ss;
        rep.all_exact = rep.all_exact && r.exact;
        rep.per_alternative.push_back(std::move(r));
    }
    return rep;
}

}  // namespace ardchoice
