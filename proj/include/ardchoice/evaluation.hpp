#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ardchoice/ard.hpp"
#include "ardchoice/mnl.hpp"
#include "ardchoice/synthetic.hpp"

namespace ardchoice {

struct SetMetrics {
    int n = 0;
    double loglik = 0.0;
    double loglik_null = 0.0;  // availability-aware equal-probability null
    double accuracy = 0.0;
};

struct EvalReport {
    SetMetrics full;
    std::optional<SetMetrics> train;
    std::optional<SetMetrics> test;
    int k_params = 0;
    double aic = 0.0;
    double bic = 0.0;
    double pseudo_r2 = 0.0;
    double pseudo_r2_adj = 0.0;
};

SetMetrics score_rows(const MnlCoefficients& beta, const DesignTensor& design,
                      std::span<const int> rows);

/// Full-data metrics plus AIC/BIC/pseudo-R2 with k = number of estimated
/// columns. Pass train/test row sets for the held-out variants.
EvalReport evaluate(const MnlCoefficients& beta, const DesignTensor& design, int k_params,
                    std::span<const int> rows = {}, std::span<const int> train_rows = {},
                    std::span<const int> test_rows = {});

struct AlternativeRecovery {
    std::string alternative;
    std::vector<std::string> truth;
    std::vector<std::string> selected;
    bool exact = false;
    double precision = 1.0;
    double recall = 1.0;
};

struct RecoveryReport {
    std::vector<AlternativeRecovery> per_alternative;
    bool all_exact = false;
};

RecoveryReport recovery(const Selection& selected, const TrueSpecification& truth,
                        const CandidateCatalog& catalog);

}  // namespace ardchoice
