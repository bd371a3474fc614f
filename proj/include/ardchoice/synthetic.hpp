#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ardchoice/dataset.hpp"
#include "ardchoice/mnl.hpp"
#include "ardchoice/search_space.hpp"

namespace ardchoice {

/// Catalog group labels per alternative that form the data-generating
/// utility functions.
struct TrueSpecification {
    std::vector<std::vector<std::string>> groups;  // aligned with catalog alternatives

    static TrueSpecification load(const std::string& path, const CandidateCatalog& catalog);
    static TrueSpecification parse_json(const std::string& json_text,
                                        const CandidateCatalog& catalog);
};

struct SyntheticResult {
    ChoiceDataset data;              // original attributes, resampled choices
    MnlCoefficients generating_beta; // MLE fit of the true specification
    double generating_loglik = 0.0;
};

/// Fits the true specification by maximum likelihood on the original
/// choices, then redraws every observation's choice from the fitted
/// probabilities restricted to its availability set. Deterministic under a
/// fixed seed (single-threaded sampling). The generating fit uses the same
/// column normalization as the downstream estimation, so the true model
/// lives exactly in the candidate space being searched.
SyntheticResult generate_synthetic(const ChoiceDataset& data, const CandidateCatalog& catalog,
                                   const TrueSpecification& spec, uint64_t seed,
                                   Standardize standardize = Standardize::zscore);

}  // namespace ardchoice
