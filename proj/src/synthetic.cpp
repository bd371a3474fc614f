#include "ardchoice/synthetic.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ardchoice/errors.hpp"

namespace ardchoice {

using json = nlohmann::json;

TrueSpecification TrueSpecification::parse_json(const std::string& json_text,
                                                const CandidateCatalog& catalog) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw config_error(std::string("specification: invalid JSON: ") + e.what());
    }
    TrueSpecification spec;
    spec.groups.resize(catalog.n_alts());
    for (auto& [alt, labels] : j.items()) {
        int idx = -1;
        for (int i = 0; i < catalog.n_alts(); ++i)
            if (catalog.alternatives[i] == alt) idx = i;
        if (idx < 0) throw config_error("specification: unknown alternative '" + alt + "'");
        spec.groups[idx] = labels.get<std::vector<std::string>>();
    }
    for (int i = 0; i < catalog.n_alts(); ++i)
        for (const auto& label : spec.groups[i])
            if (!catalog.find_group(i, label))
                throw config_error("specification: no candidate group '" + label +
                                   "' for alternative '" + catalog.alternatives[i] + "'");
    return spec;
}

TrueSpecification TrueSpecification::load(const std::string& path,
                                          const CandidateCatalog& catalog) {
    std::ifstream in(path);
    if (!in) throw config_error("specification: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str(), catalog);
}

SyntheticResult generate_synthetic(const ChoiceDataset& data, const CandidateCatalog& catalog,
                                   const TrueSpecification& spec, uint64_t seed,
                                   Standardize standardize) {
    const DesignTensor tensor = materialize(data, catalog, standardize);
    const ColumnSelection sel = ColumnSelection::from_groups(catalog, spec.groups);
    FitResult fit = fit_mle(tensor, sel);

    const auto rows = all_rows(tensor.n_obs);
    const Eigen::MatrixXd P = probabilities(utilities(fit.coefficients, tensor, rows));

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> draws(tensor.n_obs);
    const int I = tensor.n_alts();
    for (int r = 0; r < tensor.n_obs; ++r) {
        const double u = unif(rng);
        double acc = 0.0;
        int pick = -1;
        for (int i = 0; i < I; ++i) {
            if (!tensor.available(r, i)) continue;
            acc += P(r, i);
            if (u <= acc) {
                pick = i;
                break;
            }
        }
        if (pick < 0) {  // numerical slack: fall back to the last available
            for (int i = I - 1; i >= 0; --i)
                if (tensor.available(r, i)) {
                    pick = i;
                    break;
                }
        }
        draws[r] = pick;
    }

    // map tensor alternative order back to the dataset's order
    std::vector<int> alt_map(I);
    for (int i = 0; i < I; ++i) alt_map[i] = data.alt_index(catalog.alternatives[i]);
    std::vector<int> dataset_draws(tensor.n_obs);
    for (int r = 0; r < tensor.n_obs; ++r) dataset_draws[r] = alt_map[draws[r]];

    SyntheticResult res;
    res.data = with_choices(data, dataset_draws);
    res.generating_beta = fit.coefficients;
    res.generating_loglik = fit.loglik;
    return res;
}

}  // namespace ardchoice
