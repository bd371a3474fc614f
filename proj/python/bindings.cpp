#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ardchoice/ard.hpp"
#include "ardchoice/dataset.hpp"
#include "ardchoice/errors.hpp"
#include "ardchoice/evaluation.hpp"
#include "ardchoice/mnl.hpp"
#include "ardchoice/search_space.hpp"
#include "ardchoice/serialize.hpp"
#include "ardchoice/synthetic.hpp"
#include "ardchoice/version.hpp"

namespace py = pybind11;
using namespace ardchoice;

namespace {

TrainingConfig config_from_kwargs(const py::dict& kw) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& item : kw) {
        const std::string key = py::str(item.first);
        if (key == "schedule") {
            j[key] = item.second.cast<std::string>();
        } else if (key == "tau_relative") {
            j[key] = item.second.cast<bool>();
        } else if (key == "batch_size" || key == "max_iter" || key == "mc_samples" ||
                   key == "convergence_window" || key == "lambda_checkpoint_every") {
            j[key] = item.second.cast<long long>();
        } else if (key == "seed") {
            j[key] = item.second.cast<uint64_t>();
        } else {
            j[key] = item.second.cast<double>();
        }
    }
    return parse_training_config_json(j.dump());
}

py::dict lambda_table(const Selection& sel, const CandidateCatalog& cat) {
    py::dict out;
    for (int i = 0; i < cat.n_alts(); ++i) {
        py::list rows;
        for (const auto& g : sel.ranked[i]) {
            py::dict row;
            row["group"] = g.label;
            row["lambda"] = g.lambda;
            row["rank"] = g.rank;
            row["selected"] = g.selected;
            rows.append(row);
        }
        out[py::str(cat.alternatives[i])] = rows;
    }
    return out;
}

py::dict eval_dict(const EvalReport& rep) {
    auto set_metrics = [](const SetMetrics& m) {
        py::dict d;
        d["n"] = m.n;
        d["loglik"] = m.loglik;
        d["loglik_null"] = m.loglik_null;
        d["accuracy"] = m.accuracy;
        return d;
    };
    py::dict d;
    d["full"] = set_metrics(rep.full);
    if (rep.train) d["train"] = set_metrics(*rep.train);
    if (rep.test) d["test"] = set_metrics(*rep.test);
    d["k_params"] = rep.k_params;
    d["aic"] = rep.aic;
    d["bic"] = rep.bic;
    d["pseudo_r2"] = rep.pseudo_r2;
    d["pseudo_r2_adj"] = rep.pseudo_r2_adj;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Automatic utility function specification for multinomial logit models";

    py::register_exception<config_error>(m, "ConfigError");
    py::register_exception<data_error>(m, "DataError");
    py::register_exception<transform_error>(m, "TransformError");
    py::register_exception<numeric_error>(m, "NumericError");

    py::class_<ChoiceDataset>(m, "ChoiceDataset")
        .def_property_readonly("n", &ChoiceDataset::n)
        .def_property_readonly("alternatives",
                               [](const ChoiceDataset& d) { return d.alternatives; })
        .def_property_readonly("choices", [](const ChoiceDataset& d) { return d.choice; })
        .def("save", &save_dataset, py::arg("path"))
        .def("split",
             [](const ChoiceDataset& d, double fraction, uint64_t seed, bool by_individual) {
                 return split_dataset(d, fraction, seed, by_individual);
             },
             py::arg("fraction"), py::arg("seed"), py::arg("by_individual") = false)
        .def("__repr__", [](const ChoiceDataset& d) {
            return "<ChoiceDataset n=" + std::to_string(d.n()) + " alts=" +
                   std::to_string(d.n_alts()) + ">";
        });

    py::class_<CandidateCatalog>(m, "CandidateCatalog")
        .def_property_readonly("alternatives",
                               [](const CandidateCatalog& c) { return c.alternatives; })
        .def_property_readonly("total_columns", &CandidateCatalog::total_columns)
        .def_property_readonly("total_groups", &CandidateCatalog::total_groups)
        .def("group_labels",
             [](const CandidateCatalog& c, const std::string& alt) {
                 std::vector<std::string> out;
                 for (int i = 0; i < c.n_alts(); ++i)
                     if (c.alternatives[i] == alt)
                         for (const auto& g : c.groups[i]) out.push_back(g.label);
                 return out;
             },
             py::arg("alternative"))
        .def("to_json", [](const CandidateCatalog& c) { return catalog_to_json(c).dump(2); })
        .def("__repr__", [](const CandidateCatalog& c) {
            return "<CandidateCatalog candidates=" + std::to_string(c.total_columns()) + ">";
        });

    py::class_<DesignTensor>(m, "DesignTensor")
        .def_property_readonly("n_obs", [](const DesignTensor& t) { return t.n_obs; })
        .def_property_readonly("standardized",
                               [](const DesignTensor& t) { return standardize_to_string(t.standardized); })
        .def("values", [](const DesignTensor& t, int alt) { return t.values.at(alt); },
             py::arg("alternative_index"))
        .def_property_readonly("choices", [](const DesignTensor& t) { return t.choice; });

    m.def("load_schema", &load_schema, py::arg("path"));
    m.def("parse_schema", &parse_schema_json, py::arg("json_text"));
    py::class_<DatasetSchema>(m, "DatasetSchema");

    m.def(
        "load_dataset",
        [](const std::string& path, const DatasetSchema& schema) {
            LoadStats stats;
            ChoiceDataset d = load_dataset(path, schema, &stats);
            return py::make_tuple(std::move(d),
                                  py::dict(py::arg("rows_read") = stats.rows_read,
                                           py::arg("rows_dropped") = stats.rows_dropped));
        },
        py::arg("path"), py::arg("schema"));

    m.def("load_space_config", &load_space_config, py::arg("path"));
    m.def("parse_space_config", &parse_space_config_json, py::arg("json_text"));
    py::class_<SpaceConfig>(m, "SpaceConfig");

    m.def("build_catalog", &build_catalog, py::arg("data"), py::arg("config"));
    m.def(
        "materialize",
        [](const ChoiceDataset& data, const CandidateCatalog& catalog, const std::string& mode) {
            return materialize(data, catalog, standardize_from_string(mode));
        },
        py::arg("data"), py::arg("catalog"), py::arg("standardize") = "zscore");

    m.def("set_num_threads", &set_num_threads, py::arg("n"));

    m.def(
        "fit_mle",
        [](const DesignTensor& tensor, const CandidateCatalog& catalog, const py::dict& spec) {
            std::vector<std::vector<std::string>> labels(catalog.n_alts());
            for (const auto& item : spec) {
                const std::string alt = py::str(item.first);
                bool found = false;
                for (int i = 0; i < catalog.n_alts(); ++i)
                    if (catalog.alternatives[i] == alt) {
                        labels[i] = item.second.cast<std::vector<std::string>>();
                        found = true;
                    }
                if (!found) throw config_error("fit_mle: unknown alternative '" + alt + "'");
            }
            const auto sel = ColumnSelection::from_groups(catalog, labels);
            const auto fit = fit_mle(tensor, sel);
            py::dict out;
            out["loglik"] = fit.loglik;
            out["converged"] = fit.converged;
            out["iterations"] = fit.iterations;
            out["k_params"] = sel.total();
            out["coefficients_json"] =
                coefficients_to_json(fit.coefficients, catalog, tensor.standardized).dump(2);
            py::list betas;
            for (const auto& b : fit.coefficients.beta) betas.append(b);
            out["beta"] = betas;
            return out;
        },
        py::arg("tensor"), py::arg("catalog"), py::arg("spec"));

    m.def(
        "fit_ard",
        [](const DesignTensor& tensor, const CandidateCatalog& catalog, const py::kwargs& kw) {
            const TrainingConfig cfg = config_from_kwargs(kw);
            const auto fit = fit_ard(tensor, catalog, cfg);
            const auto sel =
                select_variables(fit.lambda, catalog, cfg.selection_tau, cfg.tau_relative);
            py::dict out;
            out["converged"] = fit.converged;
            out["iterations"] = fit.iterations;
            out["lambda"] = lambda_table(sel, catalog);
            py::dict selected;
            const auto labels = sel.selected_labels();
            for (int i = 0; i < catalog.n_alts(); ++i)
                selected[py::str(catalog.alternatives[i])] = labels[i];
            out["selected"] = selected;
            out["elbo_trace"] = fit.trace.smoothed;
            return out;
        },
        py::arg("tensor"), py::arg("catalog"));

    m.def(
        "simulate",
        [](const ChoiceDataset& data, const CandidateCatalog& catalog, const py::dict& spec,
           uint64_t seed) {
            nlohmann::json j = nlohmann::json::object();
            for (const auto& item : spec)
                j[py::str(item.first).cast<std::string>()] =
                    item.second.cast<std::vector<std::string>>();
            const auto truth = TrueSpecification::parse_json(j.dump(), catalog);
            auto sim = generate_synthetic(data, catalog, truth, seed);
            py::dict out;
            out["data"] = std::move(sim.data);
            out["generating_loglik"] = sim.generating_loglik;
            return out;
        },
        py::arg("data"), py::arg("catalog"), py::arg("spec"), py::arg("seed") = 0);

    m.def(
        "evaluate",
        [](const DesignTensor& tensor, const std::vector<Eigen::VectorXd>& beta, int k_params) {
            MnlCoefficients c;
            c.beta = beta;
            return eval_dict(evaluate(c, tensor, k_params));
        },
        py::arg("tensor"), py::arg("beta"), py::arg("k_params"));

    m.attr("__version__") = kVersion;
}
