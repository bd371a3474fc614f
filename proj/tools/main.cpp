#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "ardchoice/ard.hpp"
#include "ardchoice/dataset.hpp"
#include "ardchoice/errors.hpp"
#include "ardchoice/evaluation.hpp"
#include "ardchoice/mnl.hpp"
#include "ardchoice/search_space.hpp"
#include "ardchoice/serialize.hpp"
#include "ardchoice/synthetic.hpp"
#include "ardchoice/version.hpp"

namespace fs = std::filesystem;
using namespace ardchoice;
using json = nlohmann::json;

namespace {

int g_log_level = 1;  // 0 quiet, 1 info, 2 debug

void log_info(const std::string& msg) {
    if (g_log_level >= 1) std::cerr << "[ard-choice] " << msg << '\n';
}

std::string out_path(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    return (fs::path(dir) / name).string();
}

void write_manifest_sidecar(const RunManifest& m, const std::string& csv_path) {
    write_json(m.to_json(), csv_path + ".manifest.json");
}

json with_manifest(json j, const RunManifest& m) {
    j["manifest"] = m.to_json();
    return j;
}

struct CommonOpts {
    std::string output_dir = ".";
    uint64_t seed = 0;
    int threads = 1;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--output-dir", c.output_dir, "Directory for output artifacts");
    cmd->add_option("--seed", c.seed, "Random seed");
    cmd->add_option("--threads", c.threads, "Worker threads for row-parallel reductions");
    cmd->add_flag("--deterministic", c.deterministic,
                  "Force ordered pairwise reductions (always on; flag kept for pipelines)");
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* lvl = std::getenv("ARD_CHOICE_LOG")) {
        const std::string s = lvl;
        if (s == "quiet" || s == "0") g_log_level = 0;
        else if (s == "debug" || s == "2") g_log_level = 2;
    }

    CLI::App app{"Automatic utility function specification for multinomial logit models"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // expand ---------------------------------------------------------------
    auto* expand = app.add_subcommand("expand", "Enumerate the candidate catalog and design tensor");
    std::string ex_data, ex_schema, ex_space;
    std::string ex_standardize = "zscore";
    CommonOpts ex_common;
    expand->add_option("--data", ex_data, "Choice dataset")->required();
    expand->add_option("--schema", ex_schema, "Dataset schema JSON")->required();
    expand->add_option("--space,--config", ex_space, "Search-space config JSON")->required();
    expand->add_option("--standardize", ex_standardize,
                       "Column normalization: none, scale (default) or zscore");
    add_common(expand, ex_common);

    // simulate ---------------------------------------------------------------
    auto* simulate = app.add_subcommand("simulate", "Resample choices from an MLE fit of a true specification");
    std::string si_data, si_schema, si_catalog, si_spec;
    CommonOpts si_common;
    simulate->add_option("--data", si_data, "Choice dataset")->required();
    simulate->add_option("--schema", si_schema, "Dataset schema JSON")->required();
    simulate->add_option("--catalog", si_catalog, "Catalog JSON from expand")->required();
    simulate->add_option("--spec,--config", si_spec, "True-specification JSON")->required();
    std::string si_standardize = "zscore";
    simulate->add_option("--standardize", si_standardize,
                         "Normalization for the generating fit (match the downstream tensor)");
    add_common(simulate, si_common);

    // fit-ard ----------------------------------------------------------------
    auto* fitard = app.add_subcommand("fit-ard", "Fit the hierarchical ARD model with DSVI");
    std::string fa_tensor, fa_catalog, fa_config, fa_resume;
    CommonOpts fa_common;
    fitard->add_option("--tensor", fa_tensor, "Design tensor CSV")->required();
    fitard->add_option("--catalog", fa_catalog, "Catalog JSON")->required();
    fitard->add_option("--train-config,--config", fa_config, "Training config JSON");
    fitard->add_option("--resume", fa_resume, "Checkpoint JSON to resume from");
    add_common(fitard, fa_common);

    // fit-mnl ----------------------------------------------------------------
    auto* fitmnl = app.add_subcommand("fit-mnl", "Maximum-likelihood fit of a fixed specification");
    std::string fm_tensor, fm_catalog, fm_spec;
    double fm_split = 0.0;
    CommonOpts fm_common;
    fitmnl->add_option("--tensor", fm_tensor, "Design tensor CSV")->required();
    fitmnl->add_option("--catalog", fm_catalog, "Catalog JSON")->required();
    fitmnl->add_option("--spec,--config", fm_spec, "Specification JSON (group labels per alternative)")->required();
    fitmnl->add_option("--eval-split", fm_split, "Hold out this fraction for test metrics (0 = none)");
    add_common(fitmnl, fm_common);

    // evaluate ----------------------------------------------------------------
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score stored coefficients on a tensor");
    std::string ev_tensor, ev_catalog, ev_coeffs;
    double ev_split = 0.0;
    CommonOpts ev_common;
    evaluate_cmd->add_option("--tensor", ev_tensor, "Design tensor CSV")->required();
    evaluate_cmd->add_option("--catalog", ev_catalog, "Catalog JSON")->required();
    evaluate_cmd->add_option("--coefficients,--config", ev_coeffs, "Coefficients JSON")->required();
    evaluate_cmd->add_option("--eval-split", ev_split, "Hold out this fraction for test metrics");
    add_common(evaluate_cmd, ev_common);

    // report -------------------------------------------------------------------
    auto* report = app.add_subcommand("report", "Summarize a lambda report, optionally against a known truth");
    std::string rp_lambda, rp_truth, rp_catalog, rp_trace;
    CommonOpts rp_common;
    report->add_option("--lambda", rp_lambda, "Lambda report CSV from fit-ard")->required();
    report->add_option("--truth,--config", rp_truth, "True-specification JSON");
    report->add_option("--catalog", rp_catalog, "Catalog JSON (required with --truth)");
    report->add_option("--trace", rp_trace, "ELBO trace CSV to re-emit as plot data");
    add_common(report, rp_common);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*expand) {
            set_num_threads(ex_common.threads);
            const DatasetSchema schema = load_schema(ex_schema);
            LoadStats stats;
            const ChoiceDataset data = load_dataset(ex_data, schema, &stats);
            log_info("loaded " + std::to_string(data.n()) + " observations (dropped " +
                     std::to_string(stats.rows_dropped) + ")");
            const SpaceConfig space = load_space_config(ex_space);
            const CandidateCatalog catalog = build_catalog(data, space);
            const DesignTensor tensor =
                materialize(data, catalog, standardize_from_string(ex_standardize));

            RunManifest m;
            m.subcommand = "expand";
            m.inputs = {{"data", ex_data}, {"schema", ex_schema}, {"space", ex_space}};
            m.seeds = {{"seed", ex_common.seed}};
            m.catalog_hash = catalog_hash(catalog);
            write_json(with_manifest(catalog_to_json(catalog), m),
                       out_path(ex_common.output_dir, "catalog.json"));
            const std::string tpath = out_path(ex_common.output_dir, "tensor.csv");
            write_tensor_csv(tensor, catalog, tpath);
            write_manifest_sidecar(m, tpath);
            std::cout << "candidates: " << catalog.total_columns() << "\n";
            std::cout << "groups: " << catalog.total_groups() << "\n";
            std::cout << "observations: " << tensor.n_obs << "\n";
        } else if (*simulate) {
            set_num_threads(si_common.threads);
            const DatasetSchema schema = load_schema(si_schema);
            const ChoiceDataset data = load_dataset(si_data, schema);
            const CandidateCatalog catalog = load_catalog(si_catalog);
            const TrueSpecification spec = TrueSpecification::load(si_spec, catalog);
            const SyntheticResult sim = generate_synthetic(data, catalog, spec, si_common.seed,
                                                           standardize_from_string(si_standardize));

            RunManifest m;
            m.subcommand = "simulate";
            m.inputs = {{"data", si_data}, {"schema", si_schema}, {"catalog", si_catalog},
                        {"spec", si_spec}};
            m.seeds = {{"seed", si_common.seed}};
            m.catalog_hash = catalog_hash(catalog);
            const std::string dpath = out_path(si_common.output_dir, "simulated.dat");
            save_dataset(sim.data, dpath);
            json meta;
            meta["spec"] = read_json(si_spec);
            meta["seed"] = si_common.seed;
            meta["generating_loglik"] = sim.generating_loglik;
            meta["generating_beta"] = coefficients_to_json(sim.generating_beta, catalog, standardize_from_string(si_standardize));
            write_json(with_manifest(meta, m), out_path(si_common.output_dir, "simulated_meta.json"));
            write_manifest_sidecar(m, dpath);
            std::cout << "simulated: " << sim.data.n() << " observations\n";
        } else if (*fitard) {
            set_num_threads(fa_common.threads);
            const CandidateCatalog catalog = load_catalog(fa_catalog);
            const DesignTensor tensor = read_tensor_csv(fa_tensor, catalog);
            TrainingConfig config =
                fa_config.empty() ? TrainingConfig{} : load_training_config(fa_config);
            if (fitard->count("--seed") > 0) config.seed = fa_common.seed;
            const std::string cfg_hash = hex64(fnv1a64(training_config_to_json(config).dump()));

            ArdFitResult fit;
            if (fa_resume.empty()) {
                fit = fit_ard(tensor, catalog, config);
            } else {
                const json ck = read_json(fa_resume);
                VariationalState state = state_from_json(ck, catalog);
                log_info("resuming from t=" + std::to_string(state.t));
                fit = fit_ard_continue(std::move(state), tensor, catalog, config);
            }
            const Selection sel = select_variables(fit.lambda, catalog, config.selection_tau,
                                                   config.tau_relative);

            RunManifest m;
            m.subcommand = "fit-ard";
            m.inputs = {{"tensor", fa_tensor}, {"catalog", fa_catalog}};
            if (!fa_config.empty()) m.inputs["train_config"] = fa_config;
            if (!fa_resume.empty()) m.inputs["resume"] = fa_resume;
            m.seeds = {{"seed", config.seed}};
            m.catalog_hash = catalog_hash(catalog);
            const std::string lpath = out_path(fa_common.output_dir, "lambda_report.csv");
            write_lambda_csv(sel, catalog.alternatives, lpath);
            write_manifest_sidecar(m, lpath);
            write_json(with_manifest(state_to_json(fit.state, catalog, fit.lambda, cfg_hash,
                                                   fit.converged),
                                     m),
                       out_path(fa_common.output_dir, "checkpoint.json"));
            const std::string trpath = out_path(fa_common.output_dir, "elbo_trace.csv");
            write_trace_csv(fit.trace, trpath);
            write_manifest_sidecar(m, trpath);
            std::cout << "iterations: " << fit.iterations
                      << (fit.converged ? " (converged)" : " (max-iter)") << "\n";
            for (int i = 0; i < catalog.n_alts(); ++i) {
                std::cout << catalog.alternatives[i] << " top:";
                for (const auto& g : sel.ranked[i]) {
                    if (g.rank > 5) break;
                    std::cout << "  " << g.label << "=" << g.lambda;
                }
                std::cout << "\n";
            }
        } else if (*fitmnl) {
            set_num_threads(fm_common.threads);
            const CandidateCatalog catalog = load_catalog(fm_catalog);
            const DesignTensor tensor = read_tensor_csv(fm_tensor, catalog);
            const json spec_json = read_json(fm_spec);
            std::vector<std::vector<std::string>> labels(catalog.n_alts());
            for (auto& [alt, ls] : spec_json.items()) {
                bool found = false;
                for (int i = 0; i < catalog.n_alts(); ++i)
                    if (catalog.alternatives[i] == alt) {
                        labels[i] = ls.get<std::vector<std::string>>();
                        found = true;
                    }
                if (!found) throw config_error("spec: unknown alternative '" + alt + "'");
            }
            const ColumnSelection sel = ColumnSelection::from_groups(catalog, labels);
            const FitResult fit = fit_mle(tensor, sel);
            for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';

            EvalReport rep;
            if (fm_split > 0.0) {
                // split on tensor rows by index
                std::vector<int> rows = all_rows(tensor.n_obs);
                std::mt19937_64 rng(fm_common.seed);
                std::shuffle(rows.begin(), rows.end(), rng);
                const int cut = static_cast<int>(std::floor((1.0 - fm_split) * tensor.n_obs));
                std::vector<int> train(rows.begin(), rows.begin() + cut);
                std::vector<int> test(rows.begin() + cut, rows.end());
                std::sort(train.begin(), train.end());
                std::sort(test.begin(), test.end());
                const FitResult tfit = fit_mle(tensor, sel, {}, train);
                rep = evaluate(tfit.coefficients, tensor, sel.total(), {}, train, test);
                rep.full = score_rows(fit.coefficients, tensor, all_rows(tensor.n_obs));
            } else {
                rep = evaluate(fit.coefficients, tensor, sel.total());
            }

            RunManifest m;
            m.subcommand = "fit-mnl";
            m.inputs = {{"tensor", fm_tensor}, {"catalog", fm_catalog}, {"spec", fm_spec}};
            m.seeds = {{"seed", fm_common.seed}};
            m.catalog_hash = catalog_hash(catalog);
            json cj = coefficients_to_json(fit.coefficients, catalog, tensor.standardized);
            cj["loglik"] = fit.loglik;
            cj["converged"] = fit.converged;
            cj["iterations"] = fit.iterations;
            write_json(with_manifest(cj, m), out_path(fm_common.output_dir, "coefficients.json"));
            write_json(with_manifest(eval_report_to_json(rep), m),
                       out_path(fm_common.output_dir, "eval.json"));
            std::cout << eval_report_table(rep);
        } else if (*evaluate_cmd) {
            set_num_threads(ev_common.threads);
            const CandidateCatalog catalog = load_catalog(ev_catalog);
            const DesignTensor tensor = read_tensor_csv(ev_tensor, catalog);
            const json cj = read_json(ev_coeffs);
            const MnlCoefficients beta = coefficients_from_json(cj, catalog);
            int k = 0;
            for (int i = 0; i < catalog.n_alts(); ++i)
                k += static_cast<int>((beta.beta[i].array() != 0.0).count());
            EvalReport rep;
            if (ev_split > 0.0) {
                std::vector<int> rows = all_rows(tensor.n_obs);
                std::mt19937_64 rng(ev_common.seed);
                std::shuffle(rows.begin(), rows.end(), rng);
                const int cut = static_cast<int>(std::floor((1.0 - ev_split) * tensor.n_obs));
                std::vector<int> train(rows.begin(), rows.begin() + cut);
                std::vector<int> test(rows.begin() + cut, rows.end());
                std::sort(train.begin(), train.end());
                std::sort(test.begin(), test.end());
                rep = evaluate(beta, tensor, k, {}, train, test);
            } else {
                rep = evaluate(beta, tensor, k);
            }
            RunManifest m;
            m.subcommand = "evaluate";
            m.inputs = {{"tensor", ev_tensor}, {"catalog", ev_catalog}, {"coefficients", ev_coeffs}};
            m.seeds = {{"seed", ev_common.seed}};
            m.catalog_hash = catalog_hash(catalog);
            write_json(with_manifest(eval_report_to_json(rep), m),
                       out_path(ev_common.output_dir, "eval.json"));
            std::cout << eval_report_table(rep);
        } else if (*report) {
            std::vector<std::string> alts;
            const auto ranked = read_lambda_csv(rp_lambda, &alts);
            json rj;
            rj["alternatives"] = alts;
            json sel_json = json::object();
            for (size_t i = 0; i < ranked.size(); ++i) {
                json arr = json::array();
                for (const auto& g : ranked[i])
                    if (g.selected) arr.push_back(g.label);
                sel_json[alts[i]] = std::move(arr);
            }
            rj["selected"] = sel_json;
            if (!rp_truth.empty()) {
                if (rp_catalog.empty())
                    throw config_error("report: --truth requires --catalog to resolve labels");
                const CandidateCatalog catalog = load_catalog(rp_catalog);
                const TrueSpecification truth = TrueSpecification::load(rp_truth, catalog);
                Selection sel;
                sel.ranked.resize(catalog.n_alts());
                for (int i = 0; i < catalog.n_alts(); ++i) {
                    int src = -1;
                    for (size_t a = 0; a < alts.size(); ++a)
                        if (alts[a] == catalog.alternatives[i]) src = static_cast<int>(a);
                    if (src < 0)
                        throw data_error("report: lambda file lacks alternative '" +
                                         catalog.alternatives[i] + "'");
                    sel.ranked[i] = ranked[src];
                }
                const RecoveryReport rec = recovery(sel, truth, catalog);
                rj["recovery"] = recovery_to_json(rec);
                std::cout << (rec.all_exact ? "exact match\n" : "not exact\n");
                for (const auto& a : rec.per_alternative)
                    std::cout << a.alternative << ": precision " << a.precision << ", recall "
                              << a.recall << (a.exact ? " (exact)" : "") << "\n";
            }
            RunManifest m;
            m.subcommand = "report";
            m.inputs = {{"lambda", rp_lambda}};
            if (!rp_truth.empty()) m.inputs["truth"] = rp_truth;
            write_json(with_manifest(rj, m), out_path(rp_common.output_dir, "report.json"));
            // plot data: lambda bars (rank order) and optional ELBO trace copy
            const std::string bar = out_path(rp_common.output_dir, "lambda_bars.csv");
            std::ofstream bf(bar, std::ios::binary);
            bf << "alternative,rank,group,lambda\n";
            for (size_t i = 0; i < ranked.size(); ++i)
                for (const auto& g : ranked[i])
                    bf << csv_quote(alts[i]) << ',' << g.rank << ',' << csv_quote(g.label) << ','
                       << format_double(g.lambda) << '\n';
            if (!rp_trace.empty()) {
                std::ifstream src(rp_trace, std::ios::binary);
                if (!src) throw data_error("report: cannot open " + rp_trace);
                std::ofstream dst(out_path(rp_common.output_dir, "elbo_trace_plot.csv"),
                                  std::ios::binary);
                dst << src.rdbuf();
            }
        }
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const transform_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
