#include "ardchoice/serialize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ardchoice/errors.hpp"
#include "ardchoice/version.hpp"

namespace ardchoice {

using json = nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

json RunManifest::to_json() const {
    json j;
    j["subcommand"] = subcommand;
    j["inputs"] = inputs;
    j["seeds"] = seeds;
    if (!catalog_hash.empty()) j["catalog_hash"] = catalog_hash;
    j["tool_version"] = tool_version.empty() ? kVersion : tool_version;
    return j;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw data_error(path + ": invalid JSON: " + e.what());
    }
}

json catalog_to_json(const CandidateCatalog& catalog) {
    json j;
    j["alternatives"] = catalog.alternatives;
    json groups = json::object();
    json scaling = json::object();
    for (int i = 0; i < catalog.n_alts(); ++i) {
        json glist = json::array();
        for (const auto& g : catalog.groups[i]) {
            json gj;
            gj["label"] = g.label;
            gj["base"] = g.base_attribute;
            gj["transform"] = transform_name(g.transform);
            gj["shift"] = g.shift;
            gj["boxcox_exponent"] = g.boxcox_exponent;
            gj["segment_k"] = g.segment_k;
            gj["segment_centers"] = g.segment_centers;
            gj["segment_drop_first"] = g.segment_drop_first;
            gj["interaction"] = g.interaction;
            gj["noise_stream"] = g.noise_stream;
            gj["col_begin"] = g.col_begin;
            gj["col_end"] = g.col_end;
            gj["column_labels"] = g.column_labels;
            glist.push_back(std::move(gj));
        }
        groups[catalog.alternatives[i]] = std::move(glist);
        json slist = json::array();
        for (const auto& s : catalog.scaling[i])
            slist.push_back({{"mean", s.mean}, {"sd", s.sd}, {"standardized", s.standardized}});
        scaling[catalog.alternatives[i]] = std::move(slist);
    }
    j["groups"] = std::move(groups);
    j["scaling"] = std::move(scaling);
    return j;
}

CandidateCatalog catalog_from_json(const json& j) {
    CandidateCatalog cat;
    try {
        cat.alternatives = j.at("alternatives").get<std::vector<std::string>>();
        cat.groups.resize(cat.alternatives.size());
        cat.scaling.resize(cat.alternatives.size());
        for (size_t i = 0; i < cat.alternatives.size(); ++i) {
            for (const auto& gj : j.at("groups").at(cat.alternatives[i])) {
                CandidateGroup g;
                g.label = gj.at("label").get<std::string>();
                g.base_attribute = gj.at("base").get<std::string>();
                const std::string t = gj.at("transform").get<std::string>();
                if (t == "intercept") g.transform = Transform::intercept;
                else if (t == "identity") g.transform = Transform::identity;
                else if (t == "log") g.transform = Transform::log_;
                else if (t == "boxcox") g.transform = Transform::boxcox;
                else if (t == "segment") g.transform = Transform::segment;
                else if (t == "noise") g.transform = Transform::noise;
                else throw data_error("catalog: unknown transform '" + t + "'");
                g.shift = gj.at("shift").get<double>();
                g.boxcox_exponent = gj.at("boxcox_exponent").get<double>();
                g.segment_k = gj.at("segment_k").get<int>();
                g.segment_centers = gj.at("segment_centers").get<std::vector<double>>();
                g.segment_drop_first = gj.at("segment_drop_first").get<bool>();
                g.interaction = gj.at("interaction").get<std::string>();
                g.noise_stream = gj.at("noise_stream").get<uint64_t>();
                g.col_begin = gj.at("col_begin").get<int>();
                g.col_end = gj.at("col_end").get<int>();
                g.column_labels = gj.at("column_labels").get<std::vector<std::string>>();
                cat.groups[i].push_back(std::move(g));
            }
            for (const auto& sj : j.at("scaling").at(cat.alternatives[i])) {
                ColumnScale s;
                s.mean = sj.at("mean").get<double>();
                s.sd = sj.at("sd").get<double>();
                s.standardized = sj.at("standardized").get<bool>();
                cat.scaling[i].push_back(s);
            }
        }
    } catch (const json::exception& e) {
        throw data_error(std::string("catalog: ") + e.what());
    }
    return cat;
}

CandidateCatalog load_catalog(const std::string& path) {
    return catalog_from_json(read_json(path));
}

std::string catalog_hash(const CandidateCatalog& catalog) {
    return hex64(fnv1a64(catalog_to_json(catalog).dump()));
}

void write_tensor_csv(const DesignTensor& tensor, const CandidateCatalog& catalog,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    const int I = tensor.n_alts();
    out << "obs,choice";
    for (int i = 0; i < I; ++i) out << ",avail:" << tensor.alternatives[i];
    for (int i = 0; i < I; ++i)
        for (int c = 0; c < tensor.columns(i); ++c)
            out << ',' << csv_quote(tensor.alternatives[i] + "|" + catalog.column_label(i, c));
    out << '\n';
    for (int r = 0; r < tensor.n_obs; ++r) {
        out << r << ',' << tensor.choice[r];
        for (int i = 0; i < I; ++i) out << ',' << (tensor.available(r, i) ? 1 : 0);
        for (int i = 0; i < I; ++i)
            for (int c = 0; c < tensor.columns(i); ++c)
                out << ',' << format_double(tensor.values[i](r, c));
        out << '\n';
    }
    out << std::flush;
    if (!out) throw data_error("failed writing " + path);
}

DesignTensor read_tensor_csv(const std::string& path, const CandidateCatalog& catalog) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": empty tensor file");
    const auto header = csv_split(line);
    const int I = catalog.n_alts();
    size_t expected = 2 + static_cast<size_t>(I);
    for (int i = 0; i < I; ++i) expected += catalog.columns(i);
    if (header.size() != expected)
        throw data_error(path + ": tensor has " + std::to_string(header.size()) +
                         " columns, catalog expects " + std::to_string(expected));
    {
        size_t h = 2 + static_cast<size_t>(I);
        for (int i = 0; i < I; ++i)
            for (int c = 0; c < catalog.columns(i); ++c, ++h) {
                const std::string want = catalog.alternatives[i] + "|" + catalog.column_label(i, c);
                if (header[h] != want)
                    throw data_error(path + ": column '" + header[h] + "' does not match catalog '" +
                                     want + "'");
            }
    }

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = csv_split(line);
        if (cells.size() != expected)
            throw data_error(path + ": row " + std::to_string(rows.size() + 2) +
                             " has wrong field count");
        std::vector<double> vals(expected);
        for (size_t c = 0; c < expected; ++c) {
            const auto& s = cells[c];
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), vals[c]);
            if (ec != std::errc())
                throw data_error(path + ": unparseable number '" + s + "'");
        }
        rows.push_back(std::move(vals));
    }
    DesignTensor t;
    t.alternatives = catalog.alternatives;
    t.n_obs = static_cast<int>(rows.size());
    t.availability.resize(static_cast<size_t>(t.n_obs) * I);
    t.choice.resize(t.n_obs);
    t.values.resize(I);
    for (int i = 0; i < I; ++i) t.values[i].setZero(t.n_obs, catalog.columns(i));
    for (int r = 0; r < t.n_obs; ++r) {
        const auto& v = rows[r];
        t.choice[r] = static_cast<int>(v[1]);
        size_t c = 2;
        for (int i = 0; i < I; ++i, ++c)
            t.availability[static_cast<size_t>(r) * I + i] = v[c] != 0.0 ? 1 : 0;
        for (int i = 0; i < I; ++i)
            for (int k = 0; k < catalog.columns(i); ++k, ++c) t.values[i](r, k) = v[c];
    }
    return t;
}

void write_lambda_csv(const Selection& selection, const std::vector<std::string>& alternatives,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    out << "alternative,group,lambda,rank,selected\n";
    for (size_t i = 0; i < selection.ranked.size(); ++i)
        for (const auto& g : selection.ranked[i])
            out << csv_quote(alternatives[i]) << ',' << csv_quote(g.label) << ','
                << format_double(g.lambda) << ',' << g.rank << ',' << (g.selected ? 1 : 0) << '\n';
}

std::vector<std::vector<SelectedGroup>> read_lambda_csv(const std::string& path,
                                                        std::vector<std::string>* alts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || csv_split(line) != std::vector<std::string>{
            "alternative", "group", "lambda", "rank", "selected"})
        throw data_error(path + ": not a lambda report (bad header)");
    std::vector<std::vector<SelectedGroup>> out;
    std::vector<std::string> names;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = csv_split(line);
        if (cells.size() != 5)
            throw data_error(path + ": line " + std::to_string(line_no) + ": expected 5 fields");
        SelectedGroup g;
        size_t alt = names.size();
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == cells[0]) alt = i;
        if (alt == names.size()) {
            names.push_back(cells[0]);
            out.emplace_back();
        }
        try {
            g.label = cells[1];
            g.lambda = std::stod(cells[2]);
            g.rank = std::stoi(cells[3]);
            g.selected = std::stoi(cells[4]) != 0;
        } catch (const std::exception&) {
            throw data_error(path + ": line " + std::to_string(line_no) + ": malformed row");
        }
        out[alt].push_back(std::move(g));
    }
    if (alts) *alts = names;
    return out;
}

void write_trace_csv(const ElboTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    out << "iteration,elbo,smoothed\n";
    for (size_t i = 0; i < trace.sample.size(); ++i)
        out << (i + 1) << ',' << format_double(trace.sample[i]) << ','
            << format_double(trace.smoothed[i]) << '\n';
}

namespace {

json vectors_to_json(const std::vector<Eigen::VectorXd>& vs,
                     const std::vector<std::string>& names) {
    json j = json::object();
    for (size_t i = 0; i < vs.size(); ++i) {
        json arr = json::array();
        for (int c = 0; c < vs[i].size(); ++c) arr.push_back(vs[i][c]);
        j[names[i]] = std::move(arr);
    }
    return j;
}

std::vector<Eigen::VectorXd> vectors_from_json(const json& j,
                                               const std::vector<std::string>& names) {
    std::vector<Eigen::VectorXd> out(names.size());
    for (size_t i = 0; i < names.size(); ++i) {
        const auto vals = j.at(names[i]).get<std::vector<double>>();
        out[i] = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
    }
    return out;
}

}  // namespace

json state_to_json(const VariationalState& state, const CandidateCatalog& catalog,
                   const LambdaEstimate& lambda, const std::string& config_hash, bool converged) {
    json j;
    j["t"] = state.t;
    j["mu"] = vectors_to_json(state.mu, catalog.alternatives);
    j["c"] = vectors_to_json(state.c, catalog.alternatives);
    j["acc_mu"] = vectors_to_json(state.acc_mu, catalog.alternatives);
    j["acc_c"] = vectors_to_json(state.acc_c, catalog.alternatives);
    j["lambda"] = vectors_to_json(lambda.lambda, catalog.alternatives);
    std::ostringstream rng;
    rng << state.rng;
    j["rng_state"] = rng.str();
    j["n_obs"] = state.n_obs;
    j["config_hash"] = config_hash;
    j["converged"] = converged;
    return j;
}

VariationalState state_from_json(const json& j, const CandidateCatalog& catalog) {
    VariationalState s;
    try {
        s.t = j.at("t").get<long long>();
        s.mu = vectors_from_json(j.at("mu"), catalog.alternatives);
        s.c = vectors_from_json(j.at("c"), catalog.alternatives);
        s.acc_mu = vectors_from_json(j.at("acc_mu"), catalog.alternatives);
        s.acc_c = vectors_from_json(j.at("acc_c"), catalog.alternatives);
        std::istringstream rng(j.at("rng_state").get<std::string>());
        rng >> s.rng;
        s.n_obs = j.at("n_obs").get<long long>();
    } catch (const json::exception& e) {
        throw data_error(std::string("checkpoint: ") + e.what());
    }
    for (int i = 0; i < catalog.n_alts(); ++i)
        if (s.mu[i].size() != catalog.columns(i))
            throw data_error("checkpoint: state width does not match the catalog");
    return s;
}

json coefficients_to_json(const MnlCoefficients& beta, const CandidateCatalog& catalog,
                          Standardize standardized) {
    json j;
    j["standardized_design"] = standardize_to_string(standardized);
    json alts = json::object();
    for (int i = 0; i < catalog.n_alts(); ++i) {
        json list = json::array();
        for (const auto& g : catalog.groups[i]) {
            for (int k = 0; k < g.n_cols(); ++k) {
                const int c = g.col_begin + k;
                const double b = beta.beta[i][c];
                if (b == 0.0) continue;
                json e;
                e["group"] = g.label;
                e["k"] = k + 1;
                e["column"] = g.column_labels[k];
                e["value"] = b;
                const auto& sc = catalog.scaling[i][c];
                const bool scaled = standardized != Standardize::none && sc.standardized;
                e["raw_value"] = scaled ? b / sc.sd : b;
                list.push_back(std::move(e));
            }
        }
        alts[catalog.alternatives[i]] = std::move(list);
    }
    j["beta"] = std::move(alts);
    return j;
}

MnlCoefficients coefficients_from_json(const json& j, const CandidateCatalog& catalog) {
    MnlCoefficients beta;
    beta.beta.resize(catalog.n_alts());
    for (int i = 0; i < catalog.n_alts(); ++i)
        beta.beta[i] = Eigen::VectorXd::Zero(catalog.columns(i));
    try {
        for (int i = 0; i < catalog.n_alts(); ++i) {
            if (!j.at("beta").contains(catalog.alternatives[i])) continue;
            for (const auto& e : j.at("beta").at(catalog.alternatives[i])) {
                const std::string label = e.at("group").get<std::string>();
                const CandidateGroup* g = catalog.find_group(i, label);
                if (!g) throw data_error("coefficients: unknown group '" + label + "'");
                const int k = e.at("k").get<int>() - 1;
                if (k < 0 || k >= g->n_cols())
                    throw data_error("coefficients: k out of range for group '" + label + "'");
                beta.beta[i][g->col_begin + k] = e.at("value").get<double>();
            }
        }
    } catch (const json::exception& e) {
        throw data_error(std::string("coefficients: ") + e.what());
    }
    return beta;
}

namespace {

json set_metrics_json(const SetMetrics& m) {
    return {{"n", m.n},
            {"loglik", m.loglik},
            {"loglik_null", m.loglik_null},
            {"accuracy", m.accuracy}};
}

}  // namespace

json eval_report_to_json(const EvalReport& rep) {
    json j;
    j["full"] = set_metrics_json(rep.full);
    if (rep.train) j["train"] = set_metrics_json(*rep.train);
    if (rep.test) j["test"] = set_metrics_json(*rep.test);
    j["k_params"] = rep.k_params;
    j["aic"] = rep.aic;
    j["bic"] = rep.bic;
    j["pseudo_r2"] = rep.pseudo_r2;
    j["pseudo_r2_adj"] = rep.pseudo_r2_adj;
    return j;
}

std::string eval_report_table(const EvalReport& rep) {
    std::ostringstream os;
    os << std::fixed;
    auto line = [&](const std::string& name, double v, int prec = 3) {
        os << std::left << std::setw(16) << name << std::right << std::setw(12)
           << std::setprecision(prec) << v << '\n';
    };
    line("Log-like full", rep.full.loglik, 1);
    line("AIC", rep.aic, 1);
    line("BIC", rep.bic, 1);
    line("Pseudo-R2", rep.pseudo_r2, 3);
    line("Pseudo-R2 adj.", rep.pseudo_r2_adj, 3);
    if (rep.train) {
        line("Log-lik train", rep.train->loglik, 1);
        line("Train acc.", rep.train->accuracy, 3);
    }
    if (rep.test) {
        line("Log-lik test", rep.test->loglik, 1);
        line("Test acc.", rep.test->accuracy, 3);
    }
    os << std::left << std::setw(16) << "Parameters" << std::right << std::setw(12)
       << rep.k_params << '\n';
    os << std::left << std::setw(16) << "N" << std::right << std::setw(12) << rep.full.n << '\n';
    return os.str();
}

json recovery_to_json(const RecoveryReport& rep) {
    json j;
    j["all_exact"] = rep.all_exact;
    json alts = json::array();
    for (const auto& a : rep.per_alternative) {
        json e;
        e["alternative"] = a.alternative;
        e["truth"] = a.truth;
        e["selected"] = a.selected;
        e["exact"] = a.exact;
        e["precision"] = a.precision;
        e["recall"] = a.recall;
        alts.push_back(std::move(e));
    }
    j["per_alternative"] = std::move(alts);
    return j;
}

json training_config_to_json(const TrainingConfig& c) {
    json j;
    j["batch_size"] = c.batch_size;
    j["max_iter"] = c.max_iter;
    j["base_rate"] = c.base_rate;
    j["schedule"] = c.schedule;
    j["decay_t0"] = c.decay_t0;
    j["decay_hold"] = c.decay_hold;
    j["mc_samples"] = c.mc_samples;
    j["convergence_window"] = c.convergence_window;
    j["convergence_tol"] = c.convergence_tol;
    j["smoothing_alpha"] = c.smoothing_alpha;
    j["selection_tau"] = c.selection_tau;
    j["tau_relative"] = c.tau_relative;
    j["c_init"] = c.c_init;
    j["c_floor"] = c.c_floor;
    j["warm_start_intercepts"] = c.warm_start_intercepts;
    j["seed"] = c.seed;
    j["lambda_checkpoint_every"] = c.lambda_checkpoint_every;
    return j;
}

}  // namespace ardchoice
