#include "ardchoice/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ardchoice/errors.hpp"
#include "ardchoice/transforms.hpp"

namespace ardchoice {

using json = nlohmann::json;

std::string transform_name(Transform t) {
    switch (t) {
        case Transform::intercept: return "intercept";
        case Transform::identity: return "identity";
        case Transform::log_: return "log";
        case Transform::boxcox: return "boxcox";
        case Transform::segment: return "segment";
        case Transform::noise: return "noise";
    }
    return "?";
}

int CandidateCatalog::total_columns() const {
    int t = 0;
    for (int i = 0; i < n_alts(); ++i) t += columns(i);
    return t;
}

int CandidateCatalog::total_groups() const {
    int t = 0;
    for (const auto& g : groups) t += static_cast<int>(g.size());
    return t;
}

const CandidateGroup* CandidateCatalog::find_group(int alt, const std::string& label) const {
    for (const auto& g : groups[alt])
        if (g.label == label) return &g;
    return nullptr;
}

int CandidateCatalog::group_index(int alt, const std::string& label) const {
    for (size_t k = 0; k < groups[alt].size(); ++k)
        if (groups[alt][k].label == label) return static_cast<int>(k);
    return -1;
}

std::string CandidateCatalog::column_label(int alt, int col) const {
    for (const auto& g : groups[alt])
        if (col >= g.col_begin && col < g.col_end) return g.column_labels[col - g.col_begin];
    return "?";
}

int DesignTensor::total_columns() const {
    int t = 0;
    for (const auto& m : values) t += static_cast<int>(m.cols());
    return t;
}

SpaceConfig parse_space_config_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw config_error(std::string("space config: invalid JSON: ") + e.what());
    }
    SpaceConfig cfg;
    try {
        if (j.contains("log_shift") && !j["log_shift"].is_null())
            cfg.log_shift = j["log_shift"].get<double>();
        if (j.contains("boxcox_shift") && !j["boxcox_shift"].is_null()) {
            if (j["boxcox_shift"].is_string()) {
                if (j["boxcox_shift"].get<std::string>() != "auto")
                    throw config_error("space config: boxcox_shift must be a number or \"auto\"");
                cfg.boxcox_shift_auto = true;
            } else {
                cfg.boxcox_shift = j["boxcox_shift"].get<double>();
                cfg.boxcox_shift_auto = false;
            }
        }
        if (j.contains("noise_seed")) cfg.noise_seed = j["noise_seed"].get<uint64_t>();
        for (const auto& spec : j.at("alternatives")) {
            AlternativeSpace a;
            const std::string name = spec.at("name").get<std::string>();
            if (spec.contains("intercept")) a.intercept = spec["intercept"].get<bool>();
            if (spec.contains("attributes"))
                a.attributes = spec["attributes"].get<std::vector<std::string>>();
            if (spec.contains("transforms"))
                a.transforms = spec["transforms"].get<std::vector<std::string>>();
            else
                a.transforms = {"identity"};
            if (spec.contains("interactions"))
                a.interactions = spec["interactions"].get<std::vector<std::string>>();
            if (spec.contains("segments")) {
                for (const auto& s : spec["segments"]) {
                    SegmentSpec seg;
                    seg.attribute = s.at("attribute").get<std::string>();
                    seg.k = s.at("k").get<int>();
                    if (s.contains("seed")) seg.seed = s["seed"].get<uint64_t>();
                    a.segments.push_back(seg);
                }
            }
            if (spec.contains("noise_pad_to")) a.noise_pad_to = spec["noise_pad_to"].get<int>();
            cfg.alternatives.emplace_back(name, std::move(a));
        }
    } catch (const config_error&) {
        throw;
    } catch (const json::exception& e) {
        throw config_error(std::string("space config: ") + e.what());
    }
    for (const auto& [name, a] : cfg.alternatives)
        for (const auto& t : a.transforms)
            if (t != "identity" && t != "log" && t != "boxcox")
                throw config_error("space config: unknown transform '" + t + "'");
    return cfg;
}

SpaceConfig load_space_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("space config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_space_config_json(ss.str());
}

namespace {

struct ColumnEval {
    Eigen::VectorXd value;        // n, zero where inactive
    std::vector<uint8_t> active;  // n
};

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// counter-based standard normal draw (Box-Muller over two splitmix64 words):
// value depends only on (stream, row), not on evaluation order
double noise_value(uint64_t stream, int row) {
    const uint64_t key = stream * 0x2545f4914f6cdd1dULL + static_cast<uint64_t>(row);
    const uint64_t a = splitmix64(key);
    const uint64_t b = splitmix64(key ^ 0x6a09e667f3bcc909ULL);
    const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Raw (unstandardized) values of one catalog column. Inactive rows are 0.
ColumnEval eval_column(const ChoiceDataset& data, int alt, const CandidateGroup& g, int k) {
    const int n = data.n();
    ColumnEval out;
    out.value = Eigen::VectorXd::Zero(n);
    out.active.assign(n, 0);

    const ChoiceDataset::IndivAttribute* inter = nullptr;
    if (!g.interaction.empty()) {
        inter = data.find_indiv_attr(g.interaction);
        if (!inter) throw config_error("catalog: unknown interaction attribute '" + g.interaction + "'");
    }

    const ChoiceDataset::AltAttribute* attr = nullptr;
    if (g.transform == Transform::identity || g.transform == Transform::log_ ||
        g.transform == Transform::boxcox || g.transform == Transform::segment) {
        attr = data.find_alt_attr(g.base_attribute);
        if (!attr) throw config_error("catalog: unknown attribute '" + g.base_attribute + "'");
    }

    for (int r = 0; r < n; ++r) {
        if (!data.available(r, alt)) continue;
        // interaction column k corresponds to category k+1 (reference = 0)
        if (inter && inter->value[r] != k + 1) continue;
        double h = 1.0;
        switch (g.transform) {
            case Transform::intercept:
                h = 1.0;
                break;
            case Transform::identity:
                h = attr->values(r, alt);
                break;
            case Transform::log_: {
                const double x = attr->values(r, alt) + g.shift;
                if (!(x > 0.0))
                    throw transform_error("log(" + g.base_attribute +
                                          "): non-positive value at row " + std::to_string(r) +
                                          " and no shift configured");
                h = std::log(x);
                break;
            }
            case Transform::boxcox: {
                const double x = attr->values(r, alt) + g.shift;
                if (!(x > 0.0))
                    throw transform_error("box(" + g.base_attribute +
                                          "): non-positive value at row " + std::to_string(r));
                h = boxcox_apply(x, g.boxcox_exponent);
                break;
            }
            case Transform::segment: {
                const double x = attr->values(r, alt);
                int best = 0;
                double bestd = std::numeric_limits<double>::infinity();
                for (size_t c = 0; c < g.segment_centers.size(); ++c) {
                    const double d = std::abs(x - g.segment_centers[c]);
                    if (d < bestd) {
                        bestd = d;
                        best = static_cast<int>(c);
                    }
                }
                const int seg = g.segment_drop_first ? k + 1 : k;
                if (best != seg) continue;
                h = 1.0;
                break;
            }
            case Transform::noise:
                h = noise_value(g.noise_stream, r);
                break;
        }
        if (!std::isfinite(h))
            throw transform_error("column " + g.column_labels[k] + ": non-finite value at row " +
                                  std::to_string(r));
        out.value[r] = h;
        out.active[r] = 1;
    }
    return out;
}

bool column_is_indicator(const CandidateGroup& g) {
    return g.transform == Transform::intercept || g.transform == Transform::segment;
}

std::vector<double> active_attribute_values(const ChoiceDataset& data, int alt,
                                            const std::string& attribute) {
    const auto* attr = data.find_alt_attr(attribute);
    if (!attr) throw config_error("catalog: unknown attribute '" + attribute + "'");
    if (!attr->present[alt])
        throw config_error("catalog: attribute '" + attribute + "' not defined for alternative '" +
                           data.alternatives[alt] + "'");
    std::vector<double> vals;
    for (int r = 0; r < data.n(); ++r)
        if (data.available(r, alt)) vals.push_back(attr->values(r, alt));
    return vals;
}

double auto_shift(const std::vector<double>& vals) {
    double minv = std::numeric_limits<double>::infinity();
    double minpos = std::numeric_limits<double>::infinity();
    for (double v : vals) {
        minv = std::min(minv, v);
        if (v > 0.0) minpos = std::min(minpos, v);
    }
    if (minv > 0.0) return 0.0;
    if (!std::isfinite(minpos)) throw transform_error("auto shift: no positive values in column");
    return -minv + 0.5 * minpos;
}

}  // namespace

CandidateCatalog build_catalog(const ChoiceDataset& data, const SpaceConfig& config) {
    CandidateCatalog cat;
    for (const auto& [name, spec] : config.alternatives) {
        (void)spec;
        if (data.alt_index(name) < 0)
            throw config_error("space config: unknown alternative '" + name + "'");
        cat.alternatives.push_back(name);
    }
    // every dataset alternative must be covered (an empty candidate list is
    // fine; the softmax still needs the alternative's availability)
    for (const auto& alt : data.alternatives) {
        bool found = false;
        for (const auto& [name, spec] : config.alternatives)
            if (name == alt) found = true;
        if (!found)
            throw config_error("space config: alternative '" + alt +
                               "' missing (list it, possibly with no candidates)");
    }
    cat.groups.resize(cat.alternatives.size());
    cat.scaling.resize(cat.alternatives.size());

    for (size_t ai = 0; ai < config.alternatives.size(); ++ai) {
        const auto& [alt_name, spec] = config.alternatives[ai];
        const int alt = data.alt_index(alt_name);
        auto& groups = cat.groups[ai];
        int col = 0;

        // interaction attribute sanity + dummy counts (reference category dropped)
        std::vector<std::pair<std::string, int>> inters;
        for (const auto& iname : spec.interactions) {
            const auto* a = data.find_indiv_attr(iname);
            if (!a) throw config_error("space config: unknown interaction attribute '" + iname + "'");
            const int kd = static_cast<int>(a->labels.size()) - 1;
            if (kd < 1)
                throw config_error("space config: interaction '" + iname +
                                   "' needs at least 2 categories");
            inters.emplace_back(iname, kd);
        }

        auto add_group = [&](CandidateGroup g, int n_cols) {
            g.col_begin = col;
            g.col_end = col + n_cols;
            col += n_cols;
            groups.push_back(std::move(g));
        };

        auto add_representation = [&](const std::string& base_label, Transform t,
                                      const std::string& attribute, double shift, double bc_exp) {
            CandidateGroup plain;
            plain.label = base_label;
            plain.base_attribute = attribute;
            plain.transform = t;
            plain.shift = shift;
            plain.boxcox_exponent = bc_exp;
            plain.column_labels = {base_label};
            add_group(plain, 1);
            for (const auto& [iname, kd] : inters) {
                CandidateGroup g;
                g.label = base_label + " x " + iname;
                g.base_attribute = attribute;
                g.transform = t;
                g.shift = shift;
                g.boxcox_exponent = bc_exp;
                g.interaction = iname;
                for (int k = 1; k <= kd; ++k)
                    g.column_labels.push_back(base_label + " x " + iname + std::to_string(k));
                add_group(g, kd);
            }
        };

        if (spec.intercept) add_representation("ASC", Transform::intercept, "", 0.0, 1.0);

        for (const auto& attr_name : spec.attributes) {
            for (const auto& tname : spec.transforms) {
                if (tname == "identity") {
                    add_representation(attr_name, Transform::identity, attr_name, 0.0, 1.0);
                } else if (tname == "log") {
                    auto vals = active_attribute_values(data, alt, attr_name);
                    double shift = 0.0;
                    if (config.log_shift) {
                        shift = *config.log_shift;
                    } else {
                        for (double v : vals)
                            if (!(v > 0.0))
                                throw transform_error(
                                    "log(" + attr_name + "): column has non-positive values and "
                                    "no log_shift is configured");
                    }
                    add_representation("log(" + attr_name + ")", Transform::log_, attr_name, shift,
                                       1.0);
                } else if (tname == "boxcox") {
                    auto vals = active_attribute_values(data, alt, attr_name);
                    double shift;
                    if (config.boxcox_shift_auto)
                        shift = auto_shift(vals);
                    else
                        shift = *config.boxcox_shift;
                    for (auto& v : vals) {
                        v += shift;
                        if (!(v > 0.0))
                            throw transform_error("box(" + attr_name +
                                                  "): non-positive values after shift");
                    }
                    const double exponent = fit_boxcox(vals);
                    add_representation("box(" + attr_name + ")", Transform::boxcox, attr_name,
                                       shift, exponent);
                }
            }
        }

        for (const auto& seg : spec.segments) {
            auto vals = active_attribute_values(data, alt, seg.attribute);
            auto centers = kmeans_centers(vals, seg.k, seg.seed);
            CandidateGroup g;
            g.label = "seg(" + seg.attribute + "," + std::to_string(seg.k) + ")";
            g.base_attribute = seg.attribute;
            g.transform = Transform::segment;
            g.segment_k = seg.k;
            g.segment_centers = centers;
            g.segment_drop_first = spec.intercept;
            const int n_cols = spec.intercept ? seg.k - 1 : seg.k;
            for (int k = 0; k < n_cols; ++k) {
                const int seg_idx = g.segment_drop_first ? k + 1 : k;
                g.column_labels.push_back(g.label + "[" + std::to_string(seg_idx) + "]");
            }
            add_group(g, n_cols);
        }

        if (spec.noise_pad_to > col) {
            int j = 0;
            while (col < spec.noise_pad_to) {
                CandidateGroup g;
                g.label = "noise" + std::to_string(j);
                g.transform = Transform::noise;
                g.noise_stream = config.noise_seed * 1000003ULL +
                                 static_cast<uint64_t>(ai) * 4093ULL + static_cast<uint64_t>(j);
                g.column_labels = {g.label};
                add_group(g, 1);
                ++j;
            }
        }

        // scaling statistics over active rows
        cat.scaling[ai].resize(col);
        for (const auto& g : groups) {
            for (int k = 0; k < g.n_cols(); ++k) {
                ColumnScale sc;
                if (!column_is_indicator(g)) {
                    auto ev = eval_column(data, alt, g, k);
                    double sum = 0.0, sumsq = 0.0;
                    long long cnt = 0;
                    for (int r = 0; r < data.n(); ++r) {
                        if (!ev.active[r]) continue;
                        sum += ev.value[r];
                        sumsq += ev.value[r] * ev.value[r];
                        ++cnt;
                    }
                    if (cnt > 1) {
                        const double mean = sum / static_cast<double>(cnt);
                        const double var =
                            std::max(0.0, sumsq / static_cast<double>(cnt) - mean * mean);
                        if (var > 1e-12) {
                            sc.mean = mean;
                            sc.sd = std::sqrt(var);
                            sc.standardized = true;
                        }
                    }
                }
                cat.scaling[ai][g.col_begin + k] = sc;
            }
        }
    }
    return cat;
}

Standardize standardize_from_string(const std::string& s) {
    if (s == "none") return Standardize::none;
    if (s == "scale") return Standardize::scale;
    if (s == "zscore") return Standardize::zscore;
    throw config_error("standardize: expected none|scale|zscore, got '" + s + "'");
}

std::string standardize_to_string(Standardize s) {
    switch (s) {
        case Standardize::none: return "none";
        case Standardize::scale: return "scale";
        case Standardize::zscore: return "zscore";
    }
    return "?";
}

DesignTensor materialize(const ChoiceDataset& data, const CandidateCatalog& catalog,
                         Standardize standardize) {
    DesignTensor t;
    t.alternatives = catalog.alternatives;
    t.n_obs = data.n();
    t.standardized = standardize;
    const int I = t.n_alts();

    // availability/choice remapped to the catalog's alternative order
    std::vector<int> alt_map(I);
    for (int i = 0; i < I; ++i) {
        alt_map[i] = data.alt_index(catalog.alternatives[i]);
        if (alt_map[i] < 0)
            throw data_error("materialize: dataset lacks alternative '" + catalog.alternatives[i] +
                             "'");
    }
    t.availability.resize(static_cast<size_t>(t.n_obs) * I);
    t.choice.resize(t.n_obs);
    for (int r = 0; r < t.n_obs; ++r) {
        int chosen = -1;
        for (int i = 0; i < I; ++i) {
            t.availability[static_cast<size_t>(r) * I + i] = data.available(r, alt_map[i]) ? 1 : 0;
            if (data.choice[r] == alt_map[i]) chosen = i;
        }
        if (chosen < 0)
            throw data_error("materialize: row " + std::to_string(r) +
                             " chose an alternative outside the catalog");
        t.choice[r] = chosen;
    }

    t.values.resize(I);
    for (int i = 0; i < I; ++i) {
        const int D = catalog.columns(i);
        t.values[i].setZero(t.n_obs, D);
        for (const auto& g : catalog.groups[i]) {
            for (int k = 0; k < g.n_cols(); ++k) {
                auto ev = eval_column(data, alt_map[i], g, k);
                const int c = g.col_begin + k;
                const auto& sc = catalog.scaling[i][c];
                const bool apply = standardize != Standardize::none && sc.standardized;
                const double shift = (apply && standardize == Standardize::zscore) ? sc.mean : 0.0;
                const double denom = apply ? sc.sd : 1.0;
                for (int r = 0; r < t.n_obs; ++r)
                    if (ev.active[r]) t.values[i](r, c) = (ev.value[r] - shift) / denom;
            }
        }
    }
    return t;
}

}  // namespace ardchoice
