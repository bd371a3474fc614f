#include "ardchoice/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ardchoice/errors.hpp"

namespace ardchoice {

using json = nlohmann::json;

int DatasetSchema::alt_index(const std::string& name) const {
    for (size_t i = 0; i < alternatives.size(); ++i)
        if (alternatives[i] == name) return static_cast<int>(i);
    return -1;
}

int ChoiceDataset::alt_index(const std::string& name) const {
    for (size_t i = 0; i < alternatives.size(); ++i)
        if (alternatives[i] == name) return static_cast<int>(i);
    return -1;
}

const ChoiceDataset::AltAttribute* ChoiceDataset::find_alt_attr(const std::string& name) const {
    for (const auto& a : alt_attrs)
        if (a.name == name) return &a;
    return nullptr;
}

const ChoiceDataset::IndivAttribute* ChoiceDataset::find_indiv_attr(const std::string& name) const {
    for (const auto& a : indiv_attrs)
        if (a.name == name) return &a;
    return nullptr;
}

DatasetSchema parse_schema_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw config_error(std::string("schema: invalid JSON: ") + e.what());
    }
    DatasetSchema s;
    try {
        s.alternatives = j.at("alternatives").get<std::vector<std::string>>();
        s.choice_column = j.at("choice_column").get<std::string>();
        for (auto& [alt, code] : j.at("choice_codes").items())
            s.choice_codes[alt] = code.get<double>();
        if (j.contains("id_column")) s.id_column = j["id_column"].get<std::string>();
        if (j.contains("availability_columns"))
            for (auto& [alt, col] : j["availability_columns"].items())
                s.availability_columns[alt] = col.get<std::string>();
        if (j.contains("alt_attributes"))
            for (auto& [name, cols] : j["alt_attributes"].items())
                for (auto& [alt, col] : cols.items())
                    s.alt_attributes[name][alt] = col.get<std::string>();
        if (j.contains("indiv_attributes")) {
            for (auto& [name, spec] : j["indiv_attributes"].items()) {
                CategoricalAttribute a;
                a.column = spec.at("column").get<std::string>();
                a.categories = spec.at("categories").get<std::vector<double>>();
                if (spec.contains("merge"))
                    for (auto& [code, label] : spec["merge"].items())
                        a.merge[std::stod(code)] = label.get<std::string>();
                s.indiv_attributes[name] = a;
            }
        }
        if (j.contains("filters")) {
            for (const auto& f : j["filters"]) {
                FilterRule r;
                r.column = f.at("column").get<std::string>();
                r.drop_values = f.at("drop_values").get<std::vector<double>>();
                s.filters.push_back(r);
            }
        }
        if (j.contains("drop_chosen_unavailable"))
            s.drop_chosen_unavailable = j["drop_chosen_unavailable"].get<bool>();
        if (j.contains("drop_zero_anomalies"))
            s.drop_zero_anomalies = j["drop_zero_anomalies"].get<bool>();
    } catch (const json::exception& e) {
        throw config_error(std::string("schema: ") + e.what());
    }
    if (s.alternatives.size() < 2) throw config_error("schema: need at least 2 alternatives");
    for (const auto& alt : s.alternatives)
        if (!s.choice_codes.count(alt))
            throw config_error("schema: no choice code for alternative '" + alt + "'");
    // merge maps must be total on declared categories
    for (const auto& [name, a] : s.indiv_attributes) {
        if (a.merge.empty()) continue;
        for (double c : a.categories)
            if (!a.merge.count(c))
                throw config_error("schema: merge map for '" + name + "' misses category " +
                                   std::to_string(c));
    }
    return s;
}

DatasetSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("schema: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_schema_json(ss.str());
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    auto [ptr, ec] = std::from_chars(b, e, out);
    if (ec != std::errc()) return false;
    while (ptr < e && (*ptr == ' ' || *ptr == '\t')) ++ptr;
    return ptr == e && std::isfinite(out);
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

int require_column(const std::vector<std::string>& header, const std::string& name) {
    int idx = find_column(header, name);
    if (idx < 0) throw data_error("dataset: missing column '" + name + "'");
    return idx;
}

std::string format_code(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

ChoiceDataset parse_dataset_text(const std::string& text, const DatasetSchema& schema,
                                 LoadStats* stats) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.empty())
        throw data_error("dataset: empty file (no header, N = 0)");
    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';

    ChoiceDataset d;
    d.delimiter = delim;
    d.header = split_line(line, delim);
    d.alternatives = schema.alternatives;
    const int n_alts = d.n_alts();

    const int choice_idx = require_column(d.header, schema.choice_column);
    d.choice_column_index = choice_idx;
    const int id_idx = schema.id_column.empty() ? -1 : require_column(d.header, schema.id_column);

    std::vector<int> avail_idx(n_alts, -1);
    for (int i = 0; i < n_alts; ++i) {
        auto it = schema.availability_columns.find(d.alternatives[i]);
        if (it != schema.availability_columns.end())
            avail_idx[i] = require_column(d.header, it->second);
    }

    std::vector<double> choice_code(n_alts);
    for (int i = 0; i < n_alts; ++i) {
        choice_code[i] = schema.choice_codes.at(d.alternatives[i]);
        d.choice_code_text.push_back(format_code(choice_code[i]));
    }

    struct AltAttrCols {
        std::string name;
        std::vector<int> col;  // per alternative, -1 if absent
    };
    std::vector<AltAttrCols> aac;
    for (const auto& [name, cols] : schema.alt_attributes) {
        AltAttrCols c;
        c.name = name;
        c.col.assign(n_alts, -1);
        for (const auto& [alt, colname] : cols) {
            int ai = schema.alt_index(alt);
            if (ai < 0) throw config_error("schema: attribute '" + name + "' references unknown alternative '" + alt + "'");
            c.col[ai] = require_column(d.header, colname);
        }
        aac.push_back(std::move(c));
    }

    struct IndivCols {
        std::string name;
        int col;
        const CategoricalAttribute* spec;
        std::vector<std::string> labels;
        std::map<double, int> code_to_index;
    };
    std::vector<IndivCols> iac;
    for (const auto& [name, spec] : schema.indiv_attributes) {
        IndivCols c;
        c.name = name;
        c.col = require_column(d.header, spec.column);
        c.spec = &spec;
        if (spec.merge.empty()) {
            for (double code : spec.categories) {
                c.code_to_index[code] = static_cast<int>(c.labels.size());
                c.labels.push_back(format_code(code));
            }
        } else {
            for (double code : spec.categories) {
                const std::string& lab = spec.merge.at(code);
                int idx = -1;
                for (size_t k = 0; k < c.labels.size(); ++k)
                    if (c.labels[k] == lab) idx = static_cast<int>(k);
                if (idx < 0) {
                    idx = static_cast<int>(c.labels.size());
                    c.labels.push_back(lab);
                }
                c.code_to_index[code] = idx;
            }
        }
        iac.push_back(std::move(c));
    }

    std::vector<int> filter_idx;
    for (const auto& f : schema.filters) filter_idx.push_back(require_column(d.header, f.column));

    LoadStats local;
    auto drop = [&](const std::string& rule) {
        ++local.rows_dropped;
        ++local.dropped_by_rule[rule];
    };

    std::vector<uint8_t> row_avail(n_alts);
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_line(line, delim);
        if (cells.size() != d.header.size())
            throw data_error("dataset: row " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " fields, expected " +
                             std::to_string(d.header.size()));
        ++local.rows_read;

        bool dropped = false;
        for (size_t f = 0; f < schema.filters.size(); ++f) {
            double v;
            if (!parse_double(cells[filter_idx[f]], v)) {
                drop("missing:" + schema.filters[f].column);
                dropped = true;
                break;
            }
            for (double dv : schema.filters[f].drop_values)
                if (v == dv) {
                    drop("filter:" + schema.filters[f].column);
                    dropped = true;
                    break;
                }
            if (dropped) break;
        }
        if (dropped) continue;

        double cv;
        if (!parse_double(cells[choice_idx], cv)) {
            drop("missing:" + schema.choice_column);
            continue;
        }
        int chosen = -1;
        for (int i = 0; i < n_alts; ++i)
            if (cv == choice_code[i]) chosen = i;
        if (chosen < 0) {
            drop("unknown_choice");
            continue;
        }

        for (int i = 0; i < n_alts; ++i) {
            if (avail_idx[i] < 0) {
                row_avail[i] = 1;
                continue;
            }
            double av;
            if (!parse_double(cells[avail_idx[i]], av)) {
                drop("missing:availability");
                dropped = true;
                break;
            }
            row_avail[i] = av != 0.0 ? 1 : 0;
        }
        if (dropped) continue;
        if (std::none_of(row_avail.begin(), row_avail.end(), [](uint8_t a) { return a != 0; })) {
            drop("empty_choice_set");
            continue;
        }
        if (!row_avail[chosen]) {
            if (schema.drop_chosen_unavailable) {
                drop("chosen_unavailable");
                continue;
            }
            throw data_error("dataset: row " + std::to_string(line_no) +
                             ": chosen alternative is unavailable");
        }

        std::vector<double> alt_vals(aac.size() * n_alts, 0.0);
        for (size_t a = 0; a < aac.size() && !dropped; ++a) {
            for (int i = 0; i < n_alts; ++i) {
                if (aac[a].col[i] < 0) continue;
                double v;
                if (!parse_double(cells[aac[a].col[i]], v)) {
                    drop("missing:" + aac[a].name);
                    dropped = true;
                    break;
                }
                alt_vals[a * n_alts + i] = v;
            }
        }
        if (dropped) continue;

        if (schema.drop_zero_anomalies) {
            for (size_t a = 0; a < aac.size() && !dropped; ++a)
                for (int i = 0; i < n_alts; ++i)
                    if (row_avail[i] && aac[a].col[i] >= 0 && alt_vals[a * n_alts + i] == 0.0) {
                        drop("zero_anomaly:" + aac[a].name);
                        dropped = true;
                        break;
                    }
            if (dropped) continue;
        }

        std::vector<int> ind_vals(iac.size());
        for (size_t a = 0; a < iac.size() && !dropped; ++a) {
            double v;
            if (!parse_double(cells[iac[a].col], v)) {
                drop("missing:" + iac[a].name);
                dropped = true;
                break;
            }
            auto it = iac[a].code_to_index.find(v);
            if (it == iac[a].code_to_index.end()) {
                drop("unknown_category:" + iac[a].name);
                dropped = true;
                break;
            }
            ind_vals[a] = it->second;
        }
        if (dropped) continue;

        long long id = local.rows_read;  // fallback: running row number
        if (id_idx >= 0) {
            double v;
            if (!parse_double(cells[id_idx], v)) {
                drop("missing:" + schema.id_column);
                continue;
            }
            id = static_cast<long long>(v);
        }

        // row accepted
        d.raw_rows.push_back(std::move(cells));
        d.individual_id.push_back(id);
        d.choice.push_back(chosen);
        d.availability.insert(d.availability.end(), row_avail.begin(), row_avail.end());
        if (d.alt_attrs.empty() && !aac.empty()) {
            for (const auto& a : aac) {
                ChoiceDataset::AltAttribute attr;
                attr.name = a.name;
                attr.present.assign(n_alts, 0);
                for (int i = 0; i < n_alts; ++i) attr.present[i] = a.col[i] >= 0 ? 1 : 0;
                d.alt_attrs.push_back(std::move(attr));
            }
        }
        if (d.indiv_attrs.empty() && !iac.empty()) {
            for (const auto& a : iac) {
                ChoiceDataset::IndivAttribute attr;
                attr.name = a.name;
                attr.labels = a.labels;
                d.indiv_attrs.push_back(std::move(attr));
            }
        }
        for (size_t a = 0; a < iac.size(); ++a) d.indiv_attrs[a].value.push_back(ind_vals[a]);
        // alt values buffered row-wise; matrices resized afterwards
        for (size_t a = 0; a < aac.size(); ++a) {
            auto& m = d.alt_attrs[a].values;
            const int row = d.n() - 1;
            if (m.rows() <= row) m.conservativeResize(std::max<int>(256, row * 2 + 1), n_alts);
            for (int i = 0; i < n_alts; ++i) m(row, i) = alt_vals[a * n_alts + i];
        }
    }

    for (auto& a : d.alt_attrs) a.values.conservativeResize(d.n(), n_alts);

    if (stats) *stats = local;
    if (d.n() == 0)
        throw data_error("dataset: no observations survive filtering (read " +
                         std::to_string(local.rows_read) + ", dropped " +
                         std::to_string(local.rows_dropped) + ")");
    return d;
}

ChoiceDataset load_dataset(const std::string& path, const DatasetSchema& schema,
                           LoadStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("dataset: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_dataset_text(ss.str(), schema, stats);
}

namespace {

ChoiceDataset subset(const ChoiceDataset& d, const std::vector<int>& rows) {
    ChoiceDataset out;
    out.alternatives = d.alternatives;
    out.header = d.header;
    out.delimiter = d.delimiter;
    out.choice_column_index = d.choice_column_index;
    out.choice_code_text = d.choice_code_text;
    const int I = d.n_alts();
    out.raw_rows.reserve(rows.size());
    for (int r : rows) {
        out.raw_rows.push_back(d.raw_rows[r]);
        out.individual_id.push_back(d.individual_id[r]);
        out.choice.push_back(d.choice[r]);
        for (int i = 0; i < I; ++i)
            out.availability.push_back(d.availability[static_cast<size_t>(r) * I + i]);
    }
    for (const auto& a : d.alt_attrs) {
        ChoiceDataset::AltAttribute attr;
        attr.name = a.name;
        attr.present = a.present;
        attr.values.resize(rows.size(), I);
        for (size_t k = 0; k < rows.size(); ++k) attr.values.row(k) = a.values.row(rows[k]);
        out.alt_attrs.push_back(std::move(attr));
    }
    for (const auto& a : d.indiv_attrs) {
        ChoiceDataset::IndivAttribute attr;
        attr.name = a.name;
        attr.labels = a.labels;
        attr.value.reserve(rows.size());
        for (int r : rows) attr.value.push_back(a.value[r]);
        out.indiv_attrs.push_back(std::move(attr));
    }
    return out;
}

}  // namespace

std::pair<std::vector<int>, std::vector<int>> split_rows(const ChoiceDataset& data,
                                                         double fraction, uint64_t seed,
                                                         bool by_individual) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw config_error("split: fraction must lie in (0,1), got " + std::to_string(fraction));
    const int n = data.n();
    const int target = static_cast<int>(std::floor(fraction * n));
    std::mt19937_64 rng(seed);
    std::vector<int> train, test;
    if (!by_individual) {
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        train.assign(idx.begin(), idx.begin() + target);
        test.assign(idx.begin() + target, idx.end());
    } else {
        std::vector<long long> ids;
        std::map<long long, std::vector<int>> by_id;
        for (int r = 0; r < n; ++r) {
            if (!by_id.count(data.individual_id[r])) ids.push_back(data.individual_id[r]);
            by_id[data.individual_id[r]].push_back(r);
        }
        std::shuffle(ids.begin(), ids.end(), rng);
        int count = 0;
        for (long long id : ids) {
            auto& rows = by_id[id];
            if (count < target) {
                train.insert(train.end(), rows.begin(), rows.end());
                count += static_cast<int>(rows.size());
            } else {
                test.insert(test.end(), rows.begin(), rows.end());
            }
        }
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

std::pair<ChoiceDataset, ChoiceDataset> split_dataset(const ChoiceDataset& data, double fraction,
                                                      uint64_t seed, bool by_individual) {
    auto [train, test] = split_rows(data, fraction, seed, by_individual);
    return {subset(data, train), subset(data, test)};
}

void save_dataset(const ChoiceDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("dataset: cannot write " + path);
    for (size_t c = 0; c < data.header.size(); ++c) {
        if (c) out << data.delimiter;
        out << data.header[c];
    }
    out << '\n';
    for (const auto& row : data.raw_rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) out << data.delimiter;
            out << row[c];
        }
        out << '\n';
    }
}

ChoiceDataset with_choices(const ChoiceDataset& data, const std::vector<int>& new_choice) {
    if (static_cast<int>(new_choice.size()) != data.n())
        throw data_error("with_choices: size mismatch");
    ChoiceDataset out = data;
    for (int r = 0; r < out.n(); ++r) {
        const int alt = new_choice[r];
        if (alt < 0 || alt >= out.n_alts() || !out.available(r, alt))
            throw data_error("with_choices: row " + std::to_string(r) +
                             ": choice outside the availability set");
        out.choice[r] = alt;
        out.raw_rows[r][out.choice_column_index] = out.choice_code_text[alt];
    }
    return out;
}

}  // namespace ardchoice
