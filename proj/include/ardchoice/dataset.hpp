#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ardchoice {

/// Declares a categorical individual attribute: source column, admissible
/// codes (first = reference level), and an optional merge of codes into
/// coarser categories.
struct CategoricalAttribute {
    std::string column;
    std::vector<double> categories;
    std::map<double, std::string> merge;  // code -> merged label; empty = no merge
};

struct FilterRule {
    std::string column;
    std::vector<double> drop_values;
};

/// Column-role mapping for a wide-format choice table.
struct DatasetSchema {
    std::vector<std::string> alternatives;
    std::string choice_column;
    std::map<std::string, double> choice_codes;  // alternative -> code
    std::string id_column;                       // empty: row index is the id
    std::map<std::string, std::string> availability_columns;  // alt -> column
    // attribute -> (alternative -> column); alternatives without an entry
    // simply lack the attribute (e.g. no headway for car).
    std::map<std::string, std::map<std::string, std::string>> alt_attributes;
    std::map<std::string, CategoricalAttribute> indiv_attributes;
    std::vector<FilterRule> filters;
    bool drop_chosen_unavailable = true;
    bool drop_zero_anomalies = false;  // zero cost/time rows, off by default

    int alt_index(const std::string& name) const;
};

DatasetSchema load_schema(const std::string& path);
DatasetSchema parse_schema_json(const std::string& json_text);

/// Immutable validated choice data. Keeps the raw parsed cells of the
/// surviving rows so datasets round-trip losslessly.
struct ChoiceDataset {
    std::vector<std::string> alternatives;

    std::vector<std::string> header;
    std::vector<std::vector<std::string>> raw_rows;
    char delimiter = '\t';
    int choice_column_index = -1;
    std::vector<std::string> choice_code_text;  // per alternative, cell text for that code

    std::vector<long long> individual_id;  // per observation
    std::vector<int> choice;               // per observation, alternative index
    std::vector<uint8_t> availability;     // n*I row-major

    struct AltAttribute {
        std::string name;
        std::vector<uint8_t> present;  // per alternative
        Eigen::MatrixXd values;        // n x I, zero where absent
    };
    struct IndivAttribute {
        std::string name;
        std::vector<std::string> labels;  // category labels, [0] = reference
        std::vector<int> value;           // per observation, index into labels
    };
    std::vector<AltAttribute> alt_attrs;
    std::vector<IndivAttribute> indiv_attrs;

    int n() const { return static_cast<int>(choice.size()); }
    int n_alts() const { return static_cast<int>(alternatives.size()); }
    bool available(int row, int alt) const {
        return availability[static_cast<size_t>(row) * alternatives.size() + alt] != 0;
    }
    const AltAttribute* find_alt_attr(const std::string& name) const;
    const IndivAttribute* find_indiv_attr(const std::string& name) const;
    int alt_index(const std::string& name) const;
};

struct LoadStats {
    int rows_read = 0;
    int rows_dropped = 0;
    std::map<std::string, int> dropped_by_rule;
};

ChoiceDataset load_dataset(const std::string& path, const DatasetSchema& schema,
                           LoadStats* stats = nullptr);
ChoiceDataset parse_dataset_text(const std::string& text, const DatasetSchema& schema,
                                 LoadStats* stats = nullptr);

/// Observation-level split (default) or individual-grouped split.
/// Identical seed gives an identical partition.
std::pair<ChoiceDataset, ChoiceDataset> split_dataset(const ChoiceDataset& data, double fraction,
                                                      uint64_t seed, bool by_individual = false);

/// Row indices of the two halves of a split, in ascending order.
std::pair<std::vector<int>, std::vector<int>> split_rows(const ChoiceDataset& data,
                                                         double fraction, uint64_t seed,
                                                         bool by_individual = false);

void save_dataset(const ChoiceDataset& data, const std::string& path);

/// Copy of `data` with the choice column replaced (used by the simulator).
ChoiceDataset with_choices(const ChoiceDataset& data, const std::vector<int>& new_choice);

}  // namespace ardchoice
