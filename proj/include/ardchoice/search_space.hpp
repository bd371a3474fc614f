#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ardchoice/dataset.hpp"

namespace ardchoice {

enum class Transform { intercept, identity, log_, boxcox, segment, noise };

std::string transform_name(Transform t);

/// One candidate variable: a base representation, optionally interacted with
/// a categorical attribute. All of its columns share one prior variance.
struct CandidateGroup {
    std::string label;
    std::string base_attribute;  // empty for intercept/noise
    Transform transform = Transform::identity;
    double shift = 0.0;             // added before log / box-cox
    double boxcox_exponent = 1.0;   // fitted
    int segment_k = 0;
    std::vector<double> segment_centers;  // ascending
    bool segment_drop_first = false;
    std::string interaction;  // individual attribute name, empty if none
    uint64_t noise_stream = 0;
    int col_begin = 0, col_end = 0;
    std::vector<std::string> column_labels;

    int n_cols() const { return col_end - col_begin; }
};

struct ColumnScale {
    double mean = 0.0;
    double sd = 1.0;
    bool standardized = false;  // false: column is exempt (intercept/indicator)
};

struct SegmentSpec {
    std::string attribute;
    int k = 0;
    uint64_t seed = 0;
};

struct AlternativeSpace {
    bool intercept = false;
    std::vector<std::string> attributes;
    std::vector<std::string> transforms;  // subset of {"identity","log","boxcox"}
    std::vector<std::string> interactions;
    std::vector<SegmentSpec> segments;
    int noise_pad_to = 0;  // pad candidate columns up to this count with N(0,1) noise
};

struct SpaceConfig {
    std::vector<std::pair<std::string, AlternativeSpace>> alternatives;  // ordered
    std::optional<double> log_shift;     // nullopt: error on non-positive values
    std::optional<double> boxcox_shift;  // nullopt: auto (half of min positive)
    bool boxcox_shift_auto = true;
    uint64_t noise_seed = 0;
};

SpaceConfig load_space_config(const std::string& path);
SpaceConfig parse_space_config_json(const std::string& json_text);

/// Column normalization applied at materialize time.
///  - none:   raw transformed values
///  - scale:  divide by the active-row standard deviation (span-preserving;
///            the default for ARD fits, keeps lambda comparable across
///            candidates without changing the representable model family)
///  - zscore: full standardization (mean 0, variance 1 over active rows)
enum class Standardize { none, scale, zscore };

Standardize standardize_from_string(const std::string& s);
std::string standardize_to_string(Standardize s);

struct CandidateCatalog {
    std::vector<std::string> alternatives;
    std::vector<std::vector<CandidateGroup>> groups;  // per alternative
    std::vector<std::vector<ColumnScale>> scaling;    // per alternative, per column

    int n_alts() const { return static_cast<int>(alternatives.size()); }
    int columns(int alt) const { return static_cast<int>(scaling[alt].size()); }
    int total_columns() const;
    int total_groups() const;
    const CandidateGroup* find_group(int alt, const std::string& label) const;
    int group_index(int alt, const std::string& label) const;
    std::string column_label(int alt, int col) const;
};

/// Enumerates candidate groups, fits transform parameters (Box-Cox exponents,
/// k-means centers) and records per-column scaling statistics. Deterministic:
/// identical (data, config) gives an identical catalog.
CandidateCatalog build_catalog(const ChoiceDataset& data, const SpaceConfig& config);

/// Dense expanded design values per observation, alternative and column.
struct DesignTensor {
    std::vector<std::string> alternatives;
    int n_obs = 0;
    std::vector<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> values;
    std::vector<uint8_t> availability;  // n*I row-major
    Eigen::VectorXi choice;
    Standardize standardized = Standardize::none;

    int n_alts() const { return static_cast<int>(alternatives.size()); }
    bool available(int row, int alt) const {
        return availability[static_cast<size_t>(row) * alternatives.size() + alt] != 0;
    }
    int columns(int alt) const { return static_cast<int>(values[alt].cols()); }
    int total_columns() const;
};

DesignTensor materialize(const ChoiceDataset& data, const CandidateCatalog& catalog,
                         Standardize standardize = Standardize::scale);

}  // namespace ardchoice
