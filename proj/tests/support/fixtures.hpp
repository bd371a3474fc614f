#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "ardchoice/dataset.hpp"
#include "ardchoice/search_space.hpp"

#ifndef ARDCHOICE_REPO_DIR
#define ARDCHOICE_REPO_DIR "."
#endif

namespace fixtures {

inline std::string repo_path(const std::string& rel) {
    return (std::filesystem::path(ARDCHOICE_REPO_DIR) / rel).string();
}

/// Three-alternative toy table: 2 alt attributes (tt, co), one binary and
/// one 3-level individual attribute, availability on the third alternative.
inline std::string toy_table() {
    return "ID\tSEG\tFLAG\tA_TT\tB_TT\tC_TT\tA_CO\tB_CO\tC_CO\tC_AV\tCHOICE\n"
           "1\t1\t0\t10\t20\t30\t5\t4\t3\t1\t1\n"
           "1\t1\t0\t12\t18\t33\t5\t5\t2\t1\t2\n"
           "2\t2\t1\t14\t22\t28\t6\t3\t4\t0\t1\n"
           "2\t2\t1\t11\t25\t31\t4\t6\t3\t1\t3\n"
           "3\t3\t0\t13\t19\t29\t5\t4\t5\t1\t2\n"
           "3\t3\t1\t15\t21\t27\t7\t3\t2\t0\t2\n";
}

inline std::string toy_schema_json() {
    return R"({
      "alternatives": ["a", "b", "c"],
      "choice_column": "CHOICE",
      "choice_codes": {"a": 1, "b": 2, "c": 3},
      "id_column": "ID",
      "availability_columns": {"c": "C_AV"},
      "alt_attributes": {
        "tt": {"a": "A_TT", "b": "B_TT", "c": "C_TT"},
        "co": {"a": "A_CO", "b": "B_CO", "c": "C_CO"}
      },
      "indiv_attributes": {
        "seg": {"column": "SEG", "categories": [1, 2, 3]},
        "flag": {"column": "FLAG", "categories": [0, 1]}
      }
    })";
}

inline ardchoice::ChoiceDataset toy_dataset() {
    return ardchoice::parse_dataset_text(toy_table(),
                                         ardchoice::parse_schema_json(toy_schema_json()));
}

class TempFile {
  public:
    explicit TempFile(const std::string& contents, const std::string& suffix = ".tmp") {
        static int counter = 0;
        path_ = (std::filesystem::temp_directory_path() /
                 ("ardchoice_test_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++) + suffix))
                    .string();
        std::ofstream out(path_, std::ios::binary);
        out << contents;
    }
    ~TempFile() { std::remove(path_.c_str()); }
    const std::string& path() const { return path_; }

  private:
    std::string path_;
};

}  // namespace fixtures
