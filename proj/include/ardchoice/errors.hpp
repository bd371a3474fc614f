#pragma once

#include <stdexcept>
#include <string>

namespace ardchoice {

// User-facing error categories; the CLI maps them to exit codes
// (config/data -> 2, numeric -> 3).

class config_error : public std::runtime_error {
  public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

class data_error : public std::runtime_error {
  public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

class transform_error : public std::runtime_error {
  public:
    explicit transform_error(const std::string& msg) : std::runtime_error(msg) {}
};

class numeric_error : public std::runtime_error {
  public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ardchoice
