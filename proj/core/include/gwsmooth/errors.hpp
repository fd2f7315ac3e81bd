#pragma once

#include <stdexcept>

namespace gwsmooth {

// Error categories map one-to-one onto the CLI exit codes:
// data 2, configuration 3, numerical 4.

class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace gwsmooth
