#pragma once

#include <stdexcept>
#include <string>

namespace pfa {

// Error classes map onto CLI exit codes: 2 config, 3 data, 4 numerical.
class Error : public std::runtime_error {
 public:
  Error(std::string msg, int exit_code)
      : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::string msg) : Error(std::move(msg), 2) {}
};

class DataError : public Error {
 public:
  explicit DataError(std::string msg) : Error(std::move(msg), 3) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(std::string msg) : Error(std::move(msg), 4) {}
};

}  // namespace pfa
