#pragma once

#include <stdexcept>
#include <string>

namespace seamotion {

/// Argument outside the mathematical domain of an operation (bad shape,
/// negative scale, non-finite input).
class DomainError : public std::invalid_argument {
public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Inconsistent or infeasible configuration (dt too coarse, missing test run,
/// duplicate ids, window longer than the series).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A computation produced non-finite values or failed to converge.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Input data that cannot support the requested statistic (constant series,
/// flat accuracy window, empty dataset).
class DegenerateDataError : public std::runtime_error {
public:
  explicit DegenerateDataError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed, truncated or version-mismatched file.
class LoadError : public std::runtime_error {
public:
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace seamotion
