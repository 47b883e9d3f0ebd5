#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pmefb {

/// Malformed input: negative densities, mismatched grids, empty masks, bad configs.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The requested regime is outside what the estimates cover (e.g. sigma <= 0).
class UnsupportedRegime : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// NaN or infinity produced by a solver or by a drift/source evaluation.
class NumericalFailure : public std::runtime_error {
public:
  NumericalFailure(const std::string& what, double time, std::ptrdiff_t cell)
      : std::runtime_error(what), time_(time), cell_(cell) {}
  double time() const noexcept { return time_; }
  std::ptrdiff_t cell() const noexcept { return cell_; }

private:
  double time_;
  std::ptrdiff_t cell_;
};

/// The support came within the safety margin of the domain edge.
class MarginViolation : public std::runtime_error {
public:
  MarginViolation(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

private:
  double time_;
};

/// Scenario parse or validation failure; `key` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

}  // namespace pmefb
