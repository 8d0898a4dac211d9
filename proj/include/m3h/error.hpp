#pragma once

#include <stdexcept>
#include <string>

namespace m3h {

// Every failure raised by the library derives from Error so callers (the CLI in
// particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Index outside a valid range (e.g. a class label >= num_classes).
class IndexError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced somewhere it must not be.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Caller violated an API contract (wrong task kind, missing modality, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Problem too large for an exact algorithm.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Bad configuration or command line. Maps to exit code 2 in the CLI.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Rethrows the exception in flight with `prefix` prepended to its message,
// keeping its category. Call only from inside a catch block.
[[noreturn]] inline void rethrow_with_context(const std::string& prefix) {
  try {
    throw;
  } catch (const DimensionError& e) {
    throw DimensionError(prefix + e.what());
  } catch (const DomainError& e) {
    throw DomainError(prefix + e.what());
  } catch (const IndexError& e) {
    throw IndexError(prefix + e.what());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  } catch (const FormatError& e) {
    throw FormatError(prefix + e.what());
  } catch (const ContractError& e) {
    throw ContractError(prefix + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace m3h
