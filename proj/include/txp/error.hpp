#pragma once

#include <stdexcept>
#include <string>

namespace txp {

// Process exit codes used by the CLI.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 1,
  kData = 2,
  kNumerical = 3,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::kConfig) {}
};

// Missing or malformed columns.
struct SchemaError : Error {
  explicit SchemaError(const std::string& what) : Error(what, ExitCode::kData) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(what, ExitCode::kData) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(what, ExitCode::kData) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(what, ExitCode::kData) {}
};

// A required precondition of a numerical routine was violated (e.g. a
// negative reward fed to the surrogate loss).
struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error(what, ExitCode::kData) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what)
      : Error(what, ExitCode::kNumerical) {}
};

}  // namespace txp
