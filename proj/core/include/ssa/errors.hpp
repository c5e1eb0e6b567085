#ifndef SSA_ERRORS_HPP_
#define SSA_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssa {

// Process exit codes used by the CLI; library errors carry the code they
// map to so the entry point stays a thin switch.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kNumerical = 4,
  kProtocol = 5,
};

class Error : public std::runtime_error {
 public:
  Error(std::string msg, ExitCode code)
      : std::runtime_error(std::move(msg)), code_(code) {}
  ExitCode exit_code() const { return code_; }

 private:
  ExitCode code_;
};

// Tensor shapes do not satisfy an operation's precondition.
struct DimensionError : Error {
  explicit DimensionError(std::string msg)
      : Error(std::move(msg), ExitCode::kData) {}
};

// Math domain violation (log of non-positive, sqrt of negative, ...).
struct DomainError : Error {
  explicit DomainError(std::string msg)
      : Error(std::move(msg), ExitCode::kNumerical) {}
};

// Zero-vector and similar degenerate numeric inputs.
struct DegenerateInputError : Error {
  explicit DegenerateInputError(std::string msg)
      : Error(std::move(msg), ExitCode::kNumerical) {}
};

// Caller broke an API contract (non-scalar loss, missing labels, ...).
struct ContractError : Error {
  explicit ContractError(std::string msg)
      : Error(std::move(msg), ExitCode::kConfig) {}
};

struct ConfigError : Error {
  explicit ConfigError(std::string msg)
      : Error(std::move(msg), ExitCode::kConfig) {}
};

// Malformed or truncated file; offset is the first bad byte.
struct FormatError : Error {
  FormatError(std::string msg, std::size_t byte_offset)
      : Error(msg + " (at byte " + std::to_string(byte_offset) + ")",
              ExitCode::kData),
        offset(byte_offset) {}
  std::size_t offset;
};

struct SamplingError : Error {
  explicit SamplingError(std::string msg)
      : Error(std::move(msg), ExitCode::kConfig) {}
};

struct BatchSizeError : Error {
  explicit BatchSizeError(std::string msg)
      : Error(std::move(msg), ExitCode::kConfig) {}
};

// NaN/divergence during training.
struct NumericalError : Error {
  explicit NumericalError(std::string msg)
      : Error(std::move(msg), ExitCode::kNumerical) {}
};

struct ProtocolError : Error {
  explicit ProtocolError(std::string msg)
      : Error(std::move(msg), ExitCode::kProtocol) {}
};

}  // namespace ssa

#endif  // SSA_ERRORS_HPP_
