#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mbnn {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand extents disagree (matmul inner size, kernel larger than image, ...).
class DimensionError : public Error { using Error::Error; };

/// A scalar parameter is outside its admissible range.
class ParameterError : public Error { using Error::Error; };

/// Transform size not supported (FFT needs powers of two).
class SizeError : public Error { using Error::Error; };

/// Evaluation point outside a function's domain.
class DomainError : public Error { using Error::Error; };

/// Linear system cannot be solved as posed.
class SingularityError : public Error { using Error::Error; };

/// API contract violated by the caller (e.g. backward on a non-scalar node).
class ContractError : public Error { using Error::Error; };

/// Index out of range.
class IndexError : public Error { using Error::Error; };

/// Physical configuration is inconsistent (Nyquist, signal length, ...).
class ConfigError : public Error { using Error::Error; };

/// Problem too large for a dense method.
class CapacityError : public Error { using Error::Error; };

/// Network graph is malformed.
class StructureError : public Error { using Error::Error; };

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t step, const std::string& what)
        : Error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Malformed serialized input; `offset` is the byte position of the problem.
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& what)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Serialized state written by an incompatible format version.
class MigrationError : public Error { using Error::Error; };

/// Missing or unreadable file.
class FileError : public Error { using Error::Error; };

/// Bad command line or unknown experiment name.
class UsageError : public Error { using Error::Error; };

}  // namespace mbnn
