#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>

namespace tbundle {

// All recoverable failures are typed exceptions so callers (CLI, tests) can
// map them to exit codes without string matching.

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Parse failure; `offset` is the byte position in the source text.
struct SyntaxError : Error {
    std::size_t offset;
    SyntaxError(std::size_t off, const std::string& msg)
        : Error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

// Identifier that is neither a known function nor a coordinate x1..xn.
struct UnknownIdentifier : Error {
    std::size_t offset;
    std::string name;
    UnknownIdentifier(std::size_t off, const std::string& ident)
        : Error("unknown identifier '" + ident + "' (at byte " + std::to_string(off) + ")"),
          offset(off), name(ident) {}
};

// Evaluation outside the domain of a primitive (log of a non-positive value,
// sqrt of a negative one, division by zero).
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Metric matrix failed the Cholesky positivity test at a queried point.
struct NotPositiveDefinite : Error {
    explicit NotPositiveDefinite(const std::string& msg) : Error(msg) {}
};

struct BadParameter : Error {
    explicit BadParameter(const std::string& msg) : Error(msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

// Rescale function must stay strictly positive on the working box.
struct NonPositiveRescale : Error {
    explicit NonPositiveRescale(const std::string& msg) : Error(msg) {}
};

// Requested problem size exceeds a hard guard (kept small on purpose;
// everything is dense).
struct DimensionGuard : Error {
    explicit DimensionGuard(const std::string& msg) : Error(msg) {}
};

struct StepUnderflow : Error {
    explicit StepUnderflow(const std::string& msg) : Error(msg) {}
};

// Integration left the configured coordinate box.
struct ChartExit : Error {
    explicit ChartExit(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

} // namespace tbundle
