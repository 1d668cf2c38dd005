#pragma once

#include <stdexcept>
#include <string>

namespace critwave {

// Base of everything the library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MismatchedGrids : Error {
    MismatchedGrids() : Error("fields live on different grids") {}
};
struct GridTooCoarse : Error { using Error::Error; };
struct DivergentTail : Error { using Error::Error; };
struct SymmetryRangeError : Error { using Error::Error; };

struct NoNegativeEigenvalue : Error { using Error::Error; };
struct MethodsDisagree : Error { using Error::Error; };
struct NearSingular : Error { using Error::Error; };
struct ResolventFailure : Error { using Error::Error; };
struct NonPositiveEstimate : Error { using Error::Error; };

struct SeriesDomainViolation : Error { using Error::Error; };
struct NoiseFloor : Error { using Error::Error; };

struct NoRoot : Error { using Error::Error; };
struct Violated : Error { using Error::Error; };

struct IoError : Error { using Error::Error; };

// Configuration problems carry the offending line (0 when not from text).
struct ConfigError : Error {
    int line;
    ConfigError(const std::string& what, int line_no)
        : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + what : what),
          line(line_no) {}
};
struct UnknownKey : ConfigError { using ConfigError::ConfigError; };
struct OutOfRange : ConfigError { using ConfigError::ConfigError; };
struct MissingRequired : ConfigError { using ConfigError::ConfigError; };

} // namespace critwave
