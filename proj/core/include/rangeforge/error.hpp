#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rangeforge {

/// Base class for all rangeforge errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad inputs: configs, manifests, CLI arguments, contract violations at the
/// API boundary. The CLI maps these to exit code 1.
struct ValidationError : Error {
    using Error::Error;
};

/// Parse failure carrying file and 1-based line context.
struct ParseError : ValidationError {
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : ValidationError(source + ":" + std::to_string(line) + ": " + what),
          source(source),
          line(line) {}

    std::string source;
    std::size_t line;
};

}  // namespace rangeforge
