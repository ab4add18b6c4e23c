#pragma once

#include <stdexcept>
#include <string>

namespace varlab {

// Error taxonomy. Every failure the CLI can surface maps to one of these;
// the type name becomes the "type" field of the error JSON on stderr.

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : Error {
    using Error::Error;
};

struct RangeError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct ChecksumError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct NonFiniteError : Error {
    using Error::Error;
};

struct MetricError : Error {
    using Error::Error;
};

}  // namespace varlab
