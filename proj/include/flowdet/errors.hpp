#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowdet {

// Contract violations: the caller handed us something structurally wrong.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParamError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Runtime failures: the math went somewhere it should not have.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedDensityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File/container problems carry the byte offset where parsing stopped.
struct FormatError : std::runtime_error {
    std::size_t offset;
    FormatError(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " (at byte offset " + std::to_string(off) + ")"), offset(off) {}
};

}  // namespace flowdet
