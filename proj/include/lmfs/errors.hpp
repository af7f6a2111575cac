#pragma once

#include <stdexcept>
#include <string>

namespace lmfs {

// Error taxonomy used across the library. Everything derives from
// std::runtime_error so callers can catch coarsely or precisely.

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset cannot supply the requested episode (too few classes or samples).
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Triplet selection cannot satisfy the requested counts.
struct SelectionError : std::runtime_error {
    explicit SelectionError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss; carries the offending update index.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& what, std::size_t update)
        : std::runtime_error(what), update_index(update) {}
    std::size_t update_index;
};

}  // namespace lmfs
