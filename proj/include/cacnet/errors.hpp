#pragma once

#include <stdexcept>
#include <string>

namespace cacnet {

// Error taxonomy shared by all modules. The CLI maps these onto process
// exit codes: config/usage -> 2, data/IO -> 3, leakage -> 4.

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raw volume byte length disagrees with its manifest, or the file is unreadable.
struct CorruptVolumeError : IoError {
    explicit CorruptVolumeError(const std::string& msg) : IoError(msg) {}
};

// Manifest JSON is missing fields or malformed.
struct ManifestError : IoError {
    explicit ManifestError(const std::string& msg) : IoError(msg) {}
};

// Forward cache and model disagree (wrong layer count, stale shapes).
struct StateError : std::runtime_error {
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// A patient id appears on both sides of a split or in two folds.
struct LeakageError : std::runtime_error {
    explicit LeakageError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf where finite values are required (gradients, activations).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cacnet
