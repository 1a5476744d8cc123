#pragma once

#include <stdexcept>
#include <string>

namespace salseg {

// Every failure mode in the library is a subclass of Error so the C API
// boundary can map them onto status codes in one place.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("shape: " + msg) {}
};
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error("validate: " + msg) {}
};
struct IndexError : Error {
    explicit IndexError(const std::string& msg) : Error("index: " + msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io: " + msg) {}
};
struct LabelError : Error {
    explicit LabelError(const std::string& msg) : Error("label: " + msg) {}
};
struct GradientError : Error {
    explicit GradientError(const std::string& msg) : Error("gradient: " + msg) {}
};
struct ZeroNormError : Error {
    explicit ZeroNormError(const std::string& msg) : Error("zero-norm: " + msg) {}
};
struct EmptyBranchError : Error {
    explicit EmptyBranchError(const std::string& msg) : Error("empty-branch: " + msg) {}
};
struct PartitionMismatchError : Error {
    explicit PartitionMismatchError(const std::string& msg) : Error("partition-mismatch: " + msg) {}
};
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& msg) : Error("divergence: " + msg) {}
};
struct TaxonomyError : Error {
    explicit TaxonomyError(const std::string& msg) : Error("taxonomy: " + msg) {}
};

}  // namespace salseg
