#pragma once

#include <stdexcept>
#include <string>

namespace rerank {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct MagicMismatch : Error {
    explicit MagicMismatch(const std::string& msg) : Error(msg) {}
};
struct TruncatedFile : Error {
    explicit TruncatedFile(const std::string& msg) : Error(msg) {}
};
struct LabelCountMismatch : Error {
    explicit LabelCountMismatch(const std::string& msg) : Error(msg) {}
};
struct NonFiniteFeature : Error {
    explicit NonFiniteFeature(const std::string& msg) : Error(msg) {}
};
struct IoFailure : Error {
    explicit IoFailure(const std::string& msg) : Error(msg) {}
};
struct DegenerateSpec : Error {
    explicit DegenerateSpec(const std::string& msg) : Error(msg) {}
};
struct ZeroVector : Error {
    explicit ZeroVector(const std::string& msg) : Error(msg) {}
};
struct KOutOfRange : Error {
    explicit KOutOfRange(const std::string& msg) : Error(msg) {}
};
struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};
struct EmptyRow : Error {
    explicit EmptyRow(const std::string& msg) : Error(msg) {}
};
struct ZeroDenominator : Error {
    explicit ZeroDenominator(const std::string& msg) : Error(msg) {}
};
struct NoValidPositives : Error {
    explicit NoValidPositives(const std::string& msg) : Error(msg) {}
};

} // namespace rerank
