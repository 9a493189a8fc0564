#pragma once

#include <stdexcept>
#include <string>

namespace fqr {

/// Invalid input: bad shapes, out-of-range parameters, malformed files.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// The numerics could not produce a usable answer (singular systems, too many
/// failed bootstrap replicates).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fqr
