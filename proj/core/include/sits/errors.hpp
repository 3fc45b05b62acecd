#pragma once

#include <stdexcept>
#include <string>

namespace sits {

/// Malformed input data: unreadable files, schema violations, inconsistent
/// datasets, model/dataset mismatches.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric failure: non-finite values where finite ones are required,
/// failed gradient verification, degenerate optimisation state.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sits
