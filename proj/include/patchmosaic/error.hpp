#pragma once

#include <stdexcept>
#include <string>

namespace patchmosaic {

/// Bad arguments or parameter combinations. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent data: corrupt files, digest mismatches,
/// degenerate corpora. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failures. Maps to CLI exit code 4.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace patchmosaic
