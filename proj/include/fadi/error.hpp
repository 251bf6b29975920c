#pragma once

#include <stdexcept>
#include <string>

namespace fadi {

// Exit codes used by the command-line driver.
enum class ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kData = 3,
    kNumeric = 4,
};

/// Malformed or inconsistent input: bad files, unknown names, shape mismatches.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad command-line usage or configuration.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fadi
