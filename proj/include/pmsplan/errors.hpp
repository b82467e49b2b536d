#pragma once

#include <exception>
#include <stdexcept>
#include <string>

namespace pms {

// Base class for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration or usage (bad key, out-of-range parameter, unsupported
// operation for the given shapes). CLI exit code 2.
struct config_error : error {
    using error::error;
};

// Malformed or inconsistent input data (unknown node id, bad record row,
// mismatched grids). CLI exit code 2.
struct data_error : error {
    using error::error;
};

// Numerical failure during computation (degenerate weights, non-finite
// target). CLI exit code 3.
struct numeric_error : error {
    using error::error;
};

inline constexpr int exit_ok = 0;
inline constexpr int exit_input_error = 2;
inline constexpr int exit_numeric_error = 3;

} // namespace pms
