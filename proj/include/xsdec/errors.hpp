#pragma once

#include <stdexcept>
#include <string>

namespace xsdec {

// Bad values handed to a pure evaluation (NaN inputs, empty dataset, shape mismatch).
struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid run configuration (ladder arguments, schedule, grid, paths).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file; message carries the offending line number.
struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A replica has no recorded samples where the estimator needs them.
struct insufficient_samples : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input is formally valid but carries no information (zero-variance series,
// all-infinite free energies).
struct degenerate_input : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace xsdec
