#pragma once

#include <stdexcept>
#include <string>

namespace bridgegan {

// Shape or resolution disagreement between operands.
struct dimension_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf encountered where finite values are required.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse: a precondition the caller controls was violated.
struct contract_error : std::logic_error {
    using std::logic_error::logic_error;
};

// Rank-deficient or otherwise degenerate geometric configuration.
struct degeneracy_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Robust estimation could not find an acceptable model.
struct estimation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied input (too-small image, unreadable file contents).
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace bridgegan
