#pragma once

#include <stdexcept>
#include <string>

namespace polyspread {

/// Malformed instance files, bad shapes, out-of-range policy values.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A requested enumeration or series cannot meet its tail guarantee.
struct TruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An operation would exceed the per-measure atom budget.
struct AtomBudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace polyspread
