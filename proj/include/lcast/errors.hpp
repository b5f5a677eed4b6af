#ifndef LCAST_ERRORS_HPP
#define LCAST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lcast {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/extent mismatch between tensors or between tensors and a config.
struct DimError : Error {
    using Error::Error;
};

// Invalid or inconsistent configuration values (divisibility, ranges, unknown keys).
struct ConfigError : Error {
    using Error::Error;
};

// Ingestion problems: missing files, ragged rows, unparsable cells.
struct DataError : Error {
    using Error::Error;
};

// Out-of-range index into a tensor or series.
struct IndexError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    using Error::Error;
};

// API misuse: a precondition that is not about shapes or config values.
struct ContractError : Error {
    using Error::Error;
};

// Plan sampling could not find a feasible placement.
struct SamplingError : Error {
    using Error::Error;
};

// File I/O failures on outputs (checkpoints, reports, exports).
struct IoError : Error {
    using Error::Error;
};

} // namespace lcast

#endif
