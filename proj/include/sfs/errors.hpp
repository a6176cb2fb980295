#ifndef SFS_ERRORS_HPP
#define SFS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sfs {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed config or data file (carries field/offset context in the message).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A structurally valid input violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Source and receiver coincide; the point-source kernel is singular.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Inconsistent vector/matrix dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Normal equations are singular (beta = 0 and rank-deficient Gram).
class IllConditionedError : public Error {
public:
    using Error::Error;
};

/// Non-finite values appeared during iteration.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, int iteration)
        : Error(msg), iteration(iteration) {}
    int iteration;
};

/// Frequency grid does not line up with DFT bins.
class GridError : public Error {
public:
    using Error::Error;
};

/// A metric's normalizer is zero, so the value is undefined.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace sfs

#endif  // SFS_ERRORS_HPP
