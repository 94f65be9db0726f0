#pragma once

#include <stdexcept>
#include <string>

namespace tcnn {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad shape, empty input, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A file could not be read, written or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tcnn
