#pragma once

#include <stdexcept>
#include <string>

namespace esrf {

// Base of every error raised by the library. Callers that only need to know
// "something numerical went wrong" catch this; the subclasses name the cause.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotPSD : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class SolveFailure : public Error {
public:
    using Error::Error;
};

class QuadratureUnderResolved : public Error {
public:
    using Error::Error;
};

class InvalidStep : public Error {
public:
    using Error::Error;
};

class UnknownModel : public Error {
public:
    using Error::Error;
};

class UnsupportedTestFunction : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DegenerateFit : public Error {
public:
    using Error::Error;
};

}  // namespace esrf
