#pragma once

#include <stdexcept>
#include <string>

namespace aoimec {

// Precondition / argument violations.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed configuration text or values; the CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Anything that goes wrong while a simulation or learner is running.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CausalityError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class EmptyQueueError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class LivelockError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class IllegalActionError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class DivergenceError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class EnumerationCapError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

}  // namespace aoimec
