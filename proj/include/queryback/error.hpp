#pragma once

#include <stdexcept>
#include <string>

namespace queryback {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// A caller violated a documented precondition (empty input, size mismatch, bad range).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Input is structurally valid but mathematically unusable (e.g. a zero-norm embedding).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// A backend could not be reached, or kept failing after the retry budget was spent.
class BackendUnavailable : public Error {
public:
    using Error::Error;
};

/// A generation call produced an empty completion; the caller decides the policy.
class EmptyGeneration : public Error {
public:
    using Error::Error;
};

/// Detection could not produce a verdict (every reconstruction attempt failed,
/// or the embedding backend is down).
class DetectionInfeasible : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given inputs (e.g. AUC with single-class labels).
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

/// Configuration file or dataset file is malformed.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace queryback
