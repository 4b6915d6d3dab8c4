#pragma once

#include <stdexcept>
#include <string>

namespace introplan {

// Error taxonomy shared across the library. Every failure mode the public
// operations document maps onto one of these so callers can branch on type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A stated precondition was violated by the caller.
class PreconditionError : public Error {
public:
    using Error::Error;
};

// More plan texts than letter labels.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Structured text (model output, dataset line, artifact file) did not parse.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string raw = {})
        : Error(what), raw_text(std::move(raw)) {}
    std::string raw_text;
};

// Model output unusable for option generation even after a reprompt.
class GenerationFormatError : public ParseError {
public:
    using ParseError::ParseError;
};

// None of the requested labels appeared in the returned logprobs.
class DegenerateDistributionError : public Error {
public:
    using Error::Error;
};

// API credential missing or rejected; raised before any network call when
// the key cannot be resolved.
class CredentialError : public Error {
public:
    using Error::Error;
};

// Could not reach the endpoint at all (connect/read failure).
class TransportError : public Error {
public:
    explicit TransportError(const std::string& what, bool retryable_ = true)
        : Error(what), retryable(retryable_) {}
    bool retryable;
};

// Endpoint answered with a non-success status.
class ApiError : public Error {
public:
    ApiError(const std::string& what, int status_, bool retryable_)
        : Error(what), status(status_), retryable(retryable_) {}
    int status;
    bool retryable;
};

// Response arrived but its body does not match the wire contract.
class MalformedResponseError : public Error {
public:
    using Error::Error;
};

// Persistent file (dataset, knowledge base, artifact, cassette) violates its
// schema; `line` is 1-based when the format is line-delimited, 0 otherwise.
class SchemaError : public Error {
public:
    SchemaError(const std::string& what, std::size_t line_ = 0)
        : Error(what), line(line_) {}
    std::size_t line;
};

// No epsilon on the calibration grid meets the requested target.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

// Calibration artifact was produced under different prompt templates.
class VersionMismatchError : public Error {
public:
    using Error::Error;
};

// Knowledge-base build ended with zero usable entries.
class EmptyBuildError : public Error {
public:
    using Error::Error;
};

}  // namespace introplan
