#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tecfap {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad argument or configuration supplied by the caller (CLI exit code 1).
class UsageError : public Error {
public:
    using Error::Error;
};

// Input data could not be parsed or is inconsistent (CLI exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    using DataError::DataError;
};

struct Violation {
    std::string entry_id;
    std::string invariant;
    std::string detail;

    friend bool operator==(const Violation&, const Violation&) = default;
};

class SchemaError : public DataError {
public:
    explicit SchemaError(std::vector<Violation> violations)
        : DataError(describe(violations)), violations_(std::move(violations)) {}

    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    static std::string describe(const std::vector<Violation>& vs) {
        std::string msg = "schema violation";
        if (!vs.empty()) {
            msg += " in entry '" + vs.front().entry_id + "': " + vs.front().invariant;
            if (!vs.front().detail.empty()) msg += " (" + vs.front().detail + ")";
            if (vs.size() > 1) msg += " and " + std::to_string(vs.size() - 1) + " more";
        }
        return msg;
    }

    std::vector<Violation> violations_;
};

class NotFoundError : public DataError {
public:
    using DataError::DataError;
};

// Not enough material (shots, patterns, pairs) to satisfy a sampling request.
class InsufficientPoolError : public DataError {
public:
    using DataError::DataError;
};

// Anything that goes wrong while talking to a model (CLI exit code 3).
class BackendError : public Error {
public:
    using Error::Error;
};

class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};

class MalformedReplyError : public BackendError {
public:
    using BackendError::BackendError;
};

class TokenBudgetError : public BackendError {
public:
    using BackendError::BackendError;
};

class UnsupportedError : public BackendError {
public:
    using BackendError::BackendError;
};

}  // namespace tecfap
