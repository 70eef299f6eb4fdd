#pragma once

#include <stdexcept>
#include <string>

namespace contam {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error {
    using Error::Error;
};

// A line of an input file does not match the documented schema.
struct SchemaViolation : Error {
    SchemaViolation(const std::string& file, long line_no, const std::string& what_failed)
        : Error(file + ":" + std::to_string(line_no) + ": " + what_failed), line(line_no) {}
    long line;
};

struct DuplicateId : Error {
    explicit DuplicateId(const std::string& id) : Error("duplicate prompt id: " + id) {}
};

struct EmptySamples : Error {
    using Error::Error;
};

struct MissingCase : Error {
    explicit MissingCase(const std::string& prompt_id)
        : Error("no prompt case matches prompt_id: " + prompt_id) {}
};

struct NoScoredTokens : Error {
    using Error::Error;
};

struct PromptTooShort : Error {
    using Error::Error;
};

struct SingleClassInput : Error {
    using Error::Error;
};

struct EmptyInput : Error {
    using Error::Error;
};

struct NoPositives : Error {
    using Error::Error;
};

struct MissingInput : Error {
    MissingInput(const std::string& method, const std::string& input)
        : Error("method " + method + " requires missing input: " + input) {}
};

struct IncompleteGrid : Error {
    using Error::Error;
};

struct HttpError : Error {
    HttpError(int status_code, const std::string& detail)
        : Error("http status " + std::to_string(status_code) + ": " + detail), status(status_code) {}
    int status;
};

struct Timeout : Error {
    using Error::Error;
};

struct MalformedResponse : Error {
    using Error::Error;
};

struct UnsupportedEndpoint : Error {
    using Error::Error;
};

}  // namespace contam
