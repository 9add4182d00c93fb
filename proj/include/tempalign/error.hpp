#pragma once

#include <stdexcept>
#include <string>

namespace tempalign {

// Base for every error raised by the library. The CLI maps these to a
// non-zero exit with the message on stderr.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input file violates its JSON schema (missing key, wrong type, unknown id).
class SchemaError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// The bank or parameters cannot produce a scene of the requested shape.
class PlanningError : public Error {
public:
    using Error::Error;
};

class RenderError : public Error {
public:
    using Error::Error;
};

class MetricError : public Error {
public:
    using Error::Error;
};

// Transport or protocol failure talking to a text-generation backend.
class BackendError : public Error {
public:
    using Error::Error;
};

} // namespace tempalign
