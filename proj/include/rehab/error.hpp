#pragma once

#include <stdexcept>
#include <string>

namespace rehab {

// Error taxonomy. The CLI maps each family onto an exit code:
// usage -> 1, data/schema/parse/sizing/io -> 2, numerical -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& field, const std::string& what)
        : DataError("parse error in field '" + field + "': " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class SizingError : public DataError {
public:
    using DataError::DataError;
};

class PreprocessError : public DataError {
public:
    using DataError::DataError;
};

class IoError : public DataError {
public:
    using DataError::DataError;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace rehab
