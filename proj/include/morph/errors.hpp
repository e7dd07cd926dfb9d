#pragma once

#include <stdexcept>
#include <string>

namespace morph {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidVolume : public Error {
public:
    using Error::Error;
};

class OpenShell : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class NoDescent : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    SchemaError(const std::string& column, const std::string& what)
        : Error(what), column_(column) {}
    const std::string& column() const { return column_; }

private:
    std::string column_;
};

class ValueError : public Error {
public:
    ValueError(long row, const std::string& what) : Error(what), row_(row) {}
    long row() const { return row_; }

private:
    long row_;
};

class EmptyTable : public Error {
public:
    using Error::Error;
};

class DegenerateSample : public Error {
public:
    using Error::Error;
};

class DegenerateBaseline : public Error {
public:
    using Error::Error;
};

class DegenerateColumn : public Error {
public:
    using Error::Error;
};

class DegenerateLabels : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public Error {
public:
    using Error::Error;
};

class NotNested : public Error {
public:
    using Error::Error;
};

class DesignError : public Error {
public:
    using Error::Error;
};

class MissingData : public Error {
public:
    using Error::Error;
};

} // namespace morph
