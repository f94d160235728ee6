#pragma once

#include <stdexcept>
#include <string>

namespace microseg {

// Error classes map 1:1 onto CLI exit codes.
enum class ErrorClass { io = 1, config = 2, schema = 3, numeric = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    ErrorClass error_class() const { return cls_; }
    int exit_code() const { return static_cast<int>(cls_); }

private:
    ErrorClass cls_;
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorClass::io, what) {}
};

// Bad configuration, bad dimensions, bad arguments.
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorClass::config, what) {}
};

// Malformed or inconsistent file contents.
struct SchemaError : Error {
    explicit SchemaError(const std::string& what) : Error(ErrorClass::schema, what) {}
};

// Non-finite values, divergence, degenerate statistics.
struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorClass::numeric, what) {}
};

}  // namespace microseg
