#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pars {

/// Base for every error the library raises. `exit_code()` is the stable
/// process status the CLI maps the category to.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

class ShapeError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }
    int exit_code() const noexcept override { return 4; }

private:
    std::size_t line_;
};

class SchemaError : public Error {
public:
    SchemaError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }
    int exit_code() const noexcept override { return 5; }

private:
    std::size_t line_;
};

class ConfigError : public Error {
public:
    ConfigError(std::string key, std::size_t line, const std::string& what)
        : Error("config key '" + key + "'" + (line ? " (line " + std::to_string(line) + ")" : std::string())
                + ": " + what),
          key_(std::move(key)), reason_(what), line_(line) {}
    const std::string& key() const noexcept { return key_; }
    const std::string& reason() const noexcept { return reason_; }
    std::size_t line() const noexcept { return line_; }
    int exit_code() const noexcept override { return 6; }

private:
    std::string key_;
    std::string reason_;
    std::size_t line_;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 7; }
};

class DivergenceError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 8; }
};

class UnsupportedDimension : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 9; }
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 10; }
};

}  // namespace pars
