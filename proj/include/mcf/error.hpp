#pragma once

#include <stdexcept>
#include <string>

namespace mcf {

// Every error carries the name of the module that raised it so the CLI can
// report provenance ("[flow-engine] ...").
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(what), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

// Point outside a chart or parameter outside its mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Inputs that violate a stated precondition (orthonormality, grid match, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Non-finite values or undefined projections.
class NumericError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed snapshot or CSV input; offset is the byte position of the problem.
class FormatError : public Error {
public:
    FormatError(std::string module, const std::string& what, std::size_t offset)
        : Error(std::move(module), what + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Induced metric lost positive definiteness, or the update produced
// non-finite values.
class FlowBreakdown : public Error {
public:
    using Error::Error;
};

// Initial data outside the area-decreasing class.
class OutOfClassError : public Error {
public:
    using Error::Error;
};

} // namespace mcf
