#pragma once

#include <stdexcept>
#include <string>

namespace lmpm {

// Base error carrying a short machine-readable kind next to the message.
// The CLI prints these as one-line JSON records on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("shape", msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

struct InputError : Error {
    explicit InputError(const std::string& msg) : Error("input", msg) {}
};

struct IndexError : Error {
    explicit IndexError(const std::string& msg) : Error("index", msg) {}
};

struct CapacityError : Error {
    explicit CapacityError(const std::string& msg) : Error("capacity", msg) {}
};

// Tree validation failures; `detail` distinguishes dangling ids, cycles,
// multiple parents, duplicate definitions and missing hypothesis steps.
struct ValidationError : Error {
    ValidationError(std::string detail, const std::string& msg)
        : Error("validation." + detail, msg) {}
};

struct IntegrityError : Error {
    explicit IntegrityError(const std::string& msg) : Error("integrity", msg) {}
};

struct CompatibilityError : Error {
    explicit CompatibilityError(const std::string& msg) : Error("compatibility", msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io", msg) {}
};

}  // namespace lmpm
