#pragma once

#include <stdexcept>
#include <string>

namespace rmdn {

/// Base class for every error raised by the toolkit. `kind()` is a short
/// machine-readable tag that the CLI copies into its error record.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error("input", what) {}
};

class ModelError : public Error {
public:
    explicit ModelError(const std::string& what) : Error("model", what) {}
};

class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& what) : Error("training", what) {}
};

}  // namespace rmdn
