#ifndef ADPREDICT_ERROR_HPP
#define ADPREDICT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace adpredict {

// Exit-code mapping used by the CLI: config 1, data 2, metric-undefined 3.

/// Invalid configuration or argument supplied by the caller.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A metric is mathematically undefined for the given input (e.g. one class only).
class MetricUndefined : public std::runtime_error {
public:
    explicit MetricUndefined(const std::string& what) : std::runtime_error(what) {}
};

/// Argument outside an operation's domain.
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// Wraps an error raised inside a pipeline stage with the stage name.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what, int exit_code)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), exit_code_(exit_code) {}

    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

}  // namespace adpredict

#endif  // ADPREDICT_ERROR_HPP
