#pragma once

#include <stdexcept>
#include <string>

namespace symgrad {

// Process exit codes used by the command-line tool.
enum class ExitCode : int { Success = 0, Usage = 1, Data = 2, StaleArtifact = 3 };

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    [[nodiscard]] ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Bad arguments or preconditions supplied by the caller.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ExitCode::Usage, what) {}
};

/// Data-dependent failures: non-finite values, failed generation, empty selections, divergence.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::Data, what) {}
};

class DomainError : public DataError {
public:
    using DataError::DataError;
};

class NumericError : public DataError {
public:
    using DataError::DataError;
};

class GenerationError : public DataError {
public:
    using DataError::DataError;
};

class TrainingError : public DataError {
public:
    TrainingError(const std::string& what, std::size_t epoch) : DataError(what), epoch_(epoch) {}
    [[nodiscard]] std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

class ExtractionError : public DataError {
public:
    using DataError::DataError;
};

/// Input that makes a statistic undefined, such as a constant ranking variable.
class DegenerateInputError : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public UsageError {
public:
    ParseError(const std::string& what, std::size_t offset)
        : UsageError(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// An upstream artifact is missing or no longer matches the hash recorded for it.
class StaleArtifactError : public Error {
public:
    explicit StaleArtifactError(const std::string& what) : Error(ExitCode::StaleArtifact, what) {}
};

}  // namespace symgrad
